//! Windowed stitching of a path sequence into one long chain.
//!
//! Given an ordered sequence of disjoint paths, consecutive paths are joined
//! by a compatibility edge from near the end of one to near the start of the
//! next. "Near" means within a fixed window: the last `w` remaining nodes of
//! the earlier path and the first `w` nodes of the later one. Joining at
//! (u, v) truncates the earlier path after u and the later path before v, so
//! at most `w - 1` nodes are lost on each side per junction. Among available
//! edges the one retaining the most nodes wins, with node-id order breaking
//! ties; with all cross edges present the chain keeps every node.

use serde::Serialize;

use crate::graph::{NodeId, Path, ViewGraph};

/// One successful junction between consecutive paths in the sequence.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct Junction {
    pub tail: NodeId,
    pub head: NodeId,
    /// Nodes cut from the end of the earlier path.
    pub dropped_tail: usize,
    /// Nodes cut from the start of the later path.
    pub dropped_head: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stitched {
    pub path: Path,
    pub junctions: Vec<Junction>,
}

/// Index of the first junction that admits no edge, when stitching fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoEdgeAt(pub usize);

/// Stitch `seq` in order with window `window`. Paths must be nonempty and
/// disjoint; the caller is responsible for ordering them so that junctions can
/// plausibly exist (e.g. alternating owners so junctions cross hospitals).
pub fn stitch_sequence(
    view: &ViewGraph,
    seq: &[Path],
    window: usize,
) -> Result<Stitched, NoEdgeAt> {
    assert!(window >= 1);
    assert!(!seq.is_empty() && seq.iter().all(|p| !p.is_empty()));
    let mut chain: Vec<NodeId> = seq[0].0.clone();
    // Remaining length of the most recently appended path; the tail window may
    // not reach past it into earlier paths.
    let mut last_len = seq[0].len();
    let mut junctions = Vec::new();
    for (pos, next) in seq.iter().enumerate().skip(1) {
        let tail_w = window.min(last_len);
        let head_w = window.min(next.len());
        // (retained, tail id, head id) -> (tail index from end, head index)
        let mut best: Option<(usize, NodeId, NodeId, usize, usize)> = None;
        for ti in 0..tail_w {
            let u = chain[chain.len() - 1 - ti];
            for hi in 0..head_w {
                let v = next.0[hi];
                if !view.has_edge(u, v) {
                    continue;
                }
                let retained = (last_len - ti) + (next.len() - hi);
                let better = match &best {
                    None => true,
                    Some((r, bu, bv, _, _)) => {
                        (retained, std::cmp::Reverse(u), std::cmp::Reverse(v))
                            > (*r, std::cmp::Reverse(*bu), std::cmp::Reverse(*bv))
                    }
                };
                if better {
                    best = Some((retained, u, v, ti, hi));
                }
            }
        }
        let Some((_, u, v, ti, hi)) = best else {
            return Err(NoEdgeAt(pos));
        };
        chain.truncate(chain.len() - ti);
        chain.extend_from_slice(&next.0[hi..]);
        junctions.push(Junction {
            tail: u,
            head: v,
            dropped_tail: ti,
            dropped_head: hi,
        });
        last_len = next.len() - hi;
    }
    Ok(Stitched {
        path: Path(chain),
        junctions,
    })
}
