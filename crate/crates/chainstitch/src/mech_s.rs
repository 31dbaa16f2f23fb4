//! Segment-guarantee mechanism: build per-hospital paths of one fixed length,
//! interleave them across hospitals, and stitch.
//!
//! Outline for threshold `s` and robustness factor `f`, with build length
//! `s' = max(2, s/f)` (raised to cover two stitch windows) and window
//! `s'' = max(1, s/f^2)`:
//!
//! 1. If the altruist's hospital has no internal `s'`-node path from the
//!    altruist, return the singleton chain — nothing useful can be built.
//! 2. For every hospital, pack a maximum number of disjoint internal paths of
//!    exactly `s'` nodes; the altruist's hospital must anchor one at the
//!    altruist.
//! 3. Pick the hospital `j` with the most paths (smallest id on ties) and
//!    re-select its paths for maximum total length, with the path count boxed
//!    between the best other hospital's count and the sum of all other
//!    counts. The box keeps an alternating arrangement possible and caps how
//!    much the mechanism ever relies on one hospital.
//! 4. Arrange all paths cyclically so neighbors belong to different
//!    hospitals, rotate the altruist's anchored path to the front, and stitch
//!    consecutive paths within window `s''`.
//!
//! On a successful stitch each hospital keeps all its built paths minus at
//! most `2 s'' - 1` nodes per path; if some junction has no edge, the
//! mechanism falls back to the singleton chain and reports failure.

use std::collections::HashSet;

use crate::arrange::arrange_alternating;
use crate::graph::{HospitalId, Path, ViewGraph};
use crate::packing::{CountTie, Subgraph};
use crate::params::{segment_params, MechConfig};
use crate::stitch::stitch_sequence;
use crate::trace::{finish_outcome, Outcome, Status, Trace, TraceEvent};
use crate::Result;

fn singleton(view: &ViewGraph, status: Status, trace: Trace) -> Result<Outcome> {
    finish_outcome(view, status, Path::single(view.altruist()), trace)
}

/// Run the segment-guarantee mechanism on a reported view.
pub fn run(view: &ViewGraph, config: &MechConfig) -> Result<Outcome> {
    let mut trace = Trace::new();
    let n_view = view.node_count();
    let f = config.f_policy.resolve(n_view);
    let params = segment_params(config.s, f);
    let (s_prime, s_dprime) = (params.s_prime, params.s_dprime);
    trace.push(TraceEvent::Params {
        mechanism: "segment",
        s: config.s,
        f,
        s_prime,
        s_dprime: Some(s_dprime),
        n_view,
    });
    if n_view < config.min_view_nodes {
        trace.push(TraceEvent::EarlyReturn {
            reason: "below-min-view",
        });
        return singleton(view, Status::Failure, trace);
    }
    let alt = view.altruist();
    let a = view.owner(alt);
    let hospitals = view.hospital_count() as HospitalId;

    // Build stage: maximum packings of exact-length internal paths.
    let a_sub = Subgraph::internal(view, a);
    let longest_from_alt = a_sub.longest_path_from(alt, &HashSet::new(), config.budget)?;
    if longest_from_alt.len() < s_prime {
        trace.push(TraceEvent::EarlyReturn {
            reason: "no-internal-build-path",
        });
        return singleton(view, Status::Success, trace);
    }
    let mut pathsets: Vec<Vec<Path>> = Vec::with_capacity(hospitals as usize);
    for h in 0..hospitals {
        let sub = if h == a {
            a_sub.clone()
        } else {
            Subgraph::internal(view, h)
        };
        let anchor = (h == a).then_some(alt);
        pathsets.push(sub.max_cardinality_exact_len(s_prime, anchor, config.budget)?);
    }
    let counts: Vec<usize> = pathsets.iter().map(Vec::len).collect();
    trace.push(TraceEvent::HospitalCounts {
        counts: counts.clone(),
    });

    // Re-selection stage for the most productive hospital.
    let j = (0..hospitals)
        .max_by_key(|&h| (counts[h as usize], std::cmp::Reverse(h)))
        .expect("at least one hospital");
    let others_max = (0..hospitals)
        .filter(|&h| h != j)
        .map(|h| counts[h as usize])
        .max()
        .unwrap_or(0);
    let others_sum: usize = (0..hospitals)
        .filter(|&h| h != j)
        .map(|h| counts[h as usize])
        .sum();
    let (lower, upper) = if j == a {
        (others_max.max(1), others_sum + 1)
    } else {
        (others_max, others_sum)
    };
    trace.push(TraceEvent::SelectedHospital {
        hospital: j,
        lower,
        upper,
    });
    let j_sub = if j == a {
        a_sub
    } else {
        Subgraph::internal(view, j)
    };
    pathsets[j as usize] = j_sub.max_total_packing(
        lower,
        upper,
        s_prime,
        (j == a).then_some(alt),
        CountTie::Max,
        config.budget,
    )?;
    for (h, paths) in pathsets.iter().enumerate() {
        if !paths.is_empty() {
            trace.push(TraceEvent::Pathset {
                owner: h as HospitalId,
                stage: "build",
                paths: paths.iter().map(|p| p.0.clone()).collect(),
            });
        }
    }

    // Arrangement stage: one ball per path, colored by hospital, with the
    // anchored path leading.
    let balls: Vec<(HospitalId, Path)> = pathsets
        .iter()
        .enumerate()
        .flat_map(|(h, ps)| ps.iter().map(move |p| (h as HospitalId, p.clone())))
        .collect();
    let anchored_at = |seq: &[(HospitalId, Path)]| {
        seq.iter()
            .position(|(h, p)| *h == a && p.first() == Some(alt))
            .expect("anchored path exists")
    };
    let count_a = pathsets[a as usize].len();
    let rest_total = balls.len() - count_a;
    let seq: Vec<(HospitalId, Path)> = if balls.len() == 1 {
        balls
    } else if count_a == rest_total + 1 {
        // The altruist's hospital holds exactly one more path than everyone
        // else combined: no cyclic arrangement exists, but the open sequence
        // a, other, a, ..., other, a alternates fine.
        let lead = anchored_at(&balls);
        let mut a_paths: Vec<(HospitalId, Path)> = Vec::new();
        let mut others: Vec<(HospitalId, Path)> = Vec::new();
        for (idx, ball) in balls.into_iter().enumerate() {
            if ball.0 == a {
                if idx == lead {
                    a_paths.insert(0, ball);
                } else {
                    a_paths.push(ball);
                }
            } else {
                others.push(ball);
            }
        }
        let mut seq = Vec::new();
        for (ai, other) in a_paths.drain(..).zip(others.into_iter().map(Some).chain([None])) {
            seq.push(ai);
            if let Some(o) = other {
                seq.push(o);
            }
        }
        seq
    } else {
        let lead = anchored_at(&balls);
        arrange_alternating(balls, lead)?
    };
    trace.push(TraceEvent::Arrangement {
        order: seq.iter().map(|(h, p)| (*h, p.0.clone())).collect(),
    });

    // Stitch stage.
    let paths_only: Vec<Path> = seq.iter().map(|(_, p)| p.clone()).collect();
    match stitch_sequence(view, &paths_only, s_dprime) {
        Ok(stitched) => {
            for junction in &stitched.junctions {
                trace.push(TraceEvent::StitchJunction {
                    junction: junction.clone(),
                });
            }
            finish_outcome(view, Status::Success, stitched.path, trace)
        }
        Err(no_edge) => {
            trace.push(TraceEvent::StitchFailed {
                position: no_edge.0,
            });
            singleton(view, Status::Failure, trace)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{CompatGraph, Instance};
    use crate::params::FPolicy;
    use crate::trace::audit_trace;
    use std::collections::BTreeSet;
    use std::sync::Arc;

    fn config(s: u32, f: u32) -> MechConfig {
        MechConfig::new(s).with_f(FPolicy::Fixed(f))
    }

    /// Hospitals 0 and 1, each owning one chain, with optional extra base edges.
    fn two_chains(len_a: u32, len_b: u32, p: f64, extra: &[(u32, u32)]) -> Arc<Instance> {
        let mut owners = vec![0u32; len_a as usize];
        owners.extend(vec![1u32; len_b as usize]);
        let mut base: BTreeSet<(u32, u32)> = (0..len_a - 1).map(|i| (i, i + 1)).collect();
        base.extend((len_a..len_a + len_b - 1).map(|i| (i, i + 1)));
        base.extend(extra.iter().copied());
        Arc::new(Instance::new(owners, base, 0, p).unwrap())
    }

    #[test]
    fn full_random_graph_keeps_every_built_node() {
        // Two 12-chains at p = 1 with s = 8, f = 2: s' = 4, s'' = 2. Each
        // hospital builds three 4-node paths; with every cross edge present
        // the stitcher loses nothing, so welfare is the full 24.
        let inst = two_chains(12, 12, 1.0, &[]);
        let view = CompatGraph::sample(inst, 7).full_view();
        let out = run(&view, &config(8, 2)).unwrap();
        assert_eq!(out.status, Status::Success);
        assert_eq!(out.welfare, 24);
        assert_eq!(out.utilities, vec![12, 12]);
        assert_eq!(out.path.first(), Some(0));
        audit_trace(&out.trace).unwrap();
    }

    #[test]
    fn no_cross_edges_fails_to_singleton() {
        let inst = two_chains(12, 12, 0.0, &[]);
        let view = CompatGraph::sample(inst, 0).full_view();
        let out = run(&view, &config(8, 2)).unwrap();
        assert_eq!(out.status, Status::Failure);
        assert_eq!(out.path.0, vec![0]);
        assert_eq!(out.welfare, 1);
        assert!(out
            .trace
            .events
            .iter()
            .any(|e| matches!(e, TraceEvent::StitchFailed { .. })));
    }

    #[test]
    fn short_build_side_returns_singleton_success() {
        // The altruist's hospital has only a 3-chain; s' = 4 cannot be built.
        let inst = two_chains(3, 12, 1.0, &[]);
        let view = CompatGraph::sample(inst, 0).full_view();
        let out = run(&view, &config(8, 2)).unwrap();
        assert_eq!(out.status, Status::Success);
        assert_eq!(out.path.0, vec![0]);
    }

    #[test]
    fn sparse_base_edges_force_truncation() {
        // 10-chain + 10-chain at p = 0 with cross base edges 3->10, 13->4,
        // 8->15 only. Build: hospital 0 re-selects {0..3, 4..9} (box [2,3]
        // cannot fit three 4-node paths in 10 nodes), hospital 1 keeps
        // {10..13, 14..17}. The last junction must use 8->15, cutting nodes 9
        // and 14.
        let inst = two_chains(10, 10, 0.0, &[(3, 10), (13, 4), (8, 15)]);
        let view = CompatGraph::sample(inst, 0).full_view();
        let out = run(&view, &config(8, 2)).unwrap();
        assert_eq!(out.status, Status::Success);
        assert_eq!(
            out.path.0,
            vec![0, 1, 2, 3, 10, 11, 12, 13, 4, 5, 6, 7, 8, 15, 16, 17]
        );
        assert_eq!(out.welfare, 16);
        assert_eq!(out.utilities, vec![9, 7]);
    }

    #[test]
    fn surplus_anchor_hospital_interleaves_linearly() {
        // Hospital 0: 8-chain (two paths), hospital 1: 4-chain (one path).
        // j = 0 with box [1, 2]; both counts tie on total 8, so the max-count
        // tie keeps two paths and the sequence must run a, b, a.
        let inst = two_chains(8, 4, 1.0, &[]);
        let view = CompatGraph::sample(inst, 3).full_view();
        let out = run(&view, &config(8, 2)).unwrap();
        assert_eq!(out.status, Status::Success);
        assert_eq!(out.path.0, vec![0, 1, 2, 3, 8, 9, 10, 11, 4, 5, 6, 7]);
        assert_eq!(out.utilities, vec![8, 4]);
    }

    #[test]
    fn single_path_needs_no_stitching() {
        // Only the altruist's hospital exists; one anchored path stitches
        // trivially. Box is [1, 1] so re-selection keeps one path of maximum
        // total length: the whole chain.
        let base: BTreeSet<_> = (0..9u32).map(|i| (i, i + 1)).collect();
        let inst = Arc::new(Instance::new(vec![0; 10], base, 0, 0.0).unwrap());
        let view = CompatGraph::sample(inst, 0).full_view();
        let out = run(&view, &config(8, 2)).unwrap();
        assert_eq!(out.status, Status::Success);
        assert_eq!(out.welfare, 10);
    }

    #[test]
    fn deterministic_trace_digest() {
        let inst = two_chains(12, 12, 0.6, &[]);
        let view = CompatGraph::sample(Arc::clone(&inst), 11).full_view();
        let out1 = run(&view, &config(8, 2)).unwrap();
        let view2 = CompatGraph::sample(inst, 11).full_view();
        let out2 = run(&view2, &config(8, 2)).unwrap();
        assert_eq!(out1.trace.digest(), out2.trace.digest());
        assert_eq!(out1.path, out2.path);
    }
}
