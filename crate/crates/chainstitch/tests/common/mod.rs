//! Brute-force reference implementations for the integration suites.
//!
//! Everything here enumerates every simple chain from the source node with no
//! pruning and no code shared with the library's searches, so agreement is
//! meaningful evidence. Tie-breaks are explicit: longer wins, then the
//! lexicographically smaller node sequence, independent of visit order.

use std::collections::BTreeMap;

use chainstitch::graph::{HospitalId, NodeId, ViewGraph};

/// Exact benchmark values computed by exhaustive enumeration.
pub struct OracleResults {
    /// Longest chain from the source.
    pub opt: Vec<NodeId>,
    /// Longest chain staying inside the source's hospital.
    pub pi_ir: Vec<NodeId>,
    /// Longest chain whose every hospital segment has at least s nodes.
    pub sopt: BTreeMap<u32, Vec<NodeId>>,
    /// Longest chain where each hospital's mean segment length is at least s.
    pub avgopt: BTreeMap<u32, Vec<NodeId>>,
}

fn better(candidate: &[NodeId], incumbent: &[NodeId]) -> bool {
    candidate.len() > incumbent.len()
        || (candidate.len() == incumbent.len() && candidate < incumbent)
}

/// Consecutive same-hospital runs of a chain, as (hospital, length) pairs.
pub fn segment_lengths(path: &[NodeId], view: &ViewGraph) -> Vec<(HospitalId, usize)> {
    let mut out: Vec<(HospitalId, usize)> = Vec::new();
    for &v in path {
        let h = view.owner(v);
        match out.last_mut() {
            Some((last, len)) if *last == h => *len += 1,
            _ => out.push((h, 1)),
        }
    }
    out
}

fn every_segment_at_least(path: &[NodeId], view: &ViewGraph, s: u32) -> bool {
    segment_lengths(path, view)
        .iter()
        .all(|&(_, len)| len >= s as usize)
}

fn every_mean_at_least(path: &[NodeId], view: &ViewGraph, s: u32) -> bool {
    let mut totals: BTreeMap<HospitalId, (usize, usize)> = BTreeMap::new();
    for (h, len) in segment_lengths(path, view) {
        let entry = totals.entry(h).or_insert((0, 0));
        entry.0 += len;
        entry.1 += 1;
    }
    totals
        .values()
        .all(|&(sum, count)| sum >= s as usize * count)
}

/// Enumerate every simple chain from the view's source and keep the best
/// chain for each benchmark. `s_values` selects which thresholds to track.
pub fn oracle_benchmarks(view: &ViewGraph, s_values: &[u32]) -> OracleResults {
    let source = view.altruist();
    let home = view.owner(source);
    let mut results = OracleResults {
        opt: Vec::new(),
        pi_ir: Vec::new(),
        sopt: s_values.iter().map(|&s| (s, Vec::new())).collect(),
        avgopt: s_values.iter().map(|&s| (s, Vec::new())).collect(),
    };

    let mut path = vec![source];
    let mut on_path = vec![false; view.instance.n()];
    on_path[source as usize] = true;
    visit(view, &mut path, &mut on_path, home, s_values, &mut results);
    results
}

fn visit(
    view: &ViewGraph,
    path: &mut Vec<NodeId>,
    on_path: &mut Vec<bool>,
    home: HospitalId,
    s_values: &[u32],
    results: &mut OracleResults,
) {
    if better(path, &results.opt) {
        results.opt = path.clone();
    }
    if path.iter().all(|&v| view.owner(v) == home) && better(path, &results.pi_ir) {
        results.pi_ir = path.clone();
    }
    for &s in s_values {
        if every_segment_at_least(path, view, s) {
            let best = results.sopt.get_mut(&s).unwrap();
            if better(path, best) {
                *best = path.clone();
            }
        }
        if every_mean_at_least(path, view, s) {
            let best = results.avgopt.get_mut(&s).unwrap();
            if better(path, best) {
                *best = path.clone();
            }
        }
    }
    let current = *path.last().unwrap();
    for &next in view.successors(current) {
        if !on_path[next as usize] {
            path.push(next);
            on_path[next as usize] = true;
            visit(view, path, on_path, home, s_values, results);
            path.pop();
            on_path[next as usize] = false;
        }
    }
}
