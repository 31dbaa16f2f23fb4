//! Average-guarantee mechanism: count each hospital's path capacity, select
//! and normalize pathsets, then grow an explored set from the altruist until
//! it can be spliced into the selected paths.
//!
//! For threshold `s`, robustness factor `f`, and quantum `s' = max(1, s/f^2)`:
//!
//! 1. **Count.** For each hospital find the largest `k` such that `k` disjoint
//!    internal paths can average `s` nodes, and grant it `f * k` path slots.
//!    Hospitals with zero slots are inactive. If the altruist's hospital is
//!    inactive, or is the only active one, return the longest internal chain
//!    from the altruist (the individually-rational fallback) as a success.
//! 2. **Select.** Cap the most productive hospital's slots at everyone else's
//!    sum, then pick, per active hospital, disjoint internal paths of maximum
//!    total length using at most its slots.
//! 3. **Normalize.** Drop paths shorter than `4 s'`, then repeatedly split a
//!    `4 s'`-node suffix off the longest path until the slot count is met. A
//!    donor shorter than `8 s'` cannot be split; that degenerate case falls
//!    back to the internal chain as a failure.
//! 4. **Search.** Grow an explored set from the altruist, always inserting the
//!    smallest eligible node reachable by one edge, recording parent links.
//!    Hitting a selected path strips its suffix: a long suffix (at least `s'`)
//!    becomes the spine of an immediate stitch (mode 1); a short one is
//!    absorbed into the explored set. The set never exceeds `2 s'` nodes. If
//!    it stalls below `s'` nodes the fallback chain is returned as a success.
//!    Otherwise an edge from the explored set into the first `s'` nodes of
//!    some path starts the stitch (mode 2); no such edge is a failure.
//! 5. **Stitch.** The entry path (altruist to the hit, continuing along the
//!    hit path's suffix) leads; the remaining paths follow in a cyclic
//!    owner-alternating arrangement rotated to the hit path's slot, stitched
//!    with window `s'`.

use std::collections::{HashMap, HashSet};

use crate::arrange::arrange_alternating;
use crate::benchmarks::pi_ir;
use crate::graph::{HospitalId, NodeId, Path, ViewGraph};
use crate::packing::{CountTie, Subgraph};
use crate::params::{average_s_prime, MechConfig};
use crate::stitch::stitch_sequence;
use crate::trace::{finish_outcome, Outcome, Status, Trace, TraceEvent};
use crate::Result;

/// Run the average-guarantee mechanism on a reported view.
pub fn run(view: &ViewGraph, config: &MechConfig) -> Result<Outcome> {
    let mut trace = Trace::new();
    let n_view = view.node_count();
    let f = config.f_policy.resolve(n_view);
    let s_prime = average_s_prime(config.s, f);
    trace.push(TraceEvent::Params {
        mechanism: "average",
        s: config.s,
        f,
        s_prime,
        s_dprime: None,
        n_view,
    });
    let fallback = |view: &ViewGraph, status: Status, trace: Trace, reason: &'static str| {
        let mut trace = trace;
        trace.push(TraceEvent::EarlyReturn { reason });
        let path = pi_ir(view, config.budget)?;
        finish_outcome(view, status, path, trace)
    };
    if n_view < config.min_view_nodes {
        return fallback(view, Status::Failure, trace, "below-min-view");
    }
    let alt = view.altruist();
    let a = view.owner(alt);
    let hospitals = view.hospital_count() as HospitalId;

    // Counting stage.
    let mut slots: Vec<usize> = Vec::with_capacity(hospitals as usize);
    for h in 0..hospitals {
        let k = Subgraph::internal(view, h).max_mean_count(config.s as usize, config.budget)?;
        slots.push(k * f as usize);
    }
    trace.push(TraceEvent::HospitalCounts {
        counts: slots.clone(),
    });
    let active: Vec<bool> = slots.iter().map(|&c| c > 0).collect();
    if !active[a as usize] {
        return fallback(view, Status::Success, trace, "altruist-inactive");
    }
    if active.iter().filter(|&&x| x).count() == 1 {
        return fallback(view, Status::Success, trace, "no-partner-hospital");
    }

    // Cap the leader so an alternating arrangement always exists.
    let j = (0..hospitals)
        .max_by_key(|&h| (slots[h as usize], std::cmp::Reverse(h)))
        .expect("at least one hospital");
    let others_sum: usize = (0..hospitals)
        .filter(|&h| h != j)
        .map(|h| slots[h as usize])
        .sum();
    if slots[j as usize] > others_sum {
        trace.push(TraceEvent::CountCapped {
            hospital: j,
            before: slots[j as usize],
            after: others_sum,
        });
        slots[j as usize] = others_sum;
    }
    trace.push(TraceEvent::SelectedHospital {
        hospital: j,
        lower: slots[j as usize],
        upper: slots[j as usize],
    });

    // Selection and normalization per active hospital.
    let quantum = 4 * s_prime;
    let mut paths: Vec<(HospitalId, Vec<NodeId>)> = Vec::new();
    for h in 0..hospitals {
        if !active[h as usize] {
            continue;
        }
        let target = slots[h as usize];
        let sub = Subgraph::internal(view, h);
        let selected = sub.max_total_packing(0, target, 1, None, CountTie::Min, config.budget)?;
        trace.push(TraceEvent::Pathset {
            owner: h,
            stage: "selected",
            paths: selected.iter().map(|p| p.0.clone()).collect(),
        });
        let mut kept: Vec<Vec<NodeId>> = Vec::new();
        for p in selected {
            if p.len() >= quantum {
                kept.push(p.0);
            } else {
                trace.push(TraceEvent::NormalizeDropped { path: p.0 });
            }
        }
        while kept.len() < target {
            // Donor: longest kept path, smallest head on ties.
            let donor = kept
                .iter()
                .enumerate()
                .max_by_key(|(_, p)| (p.len(), std::cmp::Reverse(p[0])))
                .map(|(i, _)| i);
            let viable = donor.is_some_and(|i| kept[i].len() >= 2 * quantum);
            if !viable {
                let donor_len = donor.map_or(0, |i| kept[i].len());
                trace.push(TraceEvent::DegenerateNormalization {
                    donor_len,
                    required: 2 * quantum,
                });
                return fallback(view, Status::Failure, trace, "degenerate-normalization");
            }
            let i = donor.unwrap();
            let cut = kept[i].len() - quantum;
            let part = kept[i].split_off(cut);
            trace.push(TraceEvent::NormalizeSplit {
                donor_first: kept[i][0],
                part: part.clone(),
            });
            kept.push(part);
        }
        kept.sort_by_key(|p| p[0]);
        trace.push(TraceEvent::Pathset {
            owner: h,
            stage: "normalized",
            paths: kept.clone(),
        });
        paths.extend(kept.into_iter().map(|p| (h, p)));
    }

    // Search stage: explored set with parent links, suffix-stripping on hits.
    let mut position: HashMap<NodeId, (usize, usize)> = HashMap::new();
    for (pi, (_, p)) in paths.iter().enumerate() {
        for (pos, &v) in p.iter().enumerate() {
            position.insert(v, (pi, pos));
        }
    }
    let mut explored: Vec<NodeId> = Vec::new();
    let mut in_explored: HashSet<NodeId> = HashSet::new();
    let mut parent: HashMap<NodeId, Option<NodeId>> = HashMap::new();
    let ancestry = |parent: &HashMap<NodeId, Option<NodeId>>, v: NodeId| -> Vec<NodeId> {
        let mut chain = vec![v];
        let mut cur = v;
        while let Some(Some(p)) = parent.get(&cur) {
            chain.push(*p);
            cur = *p;
        }
        chain.reverse();
        chain
    };
    let mut nu = alt;
    let mut nu_parent: Option<NodeId> = None;
    let mut stitch1: Option<(usize, Vec<NodeId>)> = None; // (path index, spine)
    loop {
        explored.push(nu);
        in_explored.insert(nu);
        parent.insert(nu, nu_parent);
        let mut hit: Option<(usize, usize, usize)> = None;
        if let Some(&(pi, pos)) = position.get(&nu) {
            // Strip the suffix from the hit path.
            let sigma: Vec<NodeId> = paths[pi].1.split_off(pos);
            for &v in &sigma {
                position.remove(&v);
            }
            hit = Some((pi, pos, sigma.len()));
            if sigma.len() >= s_prime {
                trace.push(TraceEvent::SearchStep {
                    node: nu,
                    parent: nu_parent,
                    explored_after: explored.len(),
                    hit_path: Some(pi),
                    hit_pos: Some(pos),
                    sigma_len: Some(sigma.len()),
                });
                let spine: Vec<NodeId> = ancestry(&parent, nu)
                    .into_iter()
                    .chain(sigma.into_iter().skip(1))
                    .collect();
                stitch1 = Some((pi, spine));
                break;
            }
            // Absorb the short suffix, chaining parents along it.
            for pair in sigma.windows(2) {
                explored.push(pair[1]);
                in_explored.insert(pair[1]);
                parent.insert(pair[1], Some(pair[0]));
            }
        }
        trace.push(TraceEvent::SearchStep {
            node: nu,
            parent: nu_parent,
            explored_after: explored.len(),
            hit_path: hit.map(|(pi, _, _)| pi),
            hit_pos: hit.map(|(_, pos, _)| pos),
            sigma_len: hit.map(|(_, _, l)| l),
        });
        if explored.len() >= s_prime {
            break;
        }
        // Next candidate: smallest eligible node, smallest in-edge parent.
        let mut sorted_exp: Vec<NodeId> = explored.clone();
        sorted_exp.sort_unstable();
        let mut next: Option<(NodeId, NodeId)> = None;
        'nodes: for &v in view.nodes.iter() {
            if in_explored.contains(&v) || !active[view.owner(v) as usize] {
                continue;
            }
            for &x in &sorted_exp {
                if view.has_edge(x, v) {
                    next = Some((v, x));
                    break 'nodes;
                }
            }
        }
        match next {
            Some((v, x)) => {
                nu = v;
                nu_parent = Some(x);
            }
            None => break,
        }
    }

    // Assemble the stitch sequence.
    let (lead_index, entry) = match stitch1 {
        Some((pi, spine)) => {
            trace.push(TraceEvent::StitchOne {
                path_index: pi,
                entry: spine.clone(),
            });
            (pi, spine)
        }
        None => {
            if explored.len() < s_prime {
                return fallback(view, Status::Success, trace, "search-exhausted");
            }
            let mut sorted_exp: Vec<NodeId> = explored.clone();
            sorted_exp.sort_unstable();
            let mut witness: Option<(NodeId, usize, usize)> = None;
            'scan: for &v in &sorted_exp {
                for (pi, (_, p)) in paths.iter().enumerate() {
                    for (q, &w) in p.iter().enumerate().take(s_prime) {
                        if view.has_edge(v, w) {
                            witness = Some((v, pi, q));
                            break 'scan;
                        }
                    }
                }
            }
            let Some((v, pi, q)) = witness else {
                return fallback(view, Status::Failure, trace, "no-witness");
            };
            trace.push(TraceEvent::StitchTwo {
                witness_tail: v,
                path_index: pi,
                position: q,
            });
            let suffix: Vec<NodeId> = paths[pi].1.split_off(q);
            // The short leftover prefix is dropped; its slot anchors rotation.
            paths[pi].1.clear();
            let entry: Vec<NodeId> = ancestry(&parent, v).into_iter().chain(suffix).collect();
            (pi, entry)
        }
    };
    let lead_owner = paths[lead_index].0;
    let seq: Vec<(HospitalId, Path)> = if paths.len() == 1 {
        let mut seq = vec![(lead_owner, Path(entry))];
        if paths[lead_index].1.len() >= 2 * s_prime {
            seq.push((lead_owner, Path(paths[lead_index].1.clone())));
        }
        seq
    } else {
        let balls: Vec<(HospitalId, usize)> = paths
            .iter()
            .enumerate()
            .map(|(i, (h, _))| (*h, i))
            .collect();
        let cyclic = arrange_alternating(balls, lead_index)?;
        let mut seq = vec![(lead_owner, Path(entry))];
        for &(h, i) in cyclic.iter().skip(1) {
            seq.push((h, Path(paths[i].1.clone())));
        }
        // The hit path's remainder rejoins at the end when long enough; its
        // cyclic predecessor has a different owner, so alternation holds.
        if paths[lead_index].1.len() >= 2 * s_prime {
            seq.push((lead_owner, Path(paths[lead_index].1.clone())));
        }
        seq
    };
    trace.push(TraceEvent::Arrangement {
        order: seq.iter().map(|(h, p)| (*h, p.0.clone())).collect(),
    });
    let seq_paths: Vec<Path> = seq.into_iter().map(|(_, p)| p).collect();
    match stitch_sequence(view, &seq_paths, s_prime) {
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
            fallback(view, Status::Failure, trace, "stitch-failed")
        }
    }
}
