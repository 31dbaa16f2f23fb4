//! Exact path benchmarks on a reported view.
//!
//! All four benchmarks consider simple paths starting at the altruist and
//! score them by node count:
//!
//! * **opt** — no constraint: the longest chain at all.
//! * **sopt** — every maximal same-hospital segment must have at least `s`
//!   nodes; if no chain qualifies the benchmark is the empty chain.
//! * **avgopt** — for every hospital appearing on the chain, the mean length
//!   of its segments must be at least `s`; weaker than sopt, so its value
//!   always sits between sopt and opt.
//! * **pi_ir** — the chain must stay inside the altruist's hospital. Internal
//!   edges are never random, so this value does not depend on the sampled
//!   realization; it is the individually-rational fallback.
//!
//! Values are computed by exhaustive depth-first search with an exact
//! reachability bound, so results are optimal, not heuristic. Ties prefer the
//! lexicographically smallest node sequence. Searches refuse views larger
//! than the budget; pi_ir additionally exploits chain-structured subgraphs of
//! any size.

use std::collections::HashSet;

use serde::Serialize;

use crate::graph::{segments, HospitalId, Instance, NodeId, Path, ViewGraph};
use crate::packing::Subgraph;
use crate::{Result, SearchBudget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchKind {
    Opt,
    SOpt,
    AvgOpt,
    PiIr,
}

impl BenchKind {
    pub const ALL: [BenchKind; 4] = [
        BenchKind::Opt,
        BenchKind::SOpt,
        BenchKind::AvgOpt,
        BenchKind::PiIr,
    ];

    pub fn takes_s(&self) -> bool {
        matches!(self, BenchKind::SOpt | BenchKind::AvgOpt)
    }

    pub fn label(&self) -> &'static str {
        match self {
            BenchKind::Opt => "opt",
            BenchKind::SOpt => "sopt",
            BenchKind::AvgOpt => "avgopt",
            BenchKind::PiIr => "pi-ir",
        }
    }
}

/// Does every same-hospital segment of `path` have at least `s` nodes?
/// The empty path qualifies vacuously.
pub fn sopt_feasible(path: &Path, instance: &Instance, s: u32) -> bool {
    segments(path, instance)
        .iter()
        .all(|(_, seg)| seg.len() >= s as usize)
}

/// Does every hospital on `path` average at least `s` nodes per segment?
pub fn avgopt_feasible(path: &Path, instance: &Instance, s: u32) -> bool {
    let segs = segments(path, instance);
    let mut sums: Vec<(HospitalId, usize, usize)> = Vec::new();
    for (h, seg) in &segs {
        match sums.iter_mut().find(|(hh, _, _)| hh == h) {
            Some((_, sum, count)) => {
                *sum += seg.len();
                *count += 1;
            }
            None => sums.push((*h, seg.len(), 1)),
        }
    }
    sums.iter().all(|(_, sum, count)| *sum >= (s as usize) * count)
}

enum Mode {
    Opt,
    SOpt(usize),
    AvgOpt(usize),
}

struct Search<'a> {
    view: &'a ViewGraph,
    mode: Mode,
    path: Vec<NodeId>,
    visited: Vec<bool>,
    best: Vec<NodeId>,
    /// Per-hospital (node sum, segment count) along the current path.
    hosp: Vec<(usize, usize)>,
    seg_len: usize,
}

impl<'a> Search<'a> {
    fn run(view: &'a ViewGraph, mode: Mode) -> Path {
        let n = view.instance.n();
        let alt = view.altruist();
        let mut s = Search {
            view,
            mode,
            path: Vec::new(),
            visited: vec![false; n],
            best: Vec::new(),
            hosp: vec![(0, 0); view.hospital_count()],
            seg_len: 0,
        };
        s.enter(alt, None);
        s.dfs(alt);
        Path(s.best)
    }

    fn enter(&mut self, v: NodeId, prev_owner: Option<HospitalId>) {
        self.visited[v as usize] = true;
        self.path.push(v);
        let owner = self.view.owner(v);
        let (sum, count) = &mut self.hosp[owner as usize];
        *sum += 1;
        if prev_owner == Some(owner) {
            self.seg_len += 1;
        } else {
            *count += 1;
            self.seg_len = 1;
        }
    }

    fn leave(&mut self, v: NodeId, prev_owner: Option<HospitalId>, prev_seg: usize) {
        self.visited[v as usize] = false;
        self.path.pop();
        let owner = self.view.owner(v);
        let (sum, count) = &mut self.hosp[owner as usize];
        *sum -= 1;
        if prev_owner != Some(owner) {
            *count -= 1;
        }
        self.seg_len = prev_seg;
    }

    fn feasible_here(&self) -> bool {
        match self.mode {
            Mode::Opt => true,
            Mode::SOpt(s) => self.seg_len >= s,
            Mode::AvgOpt(s) => self
                .hosp
                .iter()
                .all(|&(sum, count)| count == 0 || sum >= s * count),
        }
    }

    fn dfs(&mut self, cur: NodeId) {
        if self.feasible_here() && self.path.len() > self.best.len() {
            self.best.clone_from(&self.path);
        }
        let cur_owner = self.view.owner(cur);
        for &next in self.view.successors(cur) {
            if self.visited[next as usize] {
                continue;
            }
            if let Mode::SOpt(s) = self.mode {
                // A hospital change closes the current segment, which must
                // already be long enough; otherwise no completion can fix it.
                if self.view.owner(next) != cur_owner && self.seg_len < s {
                    continue;
                }
            }
            let bound = self.path.len() + 1 + self.reachable(next);
            if bound <= self.best.len() {
                continue;
            }
            let prev_seg = self.seg_len;
            self.enter(next, Some(cur_owner));
            self.dfs(next);
            self.leave(next, Some(cur_owner), prev_seg);
        }
    }

    /// Unvisited nodes reachable from `from`, excluding `from` itself.
    fn reachable(&self, from: NodeId) -> usize {
        let mut seen = self.visited.clone();
        seen[from as usize] = true;
        let mut stack = vec![from];
        let mut count = 0;
        while let Some(u) = stack.pop() {
            for &v in self.view.successors(u) {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count
    }
}

/// Longest chain from the altruist.
pub fn opt(view: &ViewGraph, budget: SearchBudget) -> Result<Path> {
    budget.check(view.node_count())?;
    Ok(Search::run(view, Mode::Opt))
}

/// Longest chain whose segments all have at least `s` nodes (possibly empty).
pub fn sopt(view: &ViewGraph, s: u32, budget: SearchBudget) -> Result<Path> {
    budget.check(view.node_count())?;
    Ok(Search::run(view, Mode::SOpt(s.max(1) as usize)))
}

/// Longest chain on which every hospital's mean segment length is at least `s`
/// (possibly empty).
pub fn avgopt(view: &ViewGraph, s: u32, budget: SearchBudget) -> Result<Path> {
    budget.check(view.node_count())?;
    Ok(Search::run(view, Mode::AvgOpt(s.max(1) as usize)))
}

/// Longest chain inside the altruist's own hospital, on the reported view.
pub fn pi_ir(view: &ViewGraph, budget: SearchBudget) -> Result<Path> {
    let alt = view.altruist();
    let sub = Subgraph::internal(view, view.owner(alt));
    sub.longest_path_from(alt, &HashSet::new(), budget)
}

/// Longest internal chain over the altruist hospital's full node set, hidden
/// nodes included. This is the individually-rational floor for audits.
pub fn pi_ir_full(instance: &Instance, budget: SearchBudget) -> Result<Path> {
    let sub = Subgraph::internal_full(instance, instance.altruist_owner());
    sub.longest_path_from(instance.altruist, &HashSet::new(), budget)
}
