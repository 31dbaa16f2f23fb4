//! Exact solvers on one hospital's internal subgraph.
//!
//! Mechanisms need three exact optimizations per hospital: a maximum set of
//! disjoint paths of one exact length, a maximum-total-length packing under a
//! path-count box, and the largest packing size whose mean path length clears a
//! threshold. All three are NP-hard in general, so the general solver is an
//! exhaustive branch-and-bound restricted to desk-scale subgraphs. When the
//! internal subgraph is a union of simple chains — which covers the structured
//! instance families at any size — polynomial exact routines are used instead.

use std::collections::{HashMap, HashSet};

use crate::graph::{HospitalId, Instance, NodeId, Path, ViewGraph};
use crate::{Error, Result, SearchBudget};

/// Hard cap for bitmask-based branch-and-bound.
const MASK_LIMIT: usize = 64;

/// How a maximum-total packing resolves ties between path counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountTie {
    /// Prefer more paths; keeps the selected count monotone under hiding.
    Max,
    /// Prefer fewer, longer paths; avoids fragments a later stage would drop.
    Min,
}

impl CountTie {
    fn better(&self, total: usize, count: usize, best_total: usize, best_count: usize) -> bool {
        match self {
            CountTie::Max => (total, count) > (best_total, best_count),
            CountTie::Min => total > best_total || (total == best_total && count < best_count),
        }
    }
}

/// Internal subgraph of a single hospital: its nodes and the edges between them.
#[derive(Debug, Clone)]
pub struct Subgraph {
    /// Global node ids, ascending; local index = position.
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    adj: Vec<Vec<usize>>,
    /// Chain decomposition when the subgraph is a union of simple chains.
    chains: Option<Vec<Vec<usize>>>,
}

impl Subgraph {
    /// Internal subgraph of `hospital` as declared in `view`.
    pub fn internal(view: &ViewGraph, hospital: HospitalId) -> Self {
        let nodes = view.hospital_nodes(hospital);
        Self::build(nodes, |u, v| view.has_edge(u, v))
    }

    /// Internal subgraph over the hospital's full node set, hidden or not.
    /// Internal edges are base edges only, since random edges cross hospitals.
    pub fn internal_full(instance: &Instance, hospital: HospitalId) -> Self {
        let nodes = instance.hospital_nodes(hospital);
        Self::build(nodes, |u, v| instance.base_edges.contains(&(u, v)))
    }

    fn build(nodes: Vec<NodeId>, has_edge: impl Fn(NodeId, NodeId) -> bool) -> Self {
        let index: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let m = nodes.len();
        let mut adj = vec![Vec::new(); m];
        let mut radj = vec![Vec::new(); m];
        for (i, &u) in nodes.iter().enumerate() {
            for (j, &v) in nodes.iter().enumerate() {
                if i != j && has_edge(u, v) {
                    adj[i].push(j);
                    radj[j].push(i);
                }
            }
        }
        let chains = Self::chain_decomposition(m, &adj, &radj);
        Subgraph {
            nodes,
            index,
            adj,
            chains,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.index.contains_key(&v)
    }

    /// Some(chains) when every node has in- and out-degree at most one and no
    /// cycle exists; each chain is a maximal path, listed in head order.
    fn chain_decomposition(
        m: usize,
        adj: &[Vec<usize>],
        radj: &[Vec<usize>],
    ) -> Option<Vec<Vec<usize>>> {
        if adj.iter().any(|a| a.len() > 1) || radj.iter().any(|r| r.len() > 1) {
            return None;
        }
        let mut visited = vec![false; m];
        let mut chains = Vec::new();
        #[allow(clippy::needless_range_loop)]
        for head in 0..m {
            if radj[head].is_empty() {
                let mut chain = Vec::new();
                let mut cur = head;
                loop {
                    chain.push(cur);
                    visited[cur] = true;
                    match adj[cur].first() {
                        Some(&next) => cur = next,
                        None => break,
                    }
                }
                chains.push(chain);
            }
        }
        if visited.iter().all(|&v| v) {
            Some(chains)
        } else {
            // Leftover nodes lie on directed cycles.
            None
        }
    }

    pub fn is_chain_forest(&self) -> bool {
        self.chains.is_some()
    }

    fn to_path(&self, locals: &[usize]) -> Path {
        Path(locals.iter().map(|&i| self.nodes[i]).collect())
    }

    fn budget_for_bnb(&self, budget: SearchBudget) -> Result<()> {
        let cap = budget.max_nodes.min(MASK_LIMIT);
        if self.node_count() > cap {
            return Err(Error::BudgetExceeded {
                nodes: self.node_count(),
                budget: cap,
            });
        }
        Ok(())
    }

    // -----------------------------------------------------------------------
    // Longest internal path from a fixed start
    // -----------------------------------------------------------------------

    /// Exact longest simple path starting at `start`, avoiding `forbidden`.
    /// Ties resolve to the lexicographically smallest node sequence.
    pub fn longest_path_from(
        &self,
        start: NodeId,
        forbidden: &HashSet<NodeId>,
        budget: SearchBudget,
    ) -> Result<Path> {
        let Some(&s) = self.index.get(&start) else {
            return Err(Error::Precondition(format!(
                "start node {start} not in subgraph"
            )));
        };
        if forbidden.contains(&start) {
            return Err(Error::Precondition(format!("start node {start} forbidden")));
        }
        if self.chains.is_some() {
            // Unique successors: just walk until a forbidden node or the end.
            let mut path = vec![s];
            let mut cur = s;
            while let Some(&next) = self.adj[cur].first() {
                if forbidden.contains(&self.nodes[next]) {
                    break;
                }
                path.push(next);
                cur = next;
            }
            return Ok(self.to_path(&path));
        }
        self.budget_for_bnb(budget)?;
        let mut blocked = 0u64;
        for &v in forbidden {
            if let Some(&i) = self.index.get(&v) {
                blocked |= 1 << i;
            }
        }
        let mut best = vec![s];
        let mut path = vec![s];
        self.lp_dfs(s, (1u64 << s) | blocked, &mut path, &mut best);
        Ok(self.to_path(&best))
    }

    fn lp_dfs(&self, cur: usize, visited: u64, path: &mut Vec<usize>, best: &mut Vec<usize>) {
        if path.len() > best.len() {
            best.clone_from(path);
        }
        for &next in &self.adj[cur] {
            if visited & (1 << next) != 0 {
                continue;
            }
            let ub = path.len() + 1 + self.reachable_count(next, visited | (1 << next));
            if ub <= best.len() {
                continue;
            }
            path.push(next);
            self.lp_dfs(next, visited | (1 << next), path, best);
            path.pop();
        }
    }

    /// Number of unvisited nodes reachable from `from` (excluding it).
    fn reachable_count(&self, from: usize, visited: u64) -> usize {
        let mut seen = visited | (1 << from);
        let mut stack = vec![from];
        let mut count = 0;
        while let Some(u) = stack.pop() {
            for &v in &self.adj[u] {
                if seen & (1 << v) == 0 {
                    seen |= 1 << v;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count
    }

    // -----------------------------------------------------------------------
    // Maximum-cardinality packing of exact-length paths
    // -----------------------------------------------------------------------

    /// Largest set of disjoint internal paths, each with exactly `len` nodes.
    /// With `anchor`, one selected path must start at the anchor node (which
    /// must admit such a path).
    pub fn max_cardinality_exact_len(
        &self,
        len: usize,
        anchor: Option<NodeId>,
        budget: SearchBudget,
    ) -> Result<Vec<Path>> {
        assert!(len >= 1);
        let anchor_local = self.resolve_anchor(anchor)?;
        if let Some(chains) = &self.chains {
            return self.exact_len_on_chains(chains, len, anchor_local);
        }
        self.budget_for_bnb(budget)?;
        let candidates = self.enumerate_exact_len(len);
        let mut anchored = Vec::new();
        let mut free = Vec::new();
        for c in candidates {
            if Some(c.1[0]) == anchor_local {
                anchored.push(c);
            } else {
                free.push(c);
            }
        }
        if anchor_local.is_some() && anchored.is_empty() {
            return Err(Error::Precondition(format!(
                "anchor admits no internal path of {len} nodes"
            )));
        }
        let mut best: Option<Vec<Vec<usize>>> = None;
        if anchor_local.is_some() {
            for a in &anchored {
                let mut chosen = vec![a.1.clone()];
                self.pack_exact(&free, 0, a.0, &mut chosen, len, &mut best);
            }
        } else {
            let mut chosen = Vec::new();
            self.pack_exact(&free, 0, 0, &mut chosen, len, &mut best);
        }
        let mut paths: Vec<Path> = best
            .unwrap_or_default()
            .iter()
            .map(|p| self.to_path(p))
            .collect();
        paths.sort_by_key(|p| p.first());
        Ok(paths)
    }

    fn resolve_anchor(&self, anchor: Option<NodeId>) -> Result<Option<usize>> {
        match anchor {
            None => Ok(None),
            Some(v) => match self.index.get(&v) {
                Some(&i) => Ok(Some(i)),
                None => Err(Error::Precondition(format!(
                    "anchor {v} not in subgraph"
                ))),
            },
        }
    }

    /// All simple paths of exactly `len` nodes, in lexicographic order.
    fn enumerate_exact_len(&self, len: usize) -> Vec<(u64, Vec<usize>)> {
        let mut out = Vec::new();
        let mut path = Vec::with_capacity(len);
        for start in 0..self.node_count() {
            path.push(start);
            self.enum_exact_dfs(start, 1u64 << start, len, &mut path, &mut out);
            path.pop();
        }
        out
    }

    fn enum_exact_dfs(
        &self,
        cur: usize,
        mask: u64,
        len: usize,
        path: &mut Vec<usize>,
        out: &mut Vec<(u64, Vec<usize>)>,
    ) {
        if path.len() == len {
            out.push((mask, path.clone()));
            return;
        }
        for &next in &self.adj[cur] {
            if mask & (1 << next) == 0 {
                path.push(next);
                self.enum_exact_dfs(next, mask | (1 << next), len, path, out);
                path.pop();
            }
        }
    }

    fn pack_exact(
        &self,
        candidates: &[(u64, Vec<usize>)],
        from: usize,
        used: u64,
        chosen: &mut Vec<Vec<usize>>,
        len: usize,
        best: &mut Option<Vec<Vec<usize>>>,
    ) {
        if best.as_ref().is_none_or(|b| chosen.len() > b.len()) {
            *best = Some(chosen.clone());
        }
        let free = self.node_count() - (used.count_ones() as usize);
        let bound = chosen.len() + free / len;
        if let Some(b) = best.as_ref() {
            if bound <= b.len() {
                return;
            }
        }
        for (i, (mask, seq)) in candidates.iter().enumerate().skip(from) {
            if used & mask == 0 {
                chosen.push(seq.clone());
                self.pack_exact(candidates, i + 1, used | mask, chosen, len, best);
                chosen.pop();
            }
        }
    }

    fn exact_len_on_chains(
        &self,
        chains: &[Vec<usize>],
        len: usize,
        anchor: Option<usize>,
    ) -> Result<Vec<Path>> {
        let mut paths = Vec::new();
        for chain in chains {
            let holds_anchor = anchor.is_some_and(|a| chain.contains(&a));
            if holds_anchor {
                let a = anchor.unwrap();
                let off = chain.iter().position(|&x| x == a).unwrap();
                if chain.len() - off < len {
                    return Err(Error::Precondition(format!(
                        "anchor admits no internal path of {len} nodes"
                    )));
                }
                for part in 0..off / len {
                    paths.push(chain[part * len..(part + 1) * len].to_vec());
                }
                paths.push(chain[off..off + len].to_vec());
                let rest = &chain[off + len..];
                for part in 0..rest.len() / len {
                    paths.push(rest[part * len..(part + 1) * len].to_vec());
                }
            } else {
                for part in 0..chain.len() / len {
                    paths.push(chain[part * len..(part + 1) * len].to_vec());
                }
            }
        }
        let mut out: Vec<Path> = paths.iter().map(|p| self.to_path(p)).collect();
        out.sort_by_key(|p| p.first());
        Ok(out)
    }

    // -----------------------------------------------------------------------
    // Maximum-total-length packing under a count box
    // -----------------------------------------------------------------------

    /// Disjoint internal paths maximizing total node count, subject to the
    /// number of paths lying in `[lo, hi]` and every path having at least
    /// `min_len` nodes. With `anchor`, one path must start there (forcing at
    /// least one path). Ties on total length resolve per `tie`.
    pub fn max_total_packing(
        &self,
        lo: usize,
        hi: usize,
        min_len: usize,
        anchor: Option<NodeId>,
        tie: CountTie,
        budget: SearchBudget,
    ) -> Result<Vec<Path>> {
        assert!(min_len >= 1);
        if lo > hi {
            return Err(Error::Precondition(format!("count box [{lo}, {hi}] empty")));
        }
        let anchor_local = self.resolve_anchor(anchor)?;
        let lo = if anchor_local.is_some() { lo.max(1) } else { lo };
        if hi == 0 {
            return Ok(Vec::new());
        }
        if let Some(chains) = &self.chains {
            return self.max_total_on_chains(chains, lo, hi, min_len, anchor_local, tie);
        }
        self.budget_for_bnb(budget)?;
        let mut state = MtState {
            lo,
            hi,
            min_len,
            tie,
            best: None,
        };
        match anchor_local {
            Some(a) => {
                let mut path = vec![a];
                self.mt_first_anchored(a, 1u64 << a, &mut path, &mut state);
                if state.best.is_none() {
                    return Err(Error::Precondition(format!(
                        "anchor admits no internal path of {min_len} nodes"
                    )));
                }
            }
            None => {
                let mut chosen = Vec::new();
                self.mt_heads(0, 0u64, &mut chosen, 0, &mut state);
            }
        }
        let mut paths: Vec<Path> = state
            .best
            .unwrap_or_default()
            .1
            .iter()
            .map(|p| self.to_path(p))
            .collect();
        paths.sort_by_key(|p| p.first());
        Ok(paths)
    }

    fn mt_first_anchored(&self, cur: usize, used: u64, path: &mut Vec<usize>, st: &mut MtState) {
        for &next in &self.adj[cur] {
            if used & (1 << next) == 0 {
                path.push(next);
                self.mt_first_anchored(next, used | (1 << next), path, st);
                path.pop();
            }
        }
        if path.len() >= st.min_len {
            let mut chosen = vec![path.clone()];
            self.mt_heads(0, used, &mut chosen, path.len(), st);
            chosen.pop();
        }
    }

    fn mt_record(&self, chosen: &[Vec<usize>], total: usize, st: &mut MtState) {
        if chosen.len() >= st.lo
            && chosen.len() <= st.hi
            && st
                .best
                .as_ref()
                .is_none_or(|(bt, bp)| st.tie.better(total, chosen.len(), *bt, bp.len()))
        {
            st.best = Some((total, chosen.to_vec()));
        }
    }

    fn mt_heads(
        &self,
        head_from: usize,
        used: u64,
        chosen: &mut Vec<Vec<usize>>,
        total: usize,
        st: &mut MtState,
    ) {
        self.mt_record(chosen, total, st);
        if chosen.len() == st.hi {
            return;
        }
        let free = self.node_count() - used.count_ones() as usize;
        if let Some((bt, _)) = st.best.as_ref() {
            if total + free < *bt {
                return;
            }
        }
        for head in head_from..self.node_count() {
            if used & (1 << head) == 0 {
                let mut path = vec![head];
                self.mt_extend(head, used | (1 << head), &mut path, head + 1, chosen, total, st);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn mt_extend(
        &self,
        cur: usize,
        used: u64,
        path: &mut Vec<usize>,
        next_head: usize,
        chosen: &mut Vec<Vec<usize>>,
        total: usize,
        st: &mut MtState,
    ) {
        for &next in &self.adj[cur] {
            if used & (1 << next) == 0 {
                path.push(next);
                self.mt_extend(next, used | (1 << next), path, next_head, chosen, total, st);
                path.pop();
            }
        }
        if path.len() >= st.min_len {
            chosen.push(path.clone());
            self.mt_heads(next_head, used, chosen, total + path.len(), st);
            chosen.pop();
        }
    }

    fn max_total_on_chains(
        &self,
        chains: &[Vec<usize>],
        lo: usize,
        hi: usize,
        min_len: usize,
        anchor: Option<usize>,
        tie: CountTie,
    ) -> Result<Vec<Path>> {
        // Options per chain: using exactly k >= 1 parts of >= min_len covers the
        // whole chain whenever k * min_len <= len; zero parts contribute zero.
        // For the anchored chain, one part must start exactly at the anchor.
        let m = chains.len();
        let anchor_chain = anchor.map(|a| {
            chains
                .iter()
                .position(|c| c.contains(&a))
                .expect("anchor is in some chain")
        });
        // chain_value[t][k]: max nodes usable from chain t with exactly k parts.
        let mut chain_value: Vec<Vec<Option<usize>>> = Vec::with_capacity(m);
        for (t, chain) in chains.iter().enumerate() {
            let len = chain.len();
            let mut vals = vec![None; hi + 1];
            vals[0] = Some(0);
            if anchor_chain == Some(t) {
                let a = anchor.unwrap();
                let off = chain.iter().position(|&x| x == a).unwrap();
                let suffix = len - off;
                if suffix < min_len {
                    return Err(Error::Precondition(format!(
                        "anchor admits no internal path of {min_len} nodes"
                    )));
                }
                vals[0] = None; // the anchored part is mandatory
                for j in 0..=(off / min_len) {
                    for q in 1..=(suffix / min_len) {
                        let k = j + q;
                        if k <= hi {
                            let covered = if j >= 1 { off + suffix } else { suffix };
                            if vals[k].is_none_or(|v| covered > v) {
                                vals[k] = Some(covered);
                            }
                        }
                    }
                }
            } else {
                #[allow(clippy::needless_range_loop)]
                for k in 1..=(len / min_len).min(hi) {
                    vals[k] = Some(len);
                }
            }
            chain_value.push(vals);
        }
        // Knapsack over chains; dp[k] = max total with exactly k parts.
        let mut dp: Vec<Option<usize>> = vec![None; hi + 1];
        let mut choice: Vec<Vec<Option<usize>>> = vec![vec![None; hi + 1]; m + 1];
        dp[0] = Some(0);
        let mut dp_prev;
        for (t, vals) in chain_value.iter().enumerate() {
            dp_prev = dp.clone();
            dp = vec![None; hi + 1];
            #[allow(clippy::needless_range_loop)]
            for k_prev in 0..=hi {
                let Some(before) = dp_prev[k_prev] else { continue };
                for (k_t, val) in vals.iter().enumerate() {
                    let Some(v) = val else { continue };
                    let k = k_prev + k_t;
                    if k <= hi && dp[k].is_none_or(|cur| before + v > cur) {
                        dp[k] = Some(before + v);
                        choice[t + 1][k] = Some(k_t);
                    }
                }
            }
            // Preserve reachable states that did not improve, for reconstruction.
            for k in 0..=hi {
                if dp[k].is_some() && choice[t + 1][k].is_none() {
                    choice[t + 1][k] = Some(0);
                    // ensure consistency: recompute the contributing k_t
                    for (k_t, val) in vals.iter().enumerate() {
                        if k_t <= k {
                            if let (Some(v), Some(before)) = (val, dp_prev[k - k_t]) {
                                if before + v == dp[k].unwrap() {
                                    choice[t + 1][k] = Some(k_t);
                                    break;
                                }
                            }
                        }
                    }
                }
            }
        }
        // Best count in the box: maximum total, count tie per policy.
        let mut pick: Option<(usize, usize)> = None; // (total, k)
        #[allow(clippy::needless_range_loop)]
        for k in lo..=hi {
            if let Some(total) = dp[k] {
                if pick.is_none_or(|(bt, bk)| tie.better(total, k, bt, bk)) {
                    pick = Some((total, k));
                }
            }
        }
        let Some((_, mut k)) = pick else {
            return Err(Error::Precondition(format!(
                "no packing with count in [{lo}, {hi}] and min length {min_len}"
            )));
        };
        // Reconstruct per-chain part counts.
        let mut parts = vec![0usize; m];
        for t in (0..m).rev() {
            let k_t = choice[t + 1][k].expect("dp reconstruction");
            parts[t] = k_t;
            k -= k_t;
        }
        let mut paths = Vec::new();
        for (t, chain) in chains.iter().enumerate() {
            let k_t = parts[t];
            if k_t == 0 {
                continue;
            }
            if anchor_chain == Some(t) {
                let a = anchor.unwrap();
                let off = chain.iter().position(|&x| x == a).unwrap();
                let suffix_len = chain.len() - off;
                // Recover a (j, q) split matching k_t and the recorded value.
                let value = chain_value[t][k_t].unwrap();
                let mut jq = None;
                for j in 0..=(off / min_len) {
                    if k_t > j {
                        let q = k_t - j;
                        if q <= suffix_len / min_len {
                            let covered = if j >= 1 { off + suffix_len } else { suffix_len };
                            if covered == value {
                                jq = Some((j, q));
                                break;
                            }
                        }
                    }
                }
                let (j, q) = jq.expect("anchored split reconstruction");
                if j >= 1 {
                    // First j-1 prefix parts of exactly min_len, then the rest of
                    // the prefix as one part.
                    for part in 0..j - 1 {
                        paths.push(chain[part * min_len..(part + 1) * min_len].to_vec());
                    }
                    paths.push(chain[(j - 1) * min_len..off].to_vec());
                }
                let suffix = &chain[off..];
                for part in 0..q - 1 {
                    paths.push(suffix[part * min_len..(part + 1) * min_len].to_vec());
                }
                paths.push(suffix[(q - 1) * min_len..].to_vec());
            } else {
                for part in 0..k_t - 1 {
                    paths.push(chain[part * min_len..(part + 1) * min_len].to_vec());
                }
                paths.push(chain[(k_t - 1) * min_len..].to_vec());
            }
        }
        let mut out: Vec<Path> = paths.iter().map(|p| self.to_path(p)).collect();
        out.sort_by_key(|p| p.first());
        Ok(out)
    }

    // -----------------------------------------------------------------------
    // Maximum packing size with mean length above a threshold
    // -----------------------------------------------------------------------

    /// Largest `k` such that some `k` disjoint internal paths have mean length
    /// at least `s` (equivalently, total length at least `s * k`). Returns 0
    /// exactly when no internal path of `s` nodes exists.
    pub fn max_mean_count(&self, s: usize, budget: SearchBudget) -> Result<usize> {
        assert!(s >= 1);
        if let Some(chains) = &self.chains {
            let mut lens: Vec<usize> = chains.iter().map(Vec::len).collect();
            lens.sort_unstable_by(|a, b| b.cmp(a));
            let mut best = 0;
            let mut top_sum = 0;
            let mut k = 0;
            loop {
                k += 1;
                if k <= lens.len() {
                    top_sum += lens[k - 1];
                }
                if k > self.node_count() {
                    break;
                }
                if top_sum >= s * k {
                    best = k;
                } else {
                    // Feasibility is downward closed: the margin only shrinks.
                    break;
                }
            }
            return Ok(best);
        }
        self.budget_for_bnb(budget)?;
        let mut best = 0;
        for k in 1..=self.node_count() {
            let packing = self.max_total_packing(k, k, 1, None, CountTie::Max, budget);
            match packing {
                Ok(paths) => {
                    let total: usize = paths.iter().map(Path::len).sum();
                    if total >= s * k {
                        best = k;
                    } else {
                        break;
                    }
                }
                Err(_) => break,
            }
        }
        Ok(best)
    }
}

struct MtState {
    lo: usize,
    hi: usize,
    min_len: usize,
    tie: CountTie,
    best: Option<(usize, Vec<Vec<usize>>)>,
}
