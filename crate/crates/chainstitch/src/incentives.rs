//! Incentive audits: what a hospital could gain by under-reporting nodes or
//! privately diverting the chain at one of its own nodes.
//!
//! The audits are exhaustive over hiding strategies, so they are meant for
//! small instances. A manipulated run always re-uses the truthful run's random
//! realization (same seed) and parameter scale (f pinned at the truthful view
//! size), so the comparison isolates the effect of the report itself.

use std::collections::{BTreeSet, HashSet};
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::benchmarks;
use crate::graph::{utility, CompatGraph, HospitalId, Instance, NodeId, Path, Report};
use crate::graph::ViewGraph;
use crate::packing::Subgraph;
use crate::params::{FPolicy, MechConfig};
use crate::trace::{self, Outcome, Status, Trace, TraceEvent};
use crate::{mech_avg, mech_s, Error, Result, SearchBudget};

// ---------------------------------------------------------------------------
// Mechanism selector
// ---------------------------------------------------------------------------

/// The mechanisms an audit or simulation can exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mechanism {
    /// Every hospital segment on the final chain is long.
    Segment,
    /// Hospital segments are long on average.
    Average,
    /// Welfare-maximizing baseline with no incentive protection: returns the
    /// longest chain in the reported view.
    NaiveOpt,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::Segment, Mechanism::Average, Mechanism::NaiveOpt];

    pub fn label(&self) -> &'static str {
        match self {
            Mechanism::Segment => "segment",
            Mechanism::Average => "average",
            Mechanism::NaiveOpt => "naive-opt",
        }
    }

    pub fn run(&self, view: &ViewGraph, config: &MechConfig) -> Result<Outcome> {
        match self {
            Mechanism::Segment => mech_s::run(view, config),
            Mechanism::Average => mech_avg::run(view, config),
            Mechanism::NaiveOpt => naive_opt(view, config),
        }
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| {
                Error::Precondition(format!(
                    "unknown mechanism '{s}'; expected segment, average, or naive-opt"
                ))
            })
    }
}

fn naive_opt(view: &ViewGraph, config: &MechConfig) -> Result<Outcome> {
    let mut tr = Trace::new();
    tr.push(TraceEvent::Params {
        mechanism: "naive-opt",
        s: config.s,
        f: config.f_policy.resolve(view.node_count()),
        s_prime: config.s as usize,
        s_dprime: None,
        n_view: view.node_count(),
    });
    let path = benchmarks::opt(view, config.budget)?;
    trace::finish_outcome(view, Status::Success, path, tr)
}

// ---------------------------------------------------------------------------
// Diversion: privately redirecting the chain at one of your own nodes
// ---------------------------------------------------------------------------

/// Best continuation a hospital can reach by either following the assigned
/// chain or cutting it at one of its own nodes and continuing internally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diversion {
    /// Nodes the hospital serves under its best plan.
    pub utility: usize,
    /// Where the chain is cut, or `None` when following it is best.
    pub divert_at: Option<NodeId>,
}

/// Exhaustively evaluate every diversion point of `hospital` on `path`. The
/// internal continuation may use nodes the hospital never reported, which is
/// exactly why diversion composes with hiding.
pub fn best_diversion(
    path: &Path,
    hospital: HospitalId,
    instance: &Instance,
    budget: SearchBudget,
) -> Result<Diversion> {
    let mut best = Diversion {
        utility: utility(path, hospital, instance),
        divert_at: None,
    };
    let sub = Subgraph::internal_full(instance, hospital);
    let mut forbidden: HashSet<NodeId> = HashSet::new();
    let mut own_before = 0usize;
    for &v in &path.0 {
        if instance.owner(v) == hospital {
            let ext = sub.longest_path_from(v, &forbidden, budget)?;
            let total = own_before + ext.len();
            if total > best.utility {
                best = Diversion {
                    utility: total,
                    divert_at: Some(v),
                };
            }
            own_before += 1;
        }
        forbidden.insert(v);
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Hiding audit
// ---------------------------------------------------------------------------

/// Exhaustive manipulation audit for one hospital: every subset of its nodes
/// hidden, composed with the best diversion on the resulting chain.
#[derive(Debug, Clone, Serialize)]
pub struct HospitalAudit {
    pub hospital: HospitalId,
    /// Utility when reporting everything and following the chain.
    pub truthful_utility: usize,
    /// Best utility over all (hide, divert) strategies, including truthful.
    pub best_utility: usize,
    /// A maximizing hidden set; empty when honesty (or diversion alone) wins.
    pub witness_hidden: BTreeSet<NodeId>,
    /// The diversion node of the maximizing strategy, if it diverts.
    pub witness_divert: Option<NodeId>,
}

impl HospitalAudit {
    /// Multiplicative gain of the best strategy over truthfulness.
    pub fn gap_ratio(&self) -> f64 {
        if self.best_utility <= self.truthful_utility {
            1.0
        } else if self.truthful_utility == 0 {
            f64::INFINITY
        } else {
            self.best_utility as f64 / self.truthful_utility as f64
        }
    }
}

const AUDIT_SUBSET_LIMIT: usize = 20;

/// Audit one hospital against `mechanism` on the realization drawn by `seed`.
pub fn audit_hospital(
    instance: &Arc<Instance>,
    mechanism: Mechanism,
    config: &MechConfig,
    seed: u64,
    hospital: HospitalId,
) -> Result<HospitalAudit> {
    let graph = CompatGraph::sample(Arc::clone(instance), seed);
    let truthful_view = graph.full_view();
    // Pin the scale parameter at the truthful view size so a manipulation
    // cannot shift the mechanism's thresholds in its own favor.
    let pinned = (*config)
        .with_f(FPolicy::Fixed(config.f_policy.resolve(truthful_view.node_count())));
    let truthful = mechanism.run(&truthful_view, &pinned)?;
    let truthful_utility = truthful.utilities[hospital as usize];

    let mut candidates = instance.hospital_nodes(hospital);
    candidates.retain(|&v| v != instance.altruist);
    if candidates.len() > AUDIT_SUBSET_LIMIT {
        return Err(Error::Precondition(format!(
            "hiding audit enumerates all subsets; hospital {hospital} owns {} hideable nodes \
             (limit {AUDIT_SUBSET_LIMIT})",
            candidates.len()
        )));
    }

    let mut audit = HospitalAudit {
        hospital,
        truthful_utility,
        best_utility: truthful_utility,
        witness_hidden: BTreeSet::new(),
        witness_divert: None,
    };
    for mask in 0u64..(1u64 << candidates.len()) {
        let hidden: BTreeSet<NodeId> = candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &v)| v)
            .collect();
        let report = Report::with_hidden(instance, hospital, &hidden);
        let view = graph.view(&report)?;
        let outcome = mechanism.run(&view, &pinned)?;
        let diversion = best_diversion(&outcome.path, hospital, instance, config.budget)?;
        if diversion.utility > audit.best_utility {
            audit.best_utility = diversion.utility;
            audit.witness_hidden = hidden;
            audit.witness_divert = diversion.divert_at;
        }
    }
    Ok(audit)
}

/// Audit every hospital of the instance.
pub fn audit_all(
    instance: &Arc<Instance>,
    mechanism: Mechanism,
    config: &MechConfig,
    seed: u64,
) -> Result<Vec<HospitalAudit>> {
    (0..instance.hospital_count() as HospitalId)
        .map(|h| audit_hospital(instance, mechanism, config, seed, h))
        .collect()
}

// ---------------------------------------------------------------------------
// Individual-rationality check for the altruist's hospital
// ---------------------------------------------------------------------------

/// How the altruist's hospital fares against its stand-alone option, the
/// longest chain it could run internally without the platform.
#[derive(Debug, Clone, Serialize)]
pub struct IrReport {
    /// Length of the hospital's best internal chain from the altruist.
    pub benchmark: usize,
    /// Its utility under the truthful mechanism outcome.
    pub achieved: usize,
    /// How far below the stand-alone option the outcome leaves it.
    pub deficit: usize,
}

pub fn ir_check(
    instance: &Arc<Instance>,
    mechanism: Mechanism,
    config: &MechConfig,
    seed: u64,
) -> Result<IrReport> {
    let graph = CompatGraph::sample(Arc::clone(instance), seed);
    let outcome = mechanism.run(&graph.full_view(), config)?;
    let benchmark = benchmarks::pi_ir_full(instance, config.budget)?.len();
    let achieved = outcome.utilities[instance.altruist_owner() as usize];
    Ok(IrReport {
        benchmark,
        achieved,
        deficit: benchmark.saturating_sub(achieved),
    })
}

// ---------------------------------------------------------------------------
// Outcome-level guarantee checks
// ---------------------------------------------------------------------------

/// One re-derived guarantee, checked against a finished outcome.
#[derive(Debug, Clone)]
pub struct GuaranteeCheck {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

fn params_of(outcome: &Outcome) -> Option<(u32, usize, Option<usize>)> {
    outcome.trace.events.iter().find_map(|e| match e {
        TraceEvent::Params {
            f,
            s_prime,
            s_dprime,
            ..
        } => Some((*f, *s_prime, *s_dprime)),
        _ => None,
    })
}

fn pathsets_of<'a>(
    outcome: &'a Outcome,
    stage: &str,
) -> Vec<(HospitalId, &'a Vec<Vec<NodeId>>)> {
    outcome
        .trace
        .events
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Pathset {
                owner,
                stage: st,
                paths,
            } if *st == stage => Some((*owner, paths)),
            _ => None,
        })
        .collect()
}

fn slots_of(outcome: &Outcome) -> Vec<usize> {
    let mut slots = outcome
        .trace
        .events
        .iter()
        .find_map(|e| match e {
            TraceEvent::HospitalCounts { counts } => Some(counts.clone()),
            _ => None,
        })
        .unwrap_or_default();
    for e in &outcome.trace.events {
        if let TraceEvent::CountCapped { hospital, after, .. } = e {
            slots[*hospital as usize] = *after;
        }
    }
    slots
}

fn early_return(outcome: &Outcome) -> bool {
    outcome
        .trace
        .events
        .iter()
        .any(|e| matches!(e, TraceEvent::EarlyReturn { .. }))
}

/// Re-derive the segment mechanism's success guarantees from an outcome:
/// welfare stays within a (1 - 3/f) factor of the segment benchmark, and each
/// hospital keeps at least its built paths minus two stitch windows per path.
pub fn check_segment_outcome(outcome: &Outcome, sopt_value: usize) -> Vec<GuaranteeCheck> {
    let mut checks = Vec::new();
    let Some((f, _s_prime, s_dprime)) = params_of(outcome) else {
        checks.push(GuaranteeCheck {
            name: "segment-params",
            ok: false,
            detail: "trace has no parameter event".into(),
        });
        return checks;
    };
    if outcome.status != Status::Success {
        checks.push(GuaranteeCheck {
            name: "segment-welfare-floor",
            ok: true,
            detail: "failure outcome; no welfare claim".into(),
        });
        return checks;
    }
    let floor = (1.0 - 3.0 / f as f64) * sopt_value as f64;
    checks.push(GuaranteeCheck {
        name: "segment-welfare-floor",
        ok: outcome.welfare as f64 >= floor - 1e-9,
        detail: format!(
            "welfare {} vs (1 - 3/{f}) * {sopt_value} = {floor:.2}",
            outcome.welfare
        ),
    });
    let window = s_dprime.unwrap_or(0);
    for (owner, paths) in pathsets_of(outcome, "build") {
        let floor: usize = paths.iter().map(|p| p.len().saturating_sub(2 * window)).sum();
        let got = outcome.utilities[owner as usize];
        checks.push(GuaranteeCheck {
            name: "segment-utility-floor",
            ok: got >= floor,
            detail: format!("hospital {owner}: utility {got} vs floor {floor}"),
        });
    }
    checks
}

/// Re-derive the average mechanism's success guarantees from an outcome: each
/// hospital's selected nodes left off the final chain stay bounded, and no
/// hospital ends far above its own selection (the chain is not padded with one
/// hospital's nodes beyond its slot share plus the exploration allowance).
pub fn check_average_outcome(outcome: &Outcome) -> Vec<GuaranteeCheck> {
    let mut checks = Vec::new();
    let Some((_f, s_prime, _)) = params_of(outcome) else {
        checks.push(GuaranteeCheck {
            name: "average-params",
            ok: false,
            detail: "trace has no parameter event".into(),
        });
        return checks;
    };
    if outcome.status != Status::Success || early_return(outcome) {
        checks.push(GuaranteeCheck {
            name: "average-leftover-bound",
            ok: true,
            detail: "no stitched success; no leftover claim".into(),
        });
        return checks;
    }
    let slots = slots_of(outcome);
    let on_path: HashSet<NodeId> = outcome.path.0.iter().copied().collect();
    for (owner, paths) in pathsets_of(outcome, "selected") {
        let selected_total: usize = paths.iter().map(|p| p.len()).sum();
        let leftover: usize = paths
            .iter()
            .flat_map(|p| p.iter())
            .filter(|v| !on_path.contains(v))
            .count();
        let k = slots[owner as usize];
        let bound = s_prime * (6 * k + 3);
        checks.push(GuaranteeCheck {
            name: "average-leftover-bound",
            ok: leftover <= bound,
            detail: format!("hospital {owner}: leftover {leftover} vs {s_prime} * (6 * {k} + 3) = {bound}"),
        });
        if k > 0 {
            let cap = (1.0 + 1.0 / k as f64) * selected_total as f64 + (2 * s_prime) as f64;
            let got = outcome.utilities[owner as usize];
            checks.push(GuaranteeCheck {
                name: "average-utility-cap",
                ok: (got as f64) <= cap + 1e-9,
                detail: format!("hospital {owner}: utility {got} vs cap {cap:.2}"),
            });
        }
    }
    checks
}

// ---------------------------------------------------------------------------
// Monte Carlo simulation
// ---------------------------------------------------------------------------

/// Aggregates over repeated truthful runs with consecutive seeds.
#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloReport {
    pub mechanism: String,
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    pub mean_welfare: f64,
    /// Mean utility per hospital, indexed by hospital id.
    pub mean_utilities: Vec<f64>,
    /// Reference value the welfare ratio is computed against, if any.
    pub benchmark: Option<usize>,
    pub welfare_ratio: Option<f64>,
}

pub fn monte_carlo(
    instance: &Arc<Instance>,
    mechanism: Mechanism,
    config: &MechConfig,
    seed0: u64,
    trials: u64,
    benchmark: Option<usize>,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::Precondition("monte carlo needs at least one trial".into()));
    }
    let mut successes = 0u64;
    let mut welfare_sum = 0u64;
    let mut utility_sums = vec![0u64; instance.hospital_count()];
    for t in 0..trials {
        let graph = CompatGraph::sample(Arc::clone(instance), seed0 + t);
        let outcome = mechanism.run(&graph.full_view(), config)?;
        if outcome.status == Status::Success {
            successes += 1;
        }
        welfare_sum += outcome.welfare as u64;
        for (h, u) in outcome.utilities.iter().enumerate() {
            utility_sums[h] += *u as u64;
        }
    }
    let mean_welfare = welfare_sum as f64 / trials as f64;
    Ok(MonteCarloReport {
        mechanism: mechanism.label().into(),
        trials,
        successes,
        success_rate: successes as f64 / trials as f64,
        mean_welfare,
        mean_utilities: utility_sums
            .iter()
            .map(|&s| s as f64 / trials as f64)
            .collect(),
        benchmark,
        welfare_ratio: benchmark.map(|b| mean_welfare / b as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, Family};
    use crate::trace::audit_trace;
    use std::collections::BTreeSet as Set;

    fn two_chain_sparse() -> Arc<Instance> {
        // Hospital 0: chain 0..=9 from the altruist. Hospital 1: chain
        // 10..=19. Three base cross edges forcing lossy stitches.
        let mut base: Set<(NodeId, NodeId)> = Set::new();
        for v in 0..9 {
            base.insert((v, v + 1));
        }
        for v in 10..19 {
            base.insert((v, v + 1));
        }
        base.insert((3, 10));
        base.insert((13, 4));
        base.insert((8, 15));
        let owners = [vec![0u32; 10], vec![1u32; 10]].concat();
        Arc::new(Instance::new(owners, base, 0, 0.0).unwrap())
    }

    #[test]
    fn naive_baseline_returns_the_longest_chain_and_a_clean_trace() {
        let inst = two_chain_sparse();
        let view = CompatGraph::sample(Arc::clone(&inst), 0).full_view();
        let config = MechConfig::new(8);
        let outcome = Mechanism::NaiveOpt.run(&view, &config).unwrap();
        let opt = benchmarks::opt(&view, config.budget).unwrap();
        assert_eq!(outcome.path, opt);
        assert_eq!(outcome.status, Status::Success);
        audit_trace(&outcome.trace).unwrap();
    }

    #[test]
    fn diversion_prefers_a_private_continuation_when_it_is_longer() {
        // Hospital 0 owns 0..=3 in a chain, hospital 1 owns 4..=5; the chain
        // [0, 1, 4, 5] gives hospital 0 two nodes, but cutting at 1 keeps the
        // internal tail 1, 2, 3 for four in total.
        let mut base: Set<(NodeId, NodeId)> = Set::new();
        for v in 0..3 {
            base.insert((v, v + 1));
        }
        base.insert((4, 5));
        base.insert((1, 4));
        let inst = Instance::new(vec![0, 0, 0, 0, 1, 1], base, 0, 0.0).unwrap();
        let path = Path(vec![0, 1, 4, 5]);
        let budget = SearchBudget::default();
        // Two equal maximizers exist (cut at 0 or at 1, four nodes either
        // way); the scan keeps the earliest chain position.
        let d0 = best_diversion(&path, 0, &inst, budget).unwrap();
        assert_eq!(
            d0,
            Diversion {
                utility: 4,
                divert_at: Some(0)
            }
        );
        let d1 = best_diversion(&path, 1, &inst, budget).unwrap();
        assert_eq!(
            d1,
            Diversion {
                utility: 2,
                divert_at: None
            }
        );
    }

    #[test]
    fn hiding_audit_reproduces_the_gate_instance_gap() {
        // Gate family at k = 3 against the unprotected baseline: truthfully
        // the gate owner keeps k + 1 = 4 nodes; its best strategy keeps the
        // whole internal chain of 3k = 9.
        let (inst, _) = generate(Family::WorstCaseIc, 3, 0.0).unwrap();
        let inst = Arc::new(inst);
        let config = MechConfig::new(3);
        let audit = audit_hospital(&inst, Mechanism::NaiveOpt, &config, 0, 0).unwrap();
        assert_eq!(audit.truthful_utility, 4);
        assert_eq!(audit.best_utility, 9);
        // The first maximizing strategy found is diversion alone: cut at the
        // source itself and keep the whole internal chain private.
        assert!(audit.witness_hidden.is_empty());
        assert_eq!(audit.witness_divert, Some(0));
        assert_eq!(audit.gap_ratio(), 2.25);
        // The partner hospital has nothing better than honesty.
        let other = audit_hospital(&inst, Mechanism::NaiveOpt, &config, 0, 1).unwrap();
        assert_eq!(other.best_utility, other.truthful_utility);
        assert_eq!(other.gap_ratio(), 1.0);
    }

    #[test]
    fn ir_check_reports_the_internal_deficit_of_a_lossy_stitch() {
        // The sparse two-chain instance stitches to welfare 16 but cuts one
        // hospital-0 node; the internal stand-alone chain keeps all 10.
        let inst = two_chain_sparse();
        let config = MechConfig::new(8).with_f(FPolicy::Fixed(2));
        let report = ir_check(&inst, Mechanism::Segment, &config, 0).unwrap();
        assert_eq!(report.benchmark, 10);
        assert_eq!(report.achieved, 9);
        assert_eq!(report.deficit, 1);
    }

    #[test]
    fn segment_guarantees_hold_on_the_sparse_two_chain_outcome() {
        let inst = two_chain_sparse();
        let config = MechConfig::new(8).with_f(FPolicy::Fixed(2));
        let view = CompatGraph::sample(Arc::clone(&inst), 0).full_view();
        let outcome = Mechanism::Segment.run(&view, &config).unwrap();
        let sopt = benchmarks::sopt(&view, 8, config.budget).unwrap().len();
        assert_eq!(sopt, 10);
        let checks = check_segment_outcome(&outcome, sopt);
        assert!(checks.len() >= 3, "welfare floor plus two utility floors");
        for c in &checks {
            assert!(c.ok, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn average_guarantees_hold_on_a_dense_two_chain_outcome() {
        // Two 16-chains with every cross pair present: the average mechanism
        // keeps everything, and the re-derived bounds hold.
        let mut base: Set<(NodeId, NodeId)> = Set::new();
        for v in 0..15 {
            base.insert((v, v + 1));
        }
        for v in 16..31 {
            base.insert((v, v + 1));
        }
        let owners = [vec![0u32; 16], vec![1u32; 16]].concat();
        let inst = Arc::new(Instance::new(owners, base, 0, 1.0).unwrap());
        let config = MechConfig::new(12);
        let view = CompatGraph::sample(Arc::clone(&inst), 5).full_view();
        let outcome = Mechanism::Average.run(&view, &config).unwrap();
        assert_eq!(outcome.status, Status::Success);
        assert_eq!(outcome.welfare, 32);
        let checks = check_average_outcome(&outcome);
        assert!(checks.iter().any(|c| c.name == "average-leftover-bound"));
        assert!(checks.iter().any(|c| c.name == "average-utility-cap"));
        for c in &checks {
            assert!(c.ok, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn monte_carlo_aggregates_are_deterministic_and_consistent() {
        let inst = two_chain_sparse();
        let config = MechConfig::new(8).with_f(FPolicy::Fixed(2));
        let a = monte_carlo(&inst, Mechanism::Segment, &config, 0, 20, Some(16)).unwrap();
        let b = monte_carlo(&inst, Mechanism::Segment, &config, 0, 20, Some(16)).unwrap();
        assert_eq!(a.successes, b.successes);
        assert_eq!(a.mean_welfare, b.mean_welfare);
        assert_eq!(a.success_rate, a.successes as f64 / 20.0);
        assert_eq!(a.mean_utilities.len(), 2);
        let ratio = a.welfare_ratio.unwrap();
        assert!((ratio - a.mean_welfare / 16.0).abs() < 1e-12);
        // p = 0 leaves nothing to chance: every trial is the same outcome.
        assert_eq!(a.successes, 20);
        assert_eq!(a.mean_welfare, 16.0);
    }

    #[test]
    fn honest_reporting_is_best_under_the_segment_mechanism_here() {
        let inst = two_chain_sparse();
        let config = MechConfig::new(8).with_f(FPolicy::Fixed(2));
        for audit in audit_all(&inst, Mechanism::Segment, &config, 0).unwrap() {
            assert!(audit.best_utility >= audit.truthful_utility);
        }
    }
}
