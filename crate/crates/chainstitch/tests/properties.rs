//! Randomized invariants over fuzz instances: benchmark orderings, mechanism
//! determinism, and accounting identities that must hold on every outcome.

use std::collections::HashSet;
use std::sync::Arc;

use proptest::prelude::*;

use chainstitch::benchmarks;
use chainstitch::graph::{segments, utilities, CompatGraph, Report};
use chainstitch::incentives::Mechanism;
use chainstitch::instances::fuzz_instance;
use chainstitch::params::MechConfig;
use chainstitch::SearchBudget;

fn budget() -> SearchBudget {
    SearchBudget::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The three chain benchmarks nest: segment-constrained never beats
    /// average-constrained, which never beats unconstrained; the internal
    /// chain is one feasible chain of the unconstrained search.
    #[test]
    fn benchmark_sandwich_holds(seed in 0u64..1_000, s in 1u32..5) {
        let inst = Arc::new(fuzz_instance(seed, 10));
        let view = CompatGraph::sample(Arc::clone(&inst), seed).full_view();
        let sopt = benchmarks::sopt(&view, s, budget()).unwrap().len();
        let avgopt = benchmarks::avgopt(&view, s, budget()).unwrap().len();
        let opt = benchmarks::opt(&view, budget()).unwrap().len();
        let pi_ir = benchmarks::pi_ir(&view, budget()).unwrap().len();
        prop_assert!(sopt <= avgopt, "sopt {sopt} > avgopt {avgopt}");
        prop_assert!(avgopt <= opt, "avgopt {avgopt} > opt {opt}");
        prop_assert!(pi_ir <= opt, "pi_ir {pi_ir} > opt {opt}");
    }

    /// Raising the segment threshold never lengthens the constrained optima.
    #[test]
    fn benchmarks_shrink_as_s_grows(seed in 0u64..1_000, s in 1u32..4) {
        let inst = Arc::new(fuzz_instance(seed, 10));
        let view = CompatGraph::sample(Arc::clone(&inst), seed).full_view();
        let sopt_lo = benchmarks::sopt(&view, s, budget()).unwrap().len();
        let sopt_hi = benchmarks::sopt(&view, s + 1, budget()).unwrap().len();
        prop_assert!(sopt_hi <= sopt_lo);
        let avg_lo = benchmarks::avgopt(&view, s, budget()).unwrap().len();
        let avg_hi = benchmarks::avgopt(&view, s + 1, budget()).unwrap().len();
        prop_assert!(avg_hi <= avg_lo);
    }

    /// Segment decomposition is a partition: concatenating the segments
    /// reproduces the chain, and neighbors belong to different hospitals.
    #[test]
    fn segments_partition_the_chain(seed in 0u64..1_000) {
        let inst = Arc::new(fuzz_instance(seed, 10));
        let view = CompatGraph::sample(Arc::clone(&inst), seed).full_view();
        let path = benchmarks::opt(&view, budget()).unwrap();
        let segs = segments(&path, &inst);
        let rebuilt: Vec<_> = segs.iter().flat_map(|(_, p)| p.0.iter().copied()).collect();
        prop_assert_eq!(&rebuilt, &path.0);
        for (h, seg) in &segs {
            prop_assert!(!seg.is_empty());
            prop_assert!(seg.0.iter().all(|&v| inst.owner(v) == *h));
        }
        for w in segs.windows(2) {
            prop_assert!(w[0].0 != w[1].0, "adjacent segments share a hospital");
        }
    }

    /// Random cross edges depend only on (seed, endpoints), never on what was
    /// reported, so manipulated views see a subset of the truthful edges.
    #[test]
    fn views_are_consistent_subgraphs(seed in 0u64..1_000, hide_mask in 0u64..64) {
        let inst = Arc::new(fuzz_instance(seed, 8));
        let graph = CompatGraph::sample(Arc::clone(&inst), seed);
        let full = graph.full_view();
        let victim = (seed % inst.hospital_count() as u64) as u32;
        let hidden: std::collections::BTreeSet<_> = inst
            .hospital_nodes(victim)
            .into_iter()
            .filter(|&v| v != inst.altruist)
            .enumerate()
            .filter(|(i, _)| hide_mask >> i & 1 == 1)
            .map(|(_, v)| v)
            .collect();
        let view = graph.view(&Report::with_hidden(&inst, victim, &hidden)).unwrap();
        for &u in &view.nodes {
            prop_assert!(!hidden.contains(&u));
            for &v in view.successors(u) {
                prop_assert!(full.has_edge(u, v), "edge {u}->{v} absent truthfully");
            }
        }
        for &u in &full.nodes {
            for &v in full.successors(u) {
                if view.contains(u) && view.contains(v) {
                    prop_assert!(view.has_edge(u, v), "edge {u}->{v} vanished from the view");
                }
            }
        }
    }

    /// Both mechanisms are deterministic functions of (instance, seed,
    /// config), and their outcomes satisfy the accounting identities: a valid
    /// simple chain from the source whose length is the welfare and whose
    /// per-hospital utilities sum to it.
    #[test]
    fn mechanism_outcomes_account_cleanly(seed in 0u64..500, s in 1u32..7) {
        let inst = Arc::new(fuzz_instance(seed, 10));
        let view = CompatGraph::sample(Arc::clone(&inst), seed).full_view();
        let config = MechConfig::new(s);
        for mechanism in [Mechanism::Segment, Mechanism::Average] {
            let a = mechanism.run(&view, &config).unwrap();
            let b = mechanism.run(&view, &config).unwrap();
            prop_assert_eq!(a.trace.digest(), b.trace.digest());
            prop_assert_eq!(&a.path, &b.path);
            prop_assert!(view.is_valid_path(&a.path));
            prop_assert_eq!(a.path.first(), Some(view.altruist()));
            prop_assert_eq!(a.welfare, a.path.len());
            prop_assert_eq!(a.utilities.iter().sum::<usize>(), a.welfare);
            prop_assert_eq!(&a.utilities, &utilities(&a.path, &inst));
            let distinct: HashSet<_> = a.path.0.iter().collect();
            prop_assert_eq!(distinct.len(), a.path.len());
        }
    }
}
