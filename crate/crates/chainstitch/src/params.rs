//! Mechanism parameters: the robustness factor `f` and the derived segment
//! thresholds used by the two stitching mechanisms.

use serde::{Deserialize, Serialize};

use crate::SearchBudget;

/// How the robustness factor `f` is chosen.
///
/// `Auto` follows the natural-log rule, evaluated on the node count of the
/// reported view and clamped to at least 2. `Fixed` pins a value; audits use
/// this to keep truthful and manipulated runs on identical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[derive(Default)]
pub enum FPolicy {
    #[default]
    Auto,
    Fixed(u32),
}

impl FPolicy {
    pub fn resolve(&self, n_view: usize) -> u32 {
        match *self {
            FPolicy::Fixed(f) => f.max(2),
            FPolicy::Auto => {
                let ln = (n_view.max(1) as f64).ln();
                (ln.floor() as u32).max(2)
            }
        }
    }
}


/// Shared mechanism configuration.
#[derive(Debug, Clone, Copy)]
pub struct MechConfig {
    /// Target segment threshold `s`.
    pub s: u32,
    pub f_policy: FPolicy,
    /// Below this view size the mechanisms return their fallback immediately.
    pub min_view_nodes: usize,
    pub budget: SearchBudget,
}

impl MechConfig {
    pub fn new(s: u32) -> Self {
        MechConfig {
            s,
            f_policy: FPolicy::Auto,
            min_view_nodes: 1,
            budget: SearchBudget::default(),
        }
    }

    pub fn with_f(mut self, policy: FPolicy) -> Self {
        self.f_policy = policy;
        self
    }

    pub fn with_budget(mut self, budget: SearchBudget) -> Self {
        self.budget = budget;
        self
    }
}

/// Derived thresholds for the segment-guarantee mechanism: paths are built at
/// length `s_prime` and stitched with window `s_dprime`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentParams {
    pub f: u32,
    pub s_prime: usize,
    pub s_dprime: usize,
}

pub fn segment_params(s: u32, f: u32) -> SegmentParams {
    let f = f.max(2) as usize;
    let s = s as usize;
    let s_dprime = (s / (f * f)).max(1);
    let s_prime = (s / f).max(2).max(2 * s_dprime);
    SegmentParams {
        f: f as u32,
        s_prime,
        s_dprime,
    }
}

/// Derived threshold for the average-guarantee mechanism: both the build
/// length quantum and the stitch window are `s_prime`.
pub fn average_s_prime(s: u32, f: u32) -> usize {
    let f = f.max(2) as usize;
    ((s as usize) / (f * f)).max(1)
}
