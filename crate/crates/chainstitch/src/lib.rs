//! Simulator for altruist-initiated donation chains across hospitals.
//!
//! A directed compatibility graph is split between an adversarial base part and
//! independently sampled cross-hospital edges. Hospitals report subsets of their
//! nodes, and a platform mechanism selects a single chain (a simple path starting
//! at the altruist). This crate provides:
//!
//! * the graph model with seeded, order-independent edge sampling ([`graph`]),
//! * exact path benchmarks computed by exhaustive search ([`benchmarks`]),
//! * two chain-selection mechanisms built on segment stitching ([`mech_s`], [`mech_avg`]),
//! * an incentive-audit harness for hiding and matching-time deviations ([`incentives`]),
//! * generators for hard instance families and random fuzz instances ([`instances`]),
//! * the command-line front end ([`cli`]).

pub mod arrange;
pub mod benchmarks;
pub mod cli;
pub mod graph;
pub mod incentives;
pub mod instances;
pub mod mech_avg;
pub mod mech_s;
pub mod packing;
pub mod params;
pub mod stitch;
pub mod trace;

use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An instance or report failed structural validation.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    /// A report referenced nodes outside the hospital's ownership.
    #[error("invalid report: {0}")]
    InvalidReport(String),
    /// An exact search was asked to run on a graph above the configured budget.
    #[error("exact search budget exceeded: {nodes} nodes with budget {budget}")]
    BudgetExceeded { nodes: usize, budget: usize },
    /// An operation's precondition did not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Pathset normalization could not keep both halves of a split long enough.
    #[error("degenerate normalization for hospital {hospital}")]
    DegenerateNormalization { hospital: u32 },
    /// A run or trace violated an internal invariant that should always hold.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    /// A generator could not certify a required family property.
    #[error("uncertified family instance: {0}")]
    Uncertified(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Default cap on node count for exhaustive searches.
pub const DEFAULT_SEARCH_BUDGET: usize = 24;

/// Node-count budget for exhaustive searches.
///
/// Exact searches refuse graphs larger than this unless the relevant subgraph
/// has special structure (a union of simple chains) that admits a polynomial
/// exact routine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    pub max_nodes: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_nodes: DEFAULT_SEARCH_BUDGET,
        }
    }
}

impl SearchBudget {
    pub fn new(max_nodes: usize) -> Self {
        SearchBudget { max_nodes }
    }

    /// Reads the budget from the environment variable `CHAINSTITCH_SEARCH_BUDGET`,
    /// falling back to the default.
    pub fn from_env() -> Self {
        match std::env::var("CHAINSTITCH_SEARCH_BUDGET") {
            Ok(v) => v
                .parse()
                .map(SearchBudget::new)
                .unwrap_or_else(|_| SearchBudget::default()),
            Err(_) => SearchBudget::default(),
        }
    }

    pub fn check(&self, nodes: usize) -> Result<()> {
        if nodes > self.max_nodes {
            Err(Error::BudgetExceeded {
                nodes,
                budget: self.max_nodes,
            })
        } else {
            Ok(())
        }
    }
}
