//! Bounded explicit-state exploration of CWhile programs: the interpreter,
//! trace enumeration, bad-trace search, replay and trace transformations.

pub mod closure;
pub mod enumerate;
pub mod machine;
pub mod replay;
pub mod trace;

pub use closure::{apply_trace_transformations, free_closure, freely_transforms_to_preemption_free};
pub use enumerate::{enumerate_traces, extend_trace, find_bad_trace, verify, EnumStats, Policy, Verdict};
pub use machine::{Machine, State};
pub use replay::{replay, replay_labels, replay_values};
pub use trace::{Event, Trace};

use serde::{Deserialize, Serialize};

use crate::lang::semantics::Fault;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    /// Iterations allowed per activation of a `while (*)`.
    pub loop_unroll: u32,
    /// Maximum number of events in a trace.
    pub max_steps: usize,
    /// Maximum number of traces (or states, for searches) visited.
    pub max_traces: usize,
    /// Variables range over [-domain_bound, domain_bound].
    pub domain_bound: i64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            loop_unroll: 2,
            max_steps: 64,
            max_traces: 100_000,
            domain_bound: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExploreError {
    #[error(transparent)]
    Fault(#[from] Fault),
    #[error("invalid bounds: {0}")]
    Bounds(String),
}

impl Bounds {
    pub fn validate(&self) -> Result<(), ExploreError> {
        if self.loop_unroll == 0 || self.max_steps == 0 || self.max_traces == 0 || self.domain_bound <= 0 {
            return Err(ExploreError::Bounds("all bounds must be positive".into()));
        }
        Ok(())
    }
}
