//! Expert driver model: recorded traces, nearest-sample replay, and the
//! synthetic expert used to produce bundled recordings.

mod controller;
mod matching;
mod trace;

pub use controller::{ControllerParams, ExpertController};
pub use matching::{expert_input, ExpertModel, MatchConfig};
pub use trace::{
    load_trace, ExpertTrace, ExpertTraceSample, TraceError, TraceMeta, INTERVAL_JITTER, NOMINAL_INTERVAL,
    TRACE_HEADER,
};

use crate::driver::Percept;
use crate::dynamics::{ControlInput, VehicleState};
use crate::scalar::Real;

/// Source of the automation's control input.
pub trait Automation<T: Real> {
    fn control(&mut self, t: T, ego: &VehicleState<T>, percept: &Percept<T>) -> ControlInput<T>;

    /// Trace index used for the last control, when the automation replays a trace.
    fn matched_index(&self) -> Option<usize> {
        None
    }
}
