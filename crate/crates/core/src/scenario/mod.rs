//! Scenario scripts, the drive engine and drive logs.

mod engine;
mod log;
mod routes;
mod spec;
mod synth;

pub use engine::{
    check_trace_coverage, run_drive, run_drive_matched, run_drive_with, DriverSource, Engine, ReplayDriver,
    SimulatedDriver, ZeroDriver,
};
pub use log::{DriveLog, LogEvent, LogMeta, Termination, TickRecord};
pub use routes::{
    builtin_route, counterbalance, make_routes, OrderGroup, CANONICAL_GAP, CANONICAL_LEAD_SPEED, ROUTE_A_TRIGGERS,
    ROUTE_B_TRIGGERS,
};
pub use spec::{
    AmbientVehicle, InitialState, LeadBrake, ScenarioSpec, TorTrigger, TRAFFIC_SPEED_MAX, TRAFFIC_SPEED_MIN,
};
pub use synth::synthesize_trace;

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::expert::TraceError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(
        "expert trace does not cover the drive: trace ends at s={trace_s} m, t={trace_t} s; \
         route is {route_length} m and the last tick is at {duration} s"
    )]
    TraceTooShort {
        trace_s: f64,
        trace_t: f64,
        route_length: f64,
        duration: f64,
    },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}
