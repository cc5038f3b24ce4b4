//! Takeover simulation core: vehicle dynamics, expert trace replay, input
//! arbitration, simulated drivers, the drive engine and safety metrics.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`). The aliases at the bottom fix the scalar for callers
//! that do not need the generality.

pub mod arbitrator;
pub mod driver;
pub mod dynamics;
pub mod expert;
pub mod metrics;
pub mod scalar;
pub mod scenario;

pub use scalar::Real;

pub type ControlInputF64 = dynamics::ControlInput<f64>;
pub type ControlInputF32 = dynamics::ControlInput<f32>;
pub type VehicleStateF64 = dynamics::VehicleState<f64>;
pub type VehicleStateF32 = dynamics::VehicleState<f32>;
pub type DynamicsParamsF64 = dynamics::DynamicsParams<f64>;
pub type DriverParamsF64 = driver::DriverParams<f64>;
pub type DriverParamsF32 = driver::DriverParams<f32>;
pub type ExpertTraceF64 = expert::ExpertTrace<f64>;
pub type ExpertTraceF32 = expert::ExpertTrace<f32>;
pub type ScenarioSpecF64 = scenario::ScenarioSpec<f64>;
pub type ScenarioSpecF32 = scenario::ScenarioSpec<f32>;
pub type DriveLogF64 = scenario::DriveLog<f64>;
pub type DriveLogF32 = scenario::DriveLog<f32>;
pub type ArbiterConfigF64 = arbitrator::ArbiterConfig<f64>;
pub type MetricsConfigF64 = metrics::MetricsConfig<f64>;
pub type SafetyReportF64 = metrics::SafetyReport<f64>;
pub type TlxRatingF64 = metrics::TlxRating<f64>;
