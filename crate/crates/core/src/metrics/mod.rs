//! Surrogate-safety measures, workload scores and group statistics.

mod report;
mod stats;
mod tlx;
mod ttc;

pub use report::{
    event_report, reaction_time, reaction_time_in, safety_report, write_reports_csv, SafetyReport,
    SAFETY_REPORT_COLUMNS,
};
pub use stats::{group_assign, quantile_sorted, welch_t, Distribution, GroupAssignment, WelchResult, GROUP_THRESHOLD};
pub use tlx::{tlx_overall, TlxRating, TLX_DIMENSIONS};
pub use ttc::{min_ttc, tet, tet_rect, tit, tit_rect, ttc, ttc_series, window, TtcSample};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("evaluation window [{t0}, {t0} + {w}] holds no samples")]
    EmptyWindow { t0: f64, w: f64 },
    #[error("no takeover request at t = {0} in this log")]
    TorNotInLog(f64),
    #[error("TTC threshold must be finite and > 0, got {0}")]
    Theta(f64),
    #[error("invalid metrics config: {0}")]
    Config(String),
    #[error("workload rating: {0}")]
    Tlx(String),
    #[error("sample: {0}")]
    Sample(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Evaluation settings shared by every measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: crate::scalar::Real"))]
pub struct MetricsConfig<T> {
    /// TTC threshold for TET/TIT (s).
    pub theta: T,
    /// Brake force counted as a press.
    pub eps: T,
    /// Evaluation window after each request (s).
    pub window: T,
}

impl<T: Real> Default for MetricsConfig<T> {
    fn default() -> Self {
        Self {
            theta: T::of(3.0),
            eps: T::of(0.05),
            window: T::of(20.0),
        }
    }
}

impl<T: Real> MetricsConfig<T> {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.theta.is_finite() && self.theta > T::zero()) {
            return Err(MetricsError::Theta(self.theta.as_f64()));
        }
        if !(self.eps >= T::zero() && self.eps < T::one()) {
            return Err(MetricsError::Config(format!("eps must be in [0, 1), got {}", self.eps)));
        }
        if !(self.window.is_finite() && self.window >= T::zero()) {
            return Err(MetricsError::Config(format!("window must be >= 0, got {}", self.window)));
        }
        Ok(())
    }
}
