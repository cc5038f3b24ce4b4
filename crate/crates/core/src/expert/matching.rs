use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::trace::ExpertTrace;
use super::Automation;
use crate::driver::Percept;
use crate::dynamics::{ControlInput, VehicleState};
use crate::scalar::Real;

/// Weights of the squared time/space distance and the search window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: crate::scalar::Real"))]
pub struct MatchConfig<T> {
    /// Time weight (1/s²).
    pub w_t: T,
    /// Longitudinal weight (1/m²).
    pub w_s: T,
    /// Lateral weight (1/m²).
    pub w_lat: T,
    /// Half-width of the search window around the previous match, in samples.
    pub window: usize,
}

impl<T: Real> Default for MatchConfig<T> {
    fn default() -> Self {
        Self {
            w_t: T::one(),
            w_s: T::one(),
            w_lat: T::of(4.0),
            window: 100,
        }
    }
}

impl<T: Real> MatchConfig<T> {
    pub fn validate(&self) -> Result<(), String> {
        let w = [self.w_t, self.w_s, self.w_lat];
        if !w.iter().all(|x| x.is_finite() && *x >= T::zero()) {
            return Err("match weights must be finite and >= 0".into());
        }
        if w.iter().all(|x| *x == T::zero()) {
            return Err("match weights must not all be zero".into());
        }
        if self.window < 1 {
            return Err("match window must be >= 1".into());
        }
        Ok(())
    }

    /// Weighted squared distance between a live state at `t` and a recorded sample.
    #[inline]
    pub fn distance2(&self, t: T, s: T, lat: T, rt: T, rs: T, rlat: T) -> T {
        let dt = t - rt;
        let ds = s - rs;
        let dl = lat - rlat;
        self.w_t * dt * dt + self.w_s * ds * ds + self.w_lat * dl * dl
    }
}

/// Expert control for the live state: the recorded input of the nearest
/// sample in time and space.
///
/// The search covers `last_match ± window` (the whole trace when there is no
/// previous match). Ties go to the lower index. The returned index is meant
/// to be passed back as `last_match` on the next call.
pub fn expert_input<T: Real>(
    trace: &ExpertTrace<T>,
    cfg: &MatchConfig<T>,
    t: T,
    ego: &VehicleState<T>,
    last_match: Option<usize>,
) -> (ControlInput<T>, usize) {
    let samples = trace.samples();
    let (lo, hi) = match last_match {
        Some(k) => {
            let k = k.min(samples.len() - 1);
            (k.saturating_sub(cfg.window), (k + cfg.window).min(samples.len() - 1))
        }
        None => (0, samples.len() - 1),
    };

    let mut best = lo;
    let mut best_d = T::infinity();
    for (i, x) in samples[lo..=hi].iter().enumerate() {
        let d = cfg.distance2(t, ego.s, ego.lat, x.t, x.s, x.lat);
        if d < best_d {
            best_d = d;
            best = lo + i;
        }
    }
    (samples[best].u, best)
}

/// Trace-replaying automation: keeps the previous match between ticks.
#[derive(Debug, Clone)]
pub struct ExpertModel<T> {
    trace: Arc<ExpertTrace<T>>,
    cfg: MatchConfig<T>,
    last_match: Option<usize>,
}

impl<T: Real> ExpertModel<T> {
    pub fn new(trace: Arc<ExpertTrace<T>>, cfg: MatchConfig<T>) -> Self {
        Self {
            trace,
            cfg,
            last_match: None,
        }
    }

    pub fn trace(&self) -> &ExpertTrace<T> {
        &self.trace
    }

    pub fn last_match(&self) -> Option<usize> {
        self.last_match
    }
}

impl<T: Real> Automation<T> for ExpertModel<T> {
    fn control(&mut self, t: T, ego: &VehicleState<T>, _percept: &Percept<T>) -> ControlInput<T> {
        let (u, idx) = expert_input(&self.trace, &self.cfg, t, ego, self.last_match);
        self.last_match = Some(idx);
        u
    }

    fn matched_index(&self) -> Option<usize> {
        self.last_match
    }
}
