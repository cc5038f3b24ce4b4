//! Parameterised simulated driver for headless takeover experiments.
//!
//! The driver monitors hands-off until the takeover request plus its reaction
//! time, then ramps the brake up to a target force. While the gap is open and
//! the lead is not being caught up on, the driver releases the brake and
//! throttles back up towards the lead speed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::arbitrator::TorEvent;
use crate::dynamics::ControlInput;
use crate::scalar::Real;

/// Spread of the multiplicative brake noise applied when a noise seed is set.
const BRAKE_NOISE_SD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: crate::scalar::Real"))]
pub struct DriverParams<T> {
    pub id: String,
    /// Brake reaction time after the takeover request (s).
    pub rt: T,
    /// Brake application rate (1/s).
    pub ramp: T,
    pub target_brake: T,
    /// Gap above which the driver eases off the brake (m).
    pub release_gap: T,
    /// Throttle per m/s of speed deficit when catching back up to the lead.
    pub follow_gain: T,
    /// Seed of the pedal noise; 0 disables it.
    pub noise_seed: u64,
}

impl<T: Real> Default for DriverParams<T> {
    fn default() -> Self {
        Self {
            id: "driver".into(),
            rt: T::of(1.0),
            ramp: T::of(2.0),
            target_brake: T::of(0.9),
            release_gap: T::of(15.0),
            follow_gain: T::of(1.5),
            noise_seed: 0,
        }
    }
}

impl<T: Real> DriverParams<T> {
    pub fn with_rt(id: impl Into<String>, rt: T) -> Self {
        Self {
            id: id.into(),
            rt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = [self.rt, self.ramp, self.target_brake, self.release_gap, self.follow_gain];
        if !finite.iter().all(|x| x.is_finite()) {
            return Err(format!("driver {}: non-finite parameter", self.id));
        }
        if self.rt < T::zero() {
            return Err(format!("driver {}: rt must be >= 0", self.id));
        }
        if self.ramp <= T::zero() {
            return Err(format!("driver {}: ramp must be > 0", self.id));
        }
        if !(self.target_brake > T::zero() && self.target_brake <= T::one()) {
            return Err(format!("driver {}: target_brake must be in (0, 1]", self.id));
        }
        if self.follow_gain < T::zero() {
            return Err(format!("driver {}: follow_gain must be >= 0", self.id));
        }
        Ok(())
    }
}

/// Default reaction-time grid for simulated driver populations (s).
pub const DEFAULT_RT_GRID: [f64; 6] = [0.4, 0.8, 1.2, 1.6, 2.0, 2.4];

/// Drivers `rt0.4` … `rt2.4` spanning [`DEFAULT_RT_GRID`].
pub fn default_population<T: Real>() -> Vec<DriverParams<T>> {
    DEFAULT_RT_GRID
        .iter()
        .map(|&rt| DriverParams::with_rt(format!("rt{rt:.1}"), T::of(rt)))
        .collect()
}

/// What the driver perceives at a tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Percept<T> {
    /// Bumper-to-bumper gap; `None` without a leader.
    pub gap: Option<T>,
    pub v_ego: T,
    pub v_lead: T,
    /// Lead acceleration (brake lights).
    pub a_lead: T,
}

fn noise_factor<T: Real>(seed: u64, t: T) -> T {
    let tick = (t.as_f64() * 1e6).round() as i64 as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tick.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let n = Normal::new(0.0, BRAKE_NOISE_SD).expect("valid normal").sample(&mut rng);
    T::of(1.0 + n)
}

/// Pedal input of the simulated driver at time `t`.
pub fn driver_input<T: Real>(
    p: &DriverParams<T>,
    t: T,
    tor: Option<&TorEvent<T>>,
    percept: &Percept<T>,
) -> ControlInput<T> {
    let Some(tor) = tor else {
        return ControlInput::zero();
    };
    let since = t - tor.t_issued - p.rt;
    if since < T::zero() {
        return ControlInput::zero();
    }

    let gap = percept.gap.unwrap_or_else(T::infinity);
    if gap > p.release_gap && percept.v_ego <= percept.v_lead {
        let throttle = (p.follow_gain * (percept.v_lead - percept.v_ego))
            .max(T::zero())
            .min(T::one());
        return ControlInput::new(throttle, T::zero(), T::zero());
    }

    let mut brake = (p.ramp * since).min(p.target_brake);
    if p.noise_seed != 0 {
        brake = brake * noise_factor(p.noise_seed, t);
    }
    ControlInput::braking(brake.max(T::zero()).min(T::one()))
}
