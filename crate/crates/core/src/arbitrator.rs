//! Authority state machine and driver/automation input blending.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::ControlInput;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AutomationMode {
    Auto,
    Shared,
    Manual,
}

impl AutomationMode {
    pub const ALL: [AutomationMode; 3] = [Self::Auto, Self::Shared, Self::Manual];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Auto => "AUTO",
            Self::Shared => "SHARED",
            Self::Manual => "MANUAL",
        }
    }
}

impl fmt::Display for AutomationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Mode the vehicle drops into when a takeover request fires. This is the
/// takeover strategy under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TakeoverTarget {
    Shared,
    Manual,
}

impl TakeoverTarget {
    pub fn mode(self) -> AutomationMode {
        match self {
            Self::Shared => AutomationMode::Shared,
            Self::Manual => AutomationMode::Manual,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Shared => "SHARED",
            Self::Manual => "MANUAL",
        }
    }
}

impl fmt::Display for TakeoverTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TakeoverTarget {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "SHARED" => Ok(Self::Shared),
            "MANUAL" => Ok(Self::Manual),
            other => Err(format!("unknown takeover strategy {other:?}")),
        }
    }
}

/// Cause of the automation exit. Ordinary disengagements precede the hazard
/// by a fixed offset; urgent ones coincide with it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Disengagement {
    Ordinary,
    Urgent,
}

impl Disengagement {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ordinary => "ORDINARY",
            Self::Urgent => "URGENT",
        }
    }
}

impl fmt::Display for Disengagement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Disengagement {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "ORDINARY" => Ok(Self::Ordinary),
            "URGENT" => Ok(Self::Urgent),
            other => Err(format!("unknown disengagement {other:?}")),
        }
    }
}

/// A takeover request as issued by the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorEvent<T> {
    pub target: TakeoverTarget,
    pub disengagement: Disengagement,
    pub t_issued: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ArbiterEvent<T> {
    Tor(TorEvent<T>),
    SteadyFollowing,
    Reset,
}

impl<T> ArbiterEvent<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Tor(_) => "TOR",
            Self::SteadyFollowing => "STEADY_FOLLOWING",
            Self::Reset => "RESET",
        }
    }
}

/// Result of feeding one event to the state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub mode: AutomationMode,
    /// The event had no effect in the current mode.
    pub ignored: bool,
}

/// Total transition function of the authority state machine.
pub fn transition<T>(mode: AutomationMode, event: &ArbiterEvent<T>) -> Transition {
    use AutomationMode::*;
    let next = match (mode, event) {
        (_, ArbiterEvent::Reset) => Some(Auto),
        (Auto, ArbiterEvent::Tor(tor)) => Some(tor.target.mode()),
        (Shared | Manual, ArbiterEvent::SteadyFollowing) => Some(Auto),
        _ => None,
    };
    match next {
        Some(m) => Transition {
            mode: m,
            ignored: false,
        },
        None => Transition { mode, ignored: true },
    }
}

/// Thresholds for detecting steady car following.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: crate::scalar::Real"))]
pub struct SteadyConfig<T> {
    /// Largest tolerated |v_ego − v_lead| (m/s).
    pub dv_max: T,
    /// Admissible time-headway band (s).
    pub headway_min: T,
    pub headway_max: T,
    /// How long all conditions must hold continuously (s).
    pub hold: T,
}

impl<T: Real> Default for SteadyConfig<T> {
    fn default() -> Self {
        Self {
            dv_max: T::of(0.5),
            headway_min: T::of(1.0),
            headway_max: T::of(3.0),
            hold: T::of(5.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: crate::scalar::Real"))]
pub struct ArbiterConfig<T> {
    /// Automation weight while sharing control.
    pub alpha: T,
    pub steady: SteadyConfig<T>,
}

impl<T: Real> Default for ArbiterConfig<T> {
    fn default() -> Self {
        Self {
            alpha: T::of(0.5),
            steady: SteadyConfig::default(),
        }
    }
}

impl<T: Real> ArbiterConfig<T> {
    pub fn with_alpha(alpha: T) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha >= T::zero() && self.alpha <= T::one()) {
            return Err(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        let s = &self.steady;
        if !(s.hold.is_finite() && s.hold > T::zero()) {
            return Err("steady hold must be > 0".into());
        }
        if !(s.dv_max >= T::zero() && s.headway_min >= T::zero() && s.headway_min <= s.headway_max) {
            return Err("steady thresholds are inconsistent".into());
        }
        Ok(())
    }
}

fn mix<T: Real>(alpha: T, expert: T, driver: T) -> T {
    let x = alpha * expert + (T::one() - alpha) * driver;
    x.max(expert.min(driver)).min(expert.max(driver))
}

/// Combines driver and expert inputs according to the current authority mode.
///
/// In shared mode each channel is the convex combination
/// `alpha * expert + (1 - alpha) * driver`, clamped to the interval spanned by
/// the two inputs so rounding cannot leave it.
pub fn blend<T: Real>(
    driver: &ControlInput<T>,
    expert: &ControlInput<T>,
    mode: AutomationMode,
    alpha: T,
) -> ControlInput<T> {
    match mode {
        AutomationMode::Auto => *expert,
        AutomationMode::Manual => *driver,
        AutomationMode::Shared => {
            if alpha <= T::zero() {
                return *driver;
            }
            if alpha >= T::one() {
                return *expert;
            }
            let unit = |x: T| x.max(T::zero()).min(T::one());
            ControlInput {
                throttle: unit(mix(alpha, expert.throttle, driver.throttle)),
                brake: unit(mix(alpha, expert.brake, driver.brake)),
                steering: mix(alpha, expert.steering, driver.steering),
            }
        }
    }
}

/// One car-following observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowSample<T> {
    pub gap: T,
    pub v_ego: T,
    pub v_lead: T,
}

impl<T: Real> FollowSample<T> {
    pub fn is_steady(&self, cfg: &SteadyConfig<T>) -> bool {
        if !(self.v_ego > T::zero()) || !self.gap.is_finite() {
            return false;
        }
        let headway = self.gap / self.v_ego;
        (self.v_ego - self.v_lead).abs() <= cfg.dv_max
            && headway >= cfg.headway_min
            && headway <= cfg.headway_max
    }
}

/// Number of samples that make up the hold window at sampling step `dt`.
pub fn hold_samples<T: Real>(cfg: &SteadyConfig<T>, dt: T) -> usize {
    (cfg.hold / dt).round().to_usize().unwrap_or(usize::MAX).max(1)
}

/// True iff every sample in the last `hold` seconds of `history` shows steady following.
pub fn steady_following<T: Real>(history: &[FollowSample<T>], dt: T, cfg: &SteadyConfig<T>) -> bool {
    let n = hold_samples(cfg, dt);
    if history.len() < n {
        return false;
    }
    history[history.len() - n..].iter().all(|s| s.is_steady(cfg))
}

/// Streaming form of [`steady_following`]: tracks the length of the current
/// steady run instead of keeping the history.
#[derive(Debug, Clone)]
pub struct SteadyDetector<T> {
    cfg: SteadyConfig<T>,
    needed: usize,
    run: usize,
}

impl<T: Real> SteadyDetector<T> {
    pub fn new(cfg: SteadyConfig<T>, dt: T) -> Self {
        Self {
            needed: hold_samples(&cfg, dt),
            cfg,
            run: 0,
        }
    }

    pub fn push(&mut self, sample: FollowSample<T>) -> bool {
        if sample.is_steady(&self.cfg) {
            self.run += 1;
        } else {
            self.run = 0;
        }
        self.run >= self.needed
    }

    pub fn reset(&mut self) {
        self.run = 0;
    }
}
