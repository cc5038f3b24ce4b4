use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ScenarioError;
use crate::arbitrator::{Disengagement, TakeoverTarget};
use crate::dynamics::DynamicsParams;
use crate::scalar::Real;

/// Speed band of scripted traffic, 30–50 km/h (m/s).
pub const TRAFFIC_SPEED_MIN: f64 = 30.0 / 3.6;
pub const TRAFFIC_SPEED_MAX: f64 = 50.0 / 3.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState<T> {
    pub s: T,
    pub v: T,
    #[serde(default)]
    pub lane: i32,
}

/// One scripted takeover request. Exactly one of `trigger_s` (ego position)
/// and `trigger_t` (drive time) is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorTrigger<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger_s: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger_t: Option<T>,
    pub target: TakeoverTarget,
    pub disengagement: Disengagement,
}

impl<T: Real> TorTrigger<T> {
    pub fn at_position(s: T, target: TakeoverTarget, disengagement: Disengagement) -> Self {
        Self {
            trigger_s: Some(s),
            trigger_t: None,
            target,
            disengagement,
        }
    }

    pub fn at_time(t: T, target: TakeoverTarget, disengagement: Disengagement) -> Self {
        Self {
            trigger_s: None,
            trigger_t: Some(t),
            target,
            disengagement,
        }
    }

    pub fn reached(&self, t: T, ego_s: T) -> bool {
        match (self.trigger_s, self.trigger_t) {
            (Some(s), _) => ego_s >= s,
            (None, Some(tt)) => t >= tt,
            (None, None) => false,
        }
    }
}

/// Emergency stop of the lead vehicle tied to each takeover request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: crate::scalar::Real"))]
pub struct LeadBrake<T> {
    pub decel: T,
    /// Delay from the request to the brake onset for ordinary disengagements (s).
    pub ordinary_offset: T,
    /// Same for urgent disengagements (s).
    pub urgent_offset: T,
    /// Time the lead stands still before pulling away (s).
    pub dwell: T,
    /// Acceleration back to cruise speed (m/s²).
    pub resume_accel: T,
}

impl<T: Real> Default for LeadBrake<T> {
    fn default() -> Self {
        Self {
            decel: T::of(9.8),
            ordinary_offset: T::one(),
            urgent_offset: T::zero(),
            dwell: T::of(3.0),
            resume_accel: T::of(1.5),
        }
    }
}

impl<T: Real> LeadBrake<T> {
    pub fn offset(&self, d: Disengagement) -> T {
        match d {
            Disengagement::Ordinary => self.ordinary_offset,
            Disengagement::Urgent => self.urgent_offset,
        }
    }
}

/// Background vehicle moving at constant speed; it never interacts with the ego.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbientVehicle<T> {
    pub lane: i32,
    pub s: T,
    pub v: T,
}

fn default_substeps() -> usize {
    4
}

/// Declarative description of one drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: crate::scalar::Real"))]
pub struct ScenarioSpec<T> {
    pub name: String,
    pub route_length: T,
    pub dt: T,
    pub duration: T,
    /// Integration sub-steps per logged tick.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    pub ego_init: InitialState<T>,
    pub lead_init: InitialState<T>,
    #[serde(default)]
    pub tor_events: Vec<TorTrigger<T>>,
    #[serde(default)]
    pub lead_brake: LeadBrake<T>,
    #[serde(default)]
    pub ambient: Vec<AmbientVehicle<T>>,
    #[serde(default)]
    pub dynamics: DynamicsParams<T>,
}

fn in_traffic_band<T: Real>(v: T) -> bool {
    let v = v.as_f64();
    (TRAFFIC_SPEED_MIN - 1e-2..=TRAFFIC_SPEED_MAX + 1e-2).contains(&v)
}

impl<T: Real> ScenarioSpec<T> {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.dt.is_finite() && self.dt > T::zero()) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return bad("duration must be at least one tick".into());
        }
        if self.substeps == 0 {
            return bad("substeps must be >= 1".into());
        }
        if !(self.route_length.is_finite() && self.route_length > self.ego_init.s) {
            return bad("route_length must exceed the ego start position".into());
        }
        self.dynamics
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        for (name, st) in [("ego_init", &self.ego_init), ("lead_init", &self.lead_init)] {
            if !(st.s.is_finite() && st.v.is_finite() && st.v >= T::zero()) {
                return bad(format!("{name} must be finite with v >= 0"));
            }
        }
        if !in_traffic_band(self.lead_init.v) {
            return bad(format!("lead speed {} m/s is outside 30-50 km/h", self.lead_init.v));
        }
        for (i, a) in self.ambient.iter().enumerate() {
            if !(a.s.is_finite() && in_traffic_band(a.v)) {
                return bad(format!("ambient vehicle {i} speed {} m/s is outside 30-50 km/h", a.v));
            }
        }
        let lb = &self.lead_brake;
        if !(lb.decel > T::zero() && lb.ordinary_offset >= T::zero() && lb.urgent_offset >= T::zero()) {
            return bad("lead_brake needs decel > 0 and non-negative offsets".into());
        }
        if !(lb.dwell >= T::zero() && lb.resume_accel > T::zero()) {
            return bad("lead_brake needs dwell >= 0 and resume_accel > 0".into());
        }
        let mut prev_s: Option<T> = None;
        let mut prev_t: Option<T> = None;
        for (i, ev) in self.tor_events.iter().enumerate() {
            match (ev.trigger_s, ev.trigger_t) {
                (Some(s), None) => {
                    if !s.is_finite() || prev_s.is_some_and(|p| s <= p) {
                        return bad(format!("tor_events[{i}]: positions must increase"));
                    }
                    prev_s = Some(s);
                }
                (None, Some(t)) => {
                    if !t.is_finite() || t < T::zero() || prev_t.is_some_and(|p| t <= p) {
                        return bad(format!("tor_events[{i}]: times must increase"));
                    }
                    prev_t = Some(t);
                }
                _ => return bad(format!("tor_events[{i}]: set exactly one of trigger_s, trigger_t")),
            }
        }
        Ok(())
    }

    /// Number of logged ticks in a drive that runs to the end.
    pub fn n_ticks(&self) -> usize {
        (self.duration / self.dt).round().to_usize().unwrap_or(0)
    }

    /// Tick time `k * dt`, computed without accumulation.
    pub fn tick_time(&self, k: usize) -> T {
        T::of_usize(k) * self.dt
    }

    /// The same scenario with every request switched to one strategy and
    /// disengagement type.
    pub fn with_condition(&self, target: TakeoverTarget, disengagement: Disengagement) -> Self {
        let mut out = self.clone();
        for ev in &mut out.tor_events {
            ev.target = target;
            ev.disengagement = disengagement;
        }
        out
    }

    pub fn with_target(&self, target: TakeoverTarget) -> Self {
        let mut out = self.clone();
        for ev in &mut out.tor_events {
            ev.target = target;
        }
        out
    }

    /// Common takeover strategy of all requests, if they agree.
    pub fn strategy(&self) -> Option<TakeoverTarget> {
        let first = self.tor_events.first()?.target;
        self.tor_events.iter().all(|e| e.target == first).then_some(first)
    }

    pub fn disengagement(&self) -> Option<Disengagement> {
        let first = self.tor_events.first()?.disengagement;
        self.tor_events
            .iter()
            .all(|e| e.disengagement == first)
            .then_some(first)
    }

    /// Content hash (first 16 hex digits of SHA-256 over the canonical JSON form).
    pub fn spec_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serialises");
        let digest = Sha256::digest(&json);
        hex::encode(&digest[..8])
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ScenarioError> {
        let spec: Self = toml::from_str(s).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serialises to TOML")
    }
}
