//! Point-mass longitudinal vehicle kinematics for ego, lead and ambient traffic.
//!
//! Pedal inputs map linearly onto acceleration, there is no drag or engine
//! braking, and a vehicle that would decelerate through zero within a step is
//! stopped exactly at the stop instant instead of rolling backwards.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Vehicle length used for every vehicle in the corridor (m).
pub const DEFAULT_VEHICLE_LENGTH: f64 = 4.5;

/// Default steering limit, about 450 degrees of hand-wheel angle (rad).
pub const DEFAULT_STEER_MAX: f64 = 7.85;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{field} = {value} is out of range")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("invalid dynamics parameters: {0}")]
    InvalidParams(String),
}

/// Normalised pedal forces and hand-wheel angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput<T> {
    pub throttle: T,
    pub brake: T,
    /// Hand-wheel angle in radians, positive to the left.
    pub steering: T,
}

impl<T: Real> ControlInput<T> {
    pub fn new(throttle: T, brake: T, steering: T) -> Self {
        Self {
            throttle,
            brake,
            steering,
        }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn braking(brake: T) -> Self {
        Self::new(T::zero(), brake, T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.throttle.is_finite() && self.brake.is_finite() && self.steering.is_finite()
    }

    pub fn validate(&self, steer_max: T) -> Result<(), DynamicsError> {
        if !self.is_finite() {
            return Err(DynamicsError::NonFinite("control input"));
        }
        let unit = |field, x: T| {
            if x < T::zero() || x > T::one() {
                Err(DynamicsError::OutOfRange {
                    field,
                    value: x.as_f64(),
                })
            } else {
                Ok(())
            }
        };
        unit("throttle", self.throttle)?;
        unit("brake", self.brake)?;
        if self.steering.abs() > steer_max {
            return Err(DynamicsError::OutOfRange {
                field: "steering",
                value: self.steering.as_f64(),
            });
        }
        Ok(())
    }

    /// Clamps every component into its valid range. Non-finite components become zero.
    pub fn clamped(self, steer_max: T) -> Self {
        let fix = |x: T, lo: T, hi: T| if x.is_finite() { x.max(lo).min(hi) } else { T::zero() };
        Self {
            throttle: fix(self.throttle, T::zero(), T::one()),
            brake: fix(self.brake, T::zero(), T::one()),
            steering: fix(self.steering, -steer_max, steer_max),
        }
    }
}

/// Kinematic state of one vehicle on the corridor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState<T> {
    /// Arc position along the route centreline (m).
    pub s: T,
    /// Signed lateral offset from the lane centre (m).
    pub lat: T,
    pub v: T,
    /// Last applied acceleration (m/s²).
    pub a: T,
    pub lane: i32,
    pub length: T,
}

impl<T: Real> VehicleState<T> {
    pub fn new(s: T, v: T) -> Self {
        Self {
            s,
            lat: T::zero(),
            v,
            a: T::zero(),
            lane: 0,
            length: T::of(DEFAULT_VEHICLE_LENGTH),
        }
    }

    pub fn with_lane(mut self, lane: i32) -> Self {
        self.lane = lane;
        self
    }

    fn check_finite(&self) -> Result<(), DynamicsError> {
        let all = [self.s, self.lat, self.v, self.a, self.length];
        if all.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(DynamicsError::NonFinite("vehicle state"))
        }
    }
}

/// Pedal-to-acceleration and steering maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: crate::scalar::Real"))]
pub struct DynamicsParams<T> {
    /// Acceleration at full throttle (m/s²).
    pub a_max: T,
    /// Deceleration at full brake (m/s²).
    pub b_max: T,
    /// Steering limit (rad).
    pub steer_max: T,
    /// Lateral speed at full lock as a fraction of forward speed.
    pub lat_gain: T,
    /// Lateral offset bound, half the road width (m).
    pub lat_limit: T,
}

impl<T: Real> Default for DynamicsParams<T> {
    fn default() -> Self {
        Self {
            a_max: T::of(3.0),
            b_max: T::of(9.8),
            steer_max: T::of(DEFAULT_STEER_MAX),
            lat_gain: T::of(0.3),
            lat_limit: T::of(3.5),
        }
    }
}

impl<T: Real> DynamicsParams<T> {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("a_max", self.a_max),
            ("b_max", self.b_max),
            ("steer_max", self.steer_max),
            ("lat_limit", self.lat_limit),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > T::zero()) {
                return Err(DynamicsError::InvalidParams(format!("{name} must be > 0")));
            }
        }
        if !(self.lat_gain.is_finite() && self.lat_gain >= T::zero()) {
            return Err(DynamicsError::InvalidParams("lat_gain must be >= 0".into()));
        }
        Ok(())
    }

    /// Steering-to-lateral-velocity gain at forward speed `v` (m/s per rad).
    pub fn lateral_gain(&self, v: T) -> T {
        self.lat_gain * v / self.steer_max
    }

    /// Longitudinal acceleration commanded by `u`.
    pub fn acceleration(&self, u: &ControlInput<T>) -> T {
        u.throttle * self.a_max - u.brake * self.b_max
    }
}

fn check_dt<T: Real>(dt: T) -> Result<(), DynamicsError> {
    if dt.is_finite() && dt > T::zero() {
        Ok(())
    } else {
        Err(DynamicsError::InvalidStep(dt.as_f64()))
    }
}

/// Advances one constant-acceleration interval of length `dt` starting at
/// speed `v`. Returns `(v_end, distance)`, stopping exactly at standstill.
fn advance<T: Real>(v: T, a: T, dt: T) -> (T, T) {
    let v_end = v + a * dt;
    if v_end < T::zero() {
        // a < 0 here since v >= 0
        (T::zero(), v * v / (T::of(2.0) * -a))
    } else {
        (v_end, T::of(0.5) * (v + v_end) * dt)
    }
}

/// Advances a vehicle by `dt` under control `u`.
pub fn step_vehicle<T: Real>(
    state: &VehicleState<T>,
    u: &ControlInput<T>,
    p: &DynamicsParams<T>,
    dt: T,
) -> Result<VehicleState<T>, DynamicsError> {
    check_dt(dt)?;
    u.validate(p.steer_max)?;
    state.check_finite()?;

    let a = p.acceleration(u);
    let v0 = state.v.max(T::zero());
    let (v, ds) = advance(v0, a, dt);
    let lat = state.lat + p.lateral_gain(v0) * u.steering * dt;

    Ok(VehicleState {
        s: state.s + ds,
        lat: lat.max(-p.lat_limit).min(p.lat_limit),
        v,
        a: if v0 == T::zero() && a < T::zero() { T::zero() } else { a },
        ..*state
    })
}

/// Bumper-to-bumper gap from the ego front to the lead rear. `None` when the
/// vehicles are in different lanes, i.e. there is no leader.
pub fn gap<T: Real>(ego: &VehicleState<T>, lead: &VehicleState<T>) -> Option<T> {
    if ego.lane != lead.lane {
        return None;
    }
    Some(lead.s - ego.s - lead.length)
}

/// Restart behaviour of a lead vehicle after an emergency stop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadResume<T> {
    /// Time spent at rest before pulling away again (s).
    pub dwell: T,
    /// Acceleration back up to cruise speed (m/s²).
    pub accel: T,
}

/// Scripted lead speed profile: cruise at `v0`, brake at `decel` from
/// `t_brake` down to rest, then either hold or pull away again.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadProfile<T> {
    pub v0: T,
    pub t_brake: Option<T>,
    pub decel: T,
    pub resume: Option<LeadResume<T>>,
}

/// Phase boundaries of a braking lead: brake onset, stop, restart, back at cruise.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Breakpoints<T> {
    brake: T,
    stop: T,
    go: T,
    cruise: T,
}

impl<T: Real> LeadProfile<T> {
    pub fn cruise(v0: T) -> Self {
        Self {
            v0,
            t_brake: None,
            decel: T::of(9.8),
            resume: None,
        }
    }

    pub fn braking(v0: T, t_brake: T, decel: T) -> Self {
        Self {
            v0,
            t_brake: Some(t_brake),
            decel,
            resume: None,
        }
    }

    pub fn with_resume(mut self, dwell: T, accel: T) -> Self {
        self.resume = Some(LeadResume { dwell, accel });
        self
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.v0.is_finite() && self.v0 >= T::zero()) {
            return Err(DynamicsError::InvalidParams("lead v0 must be >= 0".into()));
        }
        if !(self.decel.is_finite() && self.decel > T::zero()) {
            return Err(DynamicsError::InvalidParams("lead decel must be > 0".into()));
        }
        if let Some(tb) = self.t_brake {
            if !tb.is_finite() {
                return Err(DynamicsError::NonFinite("lead t_brake"));
            }
        }
        if let Some(r) = self.resume {
            if !(r.dwell.is_finite() && r.dwell >= T::zero() && r.accel.is_finite() && r.accel > T::zero()) {
                return Err(DynamicsError::InvalidParams("lead resume needs dwell >= 0 and accel > 0".into()));
            }
        }
        Ok(())
    }

    /// Time from brake onset to standstill.
    pub fn stop_duration(&self) -> T {
        self.v0 / self.decel
    }

    /// Distance covered from brake onset to standstill.
    pub fn stopping_distance(&self) -> T {
        self.v0 * self.v0 / (T::of(2.0) * self.decel)
    }

    fn breakpoints(&self) -> Option<Breakpoints<T>> {
        let brake = self.t_brake?;
        let stop = brake + self.stop_duration();
        let (go, cruise) = match self.resume {
            Some(r) => {
                let go = stop + r.dwell;
                (go, go + self.v0 / r.accel)
            }
            None => (T::infinity(), T::infinity()),
        };
        Some(Breakpoints {
            brake,
            stop,
            go,
            cruise,
        })
    }

    /// Commanded acceleration at time `t` (right-continuous at phase boundaries).
    pub fn accel_at(&self, t: T) -> T {
        let Some(bp) = self.breakpoints() else {
            return T::zero();
        };
        if t < bp.brake {
            T::zero()
        } else if t < bp.stop {
            -self.decel
        } else if t < bp.go {
            T::zero()
        } else if t < bp.cruise {
            self.resume.map(|r| r.accel).unwrap_or_else(T::zero)
        } else {
            T::zero()
        }
    }

    /// Closed-form speed at time `t`.
    pub fn velocity_at(&self, t: T) -> T {
        let Some(bp) = self.breakpoints() else {
            return self.v0;
        };
        if t < bp.brake {
            self.v0
        } else if t < bp.stop {
            (self.v0 - self.decel * (t - bp.brake)).max(T::zero())
        } else if t < bp.go {
            T::zero()
        } else if t < bp.cruise {
            let accel = self.resume.map(|r| r.accel).unwrap_or_else(T::zero);
            (accel * (t - bp.go)).min(self.v0)
        } else {
            self.v0
        }
    }

    /// True while the lead travels at cruise speed (before braking or after restarting).
    pub fn is_cruising(&self, t: T) -> bool {
        match self.breakpoints() {
            None => true,
            Some(bp) => t < bp.brake || t >= bp.cruise,
        }
    }

    /// True once the profile has come to rest and will not restart.
    pub fn is_parked(&self, t: T) -> bool {
        match self.breakpoints() {
            Some(bp) => self.resume.is_none() && t >= bp.stop,
            None => false,
        }
    }
}

/// Advances the lead over `[t, t + dt]` following `profile`.
///
/// The interval is split at the profile's phase boundaries so each piece has
/// constant acceleration, which makes the travelled distance exact regardless
/// of how `dt` lines up with brake onset and stop.
pub fn step_lead<T: Real>(
    profile: &LeadProfile<T>,
    t: T,
    state: &VehicleState<T>,
    dt: T,
) -> Result<VehicleState<T>, DynamicsError> {
    check_dt(dt)?;
    profile.validate()?;
    state.check_finite()?;
    if !t.is_finite() {
        return Err(DynamicsError::NonFinite("time"));
    }

    let end = t + dt;
    let cuts: Vec<T> = match profile.breakpoints() {
        Some(bp) => [bp.brake, bp.stop, bp.go, bp.cruise]
            .into_iter()
            .filter(|&c| c > t && c < end)
            .collect(),
        None => Vec::new(),
    };

    let mut v = state.v.max(T::zero());
    let mut s = state.s;
    let mut cur = t;
    for next in cuts.into_iter().chain(std::iter::once(end)) {
        let a = profile.accel_at(cur);
        let (v_next, ds) = advance(v, a, next - cur);
        s = s + ds;
        v = v_next;
        if let Some(bp) = profile.breakpoints() {
            if next == bp.stop {
                v = T::zero();
            } else if next == bp.cruise {
                v = profile.v0;
            }
        }
        cur = next;
    }

    Ok(VehicleState {
        s,
        v,
        a: profile.accel_at(end),
        ..*state
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> DynamicsParams<f64> {
        DynamicsParams::default()
    }

    #[test]
    fn full_brake_for_a_tenth_of_a_second() {
        let s0 = VehicleState::new(0.0, 10.0);
        let s1 = step_vehicle(&s0, &ControlInput::braking(1.0), &p(), 0.1).unwrap();
        assert!((s1.v - 9.02).abs() < 1e-12);
        assert!(s1.s > 0.0);
    }

    #[test]
    fn coasting_keeps_speed() {
        let s0 = VehicleState::new(0.0, 10.0);
        let s1 = step_vehicle(&s0, &ControlInput::zero(), &p(), 0.1).unwrap();
        assert_eq!(s1.v, 10.0);
        assert!((s1.s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_stop_within_step() {
        let s0 = VehicleState::new(0.0, 0.5);
        let s1 = step_vehicle(&s0, &ControlInput::braking(1.0), &p(), 0.1).unwrap();
        assert_eq!(s1.v, 0.0);
        assert!((s1.s - 0.25 / 19.6).abs() < 1e-15);
        assert!((s1.s - 0.01276).abs() < 1e-5);
        // resting vehicle stays put under brake
        let s2 = step_vehicle(&s1, &ControlInput::braking(1.0), &p(), 0.1).unwrap();
        assert_eq!(s2.s, s1.s);
        assert_eq!(s2.a, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        let s0 = VehicleState::new(0.0, 1.0);
        let nan = ControlInput::new(f64::NAN, 0.0, 0.0);
        assert!(matches!(
            step_vehicle(&s0, &nan, &p(), 0.1),
            Err(DynamicsError::NonFinite(_))
        ));
        let over = ControlInput::new(0.0, 1.5, 0.0);
        assert!(step_vehicle(&s0, &over, &p(), 0.1).is_err());
        assert!(step_vehicle(&s0, &ControlInput::zero(), &p(), 0.0).is_err());
        assert!(step_vehicle(&s0, &ControlInput::zero(), &p(), f64::INFINITY).is_err());
    }

    #[test]
    fn lateral_offset_is_bounded() {
        let mut st = VehicleState::new(0.0, 20.0);
        let u = ControlInput::new(0.0, 0.0, DEFAULT_STEER_MAX);
        for _ in 0..200 {
            st = step_vehicle(&st, &u, &p(), 0.05).unwrap();
        }
        assert_eq!(st.lat, 3.5);
    }

    #[test]
    fn gap_cases() {
        let ego = VehicleState::new(100.0, 0.0);
        assert_eq!(gap(&ego, &VehicleState::new(130.0, 0.0)), Some(25.5));
        assert_eq!(gap(&ego, &VehicleState::new(104.5, 0.0)), Some(0.0));
        assert_eq!(gap(&ego, &VehicleState::new(103.0, 0.0)), Some(-1.5));
        assert_eq!(gap(&ego, &VehicleState::new(130.0, 0.0).with_lane(1)), None);
    }

    #[test]
    fn lead_brake_speed_half_second_in() {
        let prof = LeadProfile::braking(11.11, 2.0, 9.8);
        assert!((prof.velocity_at(2.5) - 6.21_f64).abs() < 1e-9);
        assert_eq!(prof.velocity_at(1.99), 11.11);
        assert!((prof.stop_duration() - 1.1337_f64).abs() < 1e-3);
        assert!((prof.stopping_distance() - 6.2976_f64).abs() < 1e-3);
    }

    #[test]
    fn lead_cruises_before_brake() {
        let prof = LeadProfile::braking(11.11, 5.0, 9.8);
        let mut st = VehicleState::new(20.0, 11.11);
        for k in 0..20 {
            st = step_lead(&prof, k as f64 * 0.05, &st, 0.05).unwrap();
            assert_eq!(st.v, 11.11);
        }
        assert!((st.s - (20.0 + 11.11)).abs() < 1e-9);
    }

    #[test]
    fn lead_stops_at_closed_form_distance_for_any_step() {
        for &dt in &[0.05, 0.01, 0.037, 0.2] {
            let prof = LeadProfile::braking(11.11, 0.3, 9.8);
            let mut st = VehicleState::new(0.0, 11.11);
            let mut t = 0.0;
            let mut k = 0;
            while t < 3.0 {
                st = step_lead(&prof, t, &st, dt).unwrap();
                k += 1;
                t = k as f64 * dt;
            }
            let expected = 0.3 * 11.11 + prof.stopping_distance();
            assert!((st.s - expected).abs() < 1e-9, "dt={dt}: {} vs {expected}", st.s);
            assert_eq!(st.v, 0.0);
        }
    }

    #[test]
    fn lead_resumes_to_cruise() {
        let prof = LeadProfile::braking(10.0, 1.0, 10.0).with_resume(2.0, 2.0);
        // brake 1..2, rest 2..4, accelerate 4..9
        assert_eq!(prof.velocity_at(3.0), 0.0);
        assert!((prof.velocity_at(6.0) - 4.0_f64).abs() < 1e-12);
        assert!(prof.is_cruising(9.0));
        assert!(!prof.is_cruising(8.9));
        let mut st = VehicleState::new(0.0, 10.0);
        for k in 0..240 {
            st = step_lead(&prof, k as f64 * 0.05, &st, 0.05).unwrap();
        }
        // 12 s: 10 + 5 (brake) + 0 + 25 (ramp) + 3*10
        assert!((st.s - 70.0).abs() < 1e-9, "{}", st.s);
        assert_eq!(st.v, 10.0);
    }

    #[test]
    fn generic_over_f32() {
        let s0 = VehicleState::<f32>::new(0.0, 10.0);
        let s1 = step_vehicle(&s0, &ControlInput::braking(1.0), &DynamicsParams::default(), 0.1).unwrap();
        assert!((s1.v - 9.02).abs() < 1e-5);
    }
}
