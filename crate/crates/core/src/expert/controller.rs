use serde::{Deserialize, Serialize};

use super::Automation;
use crate::driver::Percept;
use crate::dynamics::{ControlInput, DynamicsParams, VehicleState};
use crate::scalar::Real;

/// Gains of the synthetic expert used to record bundled traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: crate::scalar::Real"))]
pub struct ControllerParams<T> {
    /// Gap kept at standstill (m).
    pub standstill_gap: T,
    /// Desired time headway on top of the standstill gap (s).
    pub time_headway: T,
    /// Acceleration per metre of gap error (1/s²).
    pub k_gap: T,
    /// Acceleration per m/s of speed difference (1/s).
    pub k_speed: T,
    /// Lead deceleration treated as an emergency stop (m/s²).
    pub hazard_decel: T,
    /// Lead speed below which the lead counts as stopped (m/s).
    pub stopped_speed: T,
    /// Free-road speed when there is no leader (m/s).
    pub cruise_speed: T,
}

impl<T: Real> Default for ControllerParams<T> {
    fn default() -> Self {
        Self {
            standstill_gap: T::of(2.0),
            time_headway: T::of(1.17),
            k_gap: T::of(0.25),
            k_speed: T::of(0.9),
            hazard_decel: T::of(3.0),
            stopped_speed: T::of(0.1),
            cruise_speed: T::of(11.11),
        }
    }
}

/// Constant-headway car follower that brakes fully when the lead performs an
/// emergency stop and holds the brake while the lead stands.
#[derive(Debug, Clone)]
pub struct ExpertController<T> {
    pub params: ControllerParams<T>,
    pub dynamics: DynamicsParams<T>,
}

impl<T: Real> ExpertController<T> {
    pub fn new(params: ControllerParams<T>, dynamics: DynamicsParams<T>) -> Self {
        Self { params, dynamics }
    }

    /// Desired longitudinal acceleration.
    pub fn desired_accel(&self, percept: &Percept<T>) -> T {
        let p = &self.params;
        let Some(gap) = percept.gap else {
            return p.k_speed * (p.cruise_speed - percept.v_ego);
        };
        if percept.a_lead <= -p.hazard_decel {
            return -self.dynamics.b_max;
        }
        if percept.v_lead < p.stopped_speed && percept.a_lead <= T::zero() {
            return -self.dynamics.b_max;
        }
        let desired_gap = p.standstill_gap + p.time_headway * percept.v_ego;
        p.k_gap * (gap - desired_gap) + p.k_speed * (percept.v_lead - percept.v_ego)
    }

    fn pedals(&self, a: T) -> ControlInput<T> {
        if a >= T::zero() {
            ControlInput::new((a / self.dynamics.a_max).min(T::one()), T::zero(), T::zero())
        } else {
            ControlInput::braking((-a / self.dynamics.b_max).min(T::one()))
        }
    }
}

impl<T: Real> Automation<T> for ExpertController<T> {
    fn control(&mut self, _t: T, _ego: &VehicleState<T>, percept: &Percept<T>) -> ControlInput<T> {
        self.pedals(self.desired_accel(percept))
    }
}
