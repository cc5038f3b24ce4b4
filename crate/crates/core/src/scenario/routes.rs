use serde::{Deserialize, Serialize};

use super::spec::{AmbientVehicle, InitialState, LeadBrake, ScenarioSpec, TorTrigger};
use crate::arbitrator::{Disengagement, TakeoverTarget};
use crate::dynamics::{DynamicsParams, DEFAULT_VEHICLE_LENGTH};
use crate::scalar::Real;

/// Lead cruise speed of the canonical routes, 40 km/h (m/s).
pub const CANONICAL_LEAD_SPEED: f64 = 40.0 / 3.6;

/// Bumper-to-bumper gap to the lead at the start of a canonical drive (m).
pub const CANONICAL_GAP: f64 = 15.0;

/// Request positions of route A (m along the route). Plausible placements,
/// not measured ones.
pub const ROUTE_A_TRIGGERS: [f64; 2] = [700.0, 1800.0];
pub const ROUTE_B_TRIGGERS: [f64; 2] = [1000.0, 2100.0];

fn canonical<T: Real>(name: &str, triggers: [f64; 2]) -> ScenarioSpec<T> {
    let v = T::of(CANONICAL_LEAD_SPEED);
    ScenarioSpec {
        name: name.to_string(),
        route_length: T::of(4000.0),
        dt: T::of(0.05),
        duration: T::of(240.0),
        substeps: 4,
        ego_init: InitialState {
            s: T::zero(),
            v,
            lane: 0,
        },
        lead_init: InitialState {
            s: T::of(CANONICAL_GAP + DEFAULT_VEHICLE_LENGTH),
            v,
            lane: 0,
        },
        tor_events: vec![
            TorTrigger::at_position(T::of(triggers[0]), TakeoverTarget::Shared, Disengagement::Ordinary),
            TorTrigger::at_position(T::of(triggers[1]), TakeoverTarget::Shared, Disengagement::Urgent),
        ],
        lead_brake: LeadBrake::default(),
        ambient: vec![
            AmbientVehicle {
                lane: 1,
                s: T::of(40.0),
                v: T::of(35.0 / 3.6),
            },
            AmbientVehicle {
                lane: 1,
                s: T::of(-30.0),
                v: T::of(45.0 / 3.6),
            },
            AmbientVehicle {
                lane: 1,
                s: T::of(160.0),
                v: T::of(30.0 / 3.6),
            },
        ],
        dynamics: DynamicsParams::default(),
    }
}

/// The two canonical routes. They differ only in where the requests fire.
pub fn make_routes<T: Real>() -> (ScenarioSpec<T>, ScenarioSpec<T>) {
    (canonical("route-a", ROUTE_A_TRIGGERS), canonical("route-b", ROUTE_B_TRIGGERS))
}

/// Looks up a canonical route by name (`route-a`, `route-b`).
pub fn builtin_route<T: Real>(name: &str) -> Option<ScenarioSpec<T>> {
    let (a, b) = make_routes();
    match name {
        "route-a" | "a" | "A" => Some(a),
        "route-b" | "b" | "B" => Some(b),
        _ => None,
    }
}

/// Participant group of the counterbalanced design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrderGroup {
    First,
    Second,
}

impl OrderGroup {
    /// Even participant indices go first-order, odd ones reversed.
    pub fn for_index(i: usize) -> Self {
        if i % 2 == 0 {
            Self::First
        } else {
            Self::Second
        }
    }
}

/// Drive order for a group: the list as given for the first group, reversed for the second.
pub fn counterbalance<D: Clone>(drives: &[D], group: OrderGroup) -> Vec<D> {
    match group {
        OrderGroup::First => drives.to_vec(),
        OrderGroup::Second => drives.iter().rev().cloned().collect(),
    }
}
