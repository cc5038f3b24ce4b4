use super::engine::{run_drive_with, ZeroDriver};
use super::spec::ScenarioSpec;
use super::ScenarioError;
use crate::arbitrator::{ArbiterConfig, TakeoverTarget};
use crate::expert::{ControllerParams, ExpertController, ExpertTrace, ExpertTraceSample, TraceMeta};
use crate::scalar::Real;

/// Records a synthetic expert drive of `spec`.
///
/// The expert controller keeps full authority for the whole drive (requests
/// still fire and the lead still brakes), so replaying the result with the
/// automation weight at 1 reproduces it tick for tick.
pub fn synthesize_trace<T: Real>(
    spec: &ScenarioSpec<T>,
    params: ControllerParams<T>,
) -> Result<ExpertTrace<T>, ScenarioError> {
    let recording_spec = spec.with_target(TakeoverTarget::Shared);
    let params = ControllerParams {
        cruise_speed: spec.lead_init.v,
        ..params
    };
    let controller = ExpertController::new(params, spec.dynamics);
    let cfg = ArbiterConfig::with_alpha(T::one());
    let log = run_drive_with(&recording_spec, &mut ZeroDriver, &cfg, controller, 0)?;
    if log.collided() {
        return Err(ScenarioError::Invalid(format!(
            "synthetic expert collided on scenario {}",
            spec.name
        )));
    }
    let samples = log
        .records
        .iter()
        .map(|r| ExpertTraceSample {
            t: r.t,
            s: r.ego.s,
            lat: r.ego.lat,
            v: r.ego.v,
            u: r.u_expert,
        })
        .collect();
    let meta = TraceMeta {
        route: spec.name.clone(),
        recording: format!("synthetic-{}", spec.spec_hash()),
    };
    Ok(ExpertTrace::new(samples, meta)?)
}
