use std::sync::Arc;

use takeover_core::arbitrator::{
    transition, ArbiterConfig, ArbiterEvent, AutomationMode, Disengagement, TakeoverTarget, TorEvent,
};
use takeover_core::driver::{default_population, DriverParams};
use takeover_core::expert::{expert_input, ControllerParams, ExpertTrace, MatchConfig};
use takeover_core::metrics::{safety_report, MetricsConfig};
use takeover_core::scenario::{
    check_trace_coverage, make_routes, run_drive, synthesize_trace, DriveLog, Engine, LogEvent, ReplayDriver,
    ScenarioError, ScenarioSpec, SimulatedDriver, Termination, ZeroDriver,
};

fn canonical(target: TakeoverTarget, d: Disengagement) -> (ScenarioSpec<f64>, Arc<ExpertTrace<f64>>) {
    let (a, _) = make_routes::<f64>();
    let spec = a.with_condition(target, d);
    let trace = synthesize_trace(&spec, ControllerParams::default()).unwrap();
    (spec, Arc::new(trace))
}

/// Re-derives every mode change from the logged events.
fn check_mode_trace(log: &DriveLog<f64>) {
    let mut mode = AutomationMode::Auto;
    for r in &log.records {
        let mut expected = mode;
        for e in &r.events {
            match e {
                LogEvent::Tor {
                    target, disengagement, ..
                } => {
                    assert_eq!(expected, AutomationMode::Auto, "request outside AUTO at t={}", r.t);
                    let ev = ArbiterEvent::Tor(TorEvent {
                        target: *target,
                        disengagement: *disengagement,
                        t_issued: r.t,
                    });
                    expected = transition(expected, &ev).mode;
                }
                LogEvent::SteadyFollowing => {
                    expected = transition::<f64>(expected, &ArbiterEvent::SteadyFollowing).mode;
                }
                _ => {}
            }
        }
        assert_eq!(r.mode, expected, "unexplained mode at t={}", r.t);
        let changes = r.events.iter().filter(|e| matches!(e, LogEvent::ModeChange { .. })).count();
        assert_eq!(changes, usize::from(expected != mode));
        mode = expected;
    }
}

#[test]
fn generated_logs_only_change_mode_on_events() {
    for target in [TakeoverTarget::Shared, TakeoverTarget::Manual] {
        for d in [Disengagement::Ordinary, Disengagement::Urgent] {
            let (spec, trace) = canonical(target, d);
            for p in default_population::<f64>() {
                let log = run_drive(&spec, &mut SimulatedDriver(p), &ArbiterConfig::default(), &trace, 3).unwrap();
                check_mode_trace(&log);
                let tors = log.tor_events();
                assert!(!tors.is_empty());
                for r in &log.records {
                    assert_eq!(r.tor_flag, r.events.iter().any(|e| matches!(e, LogEvent::Tor { .. })));
                }
                let report = safety_report(&log, &MetricsConfig::default()).unwrap();
                assert_eq!(log.collided(), report.min_ttc == 0.0);
            }
        }
    }
}

#[test]
fn full_automation_replays_the_trace() {
    let (spec, trace) = canonical(TakeoverTarget::Shared, Disengagement::Urgent);
    let log = run_drive(&spec, &mut ZeroDriver, &ArbiterConfig::with_alpha(1.0), &trace, 0).unwrap();
    assert_eq!(log.records.len(), trace.len());
    let cfg = MatchConfig::default();
    let mut last = None;
    for (k, r) in log.records.iter().enumerate() {
        let (_, idx) = expert_input(&trace, &cfg, r.t, &r.ego, last);
        last = Some(idx);
        assert_eq!(idx, k);
        assert_eq!(r.u_applied, trace.samples()[idx].u);
    }
}

#[test]
fn replaying_driver_inputs_reproduces_the_log() {
    let (spec, trace) = canonical(TakeoverTarget::Shared, Disengagement::Ordinary);
    let cfg = ArbiterConfig::default();
    let mut p = DriverParams::with_rt("noisy", 1.0);
    p.noise_seed = 99;
    let log = run_drive(&spec, &mut SimulatedDriver(p), &cfg, &trace, 5).unwrap();
    let mut replay = ReplayDriver::new("noisy", log.driver_inputs());
    let again = run_drive(&spec, &mut replay, &cfg, &trace, 5).unwrap();
    assert_eq!(again, log);
    assert_eq!(again.to_jsonl_string(), log.to_jsonl_string());
}

#[test]
fn short_trace_is_rejected_before_the_drive() {
    let (spec, trace) = canonical(TakeoverTarget::Shared, Disengagement::Ordinary);
    let cut = ExpertTrace::new(trace.samples()[..100].to_vec(), trace.meta.clone()).unwrap();
    let err = check_trace_coverage(&spec, &cut).unwrap_err();
    assert!(matches!(err, ScenarioError::TraceTooShort { .. }));
    let err = run_drive(&spec, &mut ZeroDriver, &ArbiterConfig::default(), &Arc::new(cut), 0).unwrap_err();
    assert!(err.to_string().contains("does not cover"));
}

#[test]
fn requests_wait_for_automated_driving() {
    // the second request falls inside the first one's manual phase
    let (mut spec, trace) = canonical(TakeoverTarget::Manual, Disengagement::Ordinary);
    spec.tor_events[1].trigger_s = Some(spec.tor_events[0].trigger_s.unwrap() + 30.0);
    let log = run_drive(
        &spec,
        &mut SimulatedDriver(DriverParams::with_rt("d", 0.8)),
        &ArbiterConfig::default(),
        &trace,
        0,
    )
    .unwrap();
    check_mode_trace(&log);
    let deferred = log
        .records
        .iter()
        .flat_map(|r| &r.events)
        .filter(|e| matches!(e, LogEvent::TorDeferred { index: 1, .. }))
        .count();
    assert_eq!(deferred, 1);
    let tors = log.tor_events();
    assert_eq!(tors.len(), 2);
    assert!(tors[1].t_issued > tors[0].t_issued + 5.0);
}

#[test]
fn aborted_drive_keeps_its_prefix() {
    let (spec, trace) = canonical(TakeoverTarget::Shared, Disengagement::Ordinary);
    let model = takeover_core::expert::ExpertModel::new(trace, MatchConfig::default());
    let mut engine = Engine::new(spec, ArbiterConfig::default(), model, 0, "human").unwrap();
    for _ in 0..10 {
        engine.step(&mut ZeroDriver).unwrap();
    }
    engine.abort(Termination::Disconnect);
    assert!(engine.step(&mut ZeroDriver).unwrap().is_none());
    let log = engine.finish();
    assert_eq!(log.records.len(), 10);
    assert_eq!(log.meta.termination.name(), "disconnect");
}

#[test]
fn drives_are_deterministic() {
    let (spec, trace) = canonical(TakeoverTarget::Manual, Disengagement::Urgent);
    let mut p = DriverParams::with_rt("d", 0.8);
    p.noise_seed = 4;
    let a = run_drive(&spec, &mut SimulatedDriver(p.clone()), &ArbiterConfig::default(), &trace, 1).unwrap();
    let b = run_drive(&spec, &mut SimulatedDriver(p), &ArbiterConfig::default(), &trace, 1).unwrap();
    assert_eq!(a.to_jsonl_string(), b.to_jsonl_string());
}
