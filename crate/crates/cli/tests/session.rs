use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};
use takeover_core::arbitrator::{ArbiterConfig, Disengagement, TakeoverTarget};
use takeover_core::expert::{ControllerParams, ExpertTrace};
use takeover_core::metrics::MetricsConfig;
use takeover_core::scenario::{builtin_route, run_drive, synthesize_trace, ReplayDriver, ScenarioSpec, TorTrigger, ZeroDriver};
use takeover_sim::analyze::{analyze, read_log, read_tlx};
use takeover_sim::session::{serve, SessionConfig, SessionOutcome};

fn short_spec(target: TakeoverTarget) -> ScenarioSpec<f64> {
    let mut spec = builtin_route::<f64>("route-a").unwrap();
    spec.duration = 30.0;
    spec.tor_events = vec![TorTrigger::at_time(5.0, target, Disengagement::Urgent)];
    spec
}

fn trace_for(spec: &ScenarioSpec<f64>) -> Arc<ExpertTrace<f64>> {
    Arc::new(synthesize_trace(spec, ControllerParams::default()).unwrap())
}

fn config(spec: ScenarioSpec<f64>, out: &Path) -> SessionConfig {
    SessionConfig {
        trace: trace_for(&spec),
        spec,
        arbiter: ArbiterConfig::with_alpha(0.5),
        seed: 11,
        speedup: 0.0,
        out: out.to_path_buf(),
        tlx_timeout: Duration::from_secs(10),
    }
}

fn start(cfg: SessionConfig, sessions: usize) -> (String, thread::JoinHandle<Vec<SessionOutcome>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let h = thread::spawn(move || serve(listener, cfg, sessions).unwrap());
    (addr, h)
}

struct Client {
    w: TcpStream,
    r: BufReader<TcpStream>,
}

impl Client {
    fn connect(addr: &str) -> Self {
        let s = TcpStream::connect(addr).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(30))).unwrap();
        Self {
            w: s.try_clone().unwrap(),
            r: BufReader::new(s),
        }
    }

    fn send(&mut self, v: Value) {
        self.w.write_all(format!("{v}\n").as_bytes()).unwrap();
    }

    fn recv(&mut self) -> Option<Value> {
        let mut line = String::new();
        match self.r.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(serde_json::from_str(&line).unwrap()),
        }
    }
}

/// Brakes hard once a takeover request shows up; answers the rating form.
fn scripted_drive(addr: &str, brake_on_tor: bool) -> Vec<Value> {
    let mut c = Client::connect(addr);
    let mut seen = vec![];
    let hello = c.recv().unwrap();
    assert_eq!(hello["type"], "hello");
    c.send(json!({"type": "ready"}));
    let mut braking = false;
    while let Some(m) = c.recv() {
        match m["type"].as_str().unwrap() {
            "state" if brake_on_tor && !braking && m["tor"]["active"] == true => {
                braking = true;
                c.send(json!({"type": "control", "throttle": 0.0, "brake": 0.8, "steering": 0.0}));
            }
            "tlx_request" => c.send(json!({
                "type": "tlx", "mental": 60, "physical": 30, "temporal": 70,
                "performance": 20, "effort": 55, "frustration": 25
            })),
            "saved" => {
                seen.push(m);
                break;
            }
            _ => {}
        }
        seen.push(m);
    }
    seen
}

#[test]
fn human_session_is_saved_analysed_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(short_spec(TakeoverTarget::Manual), dir.path());
    // paced so that the scripted reaction lands before the gap closes
    cfg.speedup = 5.0;
    let (spec, trace, arbiter, seed) = (cfg.spec.clone(), Arc::clone(&cfg.trace), cfg.arbiter, cfg.seed);
    let (addr, server) = start(cfg, 1);
    let msgs = scripted_drive(&addr, true);
    let outcomes = server.join().unwrap();
    assert_eq!(outcomes.len(), 1);

    let states: Vec<&Value> = msgs.iter().filter(|m| m["type"] == "state").collect();
    assert_eq!(states.len(), spec.n_ticks());
    for (k, s) in states.iter().enumerate() {
        assert_eq!(s["tick"], k);
        assert!(s["hmi"].is_string() && s["mode"].is_string());
    }
    let tor = states.iter().find(|s| s["tor"]["active"] == true).expect("request displayed");
    assert_eq!(tor["tor"]["message"], "Autonomous driving ends. Please resume full control of the vehicle");
    let end = msgs.iter().find(|m| m["type"] == "end").unwrap();
    assert_eq!(end["termination"], "duration");

    let log_path = outcomes[0].log.clone().unwrap();
    let log = read_log(&log_path).unwrap();
    assert_eq!(log.meta.driver_id, "human");
    let tlx = read_tlx(&log_path).unwrap().expect("rating stored next to the log");
    assert!((tlx.overall - 260.0 / 6.0).abs() < 1e-9);

    // the recorded inputs drive the headless engine to the same log
    let mut replay = ReplayDriver::new("human", log.driver_inputs());
    let again = run_drive(&spec, &mut replay, &arbiter, &trace, seed).unwrap();
    assert_eq!(again.records, log.records);
    assert_eq!(again.meta, log.meta);

    let out = dir.path().join("analysis");
    std::fs::create_dir_all(&out).unwrap();
    let (rows, _) = analyze(dir.path(), &MetricsConfig::default(), &out).unwrap();
    assert_eq!(rows.len(), 1);
    let r = &rows[0].report;
    assert!(r.rt.is_some_and(|rt| rt > 0.0 && rt < 2.0), "{r:?}");
    assert!(r.min_ttc.is_finite() && r.min_ttc > 0.0);
    assert!(r.tet.is_finite() && r.tit.is_finite());
    assert!(!r.collision);
    assert!(rows[0].tlx_overall.is_some());
}

#[test]
fn silent_client_matches_a_zero_input_drive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(short_spec(TakeoverTarget::Shared), dir.path());
    let (spec, trace, arbiter, seed) = (cfg.spec.clone(), Arc::clone(&cfg.trace), cfg.arbiter, cfg.seed);
    let (addr, server) = start(cfg, 1);
    scripted_drive(&addr, false);
    let outcomes = server.join().unwrap();
    let log = read_log(outcomes[0].log.as_ref().unwrap()).unwrap();
    let mut zero = ZeroDriver;
    let headless = run_drive(&spec, &mut zero, &arbiter, &trace, seed).unwrap();
    assert_eq!(log.records, headless.records);
}

#[test]
fn second_client_is_refused_while_busy() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(short_spec(TakeoverTarget::Shared), dir.path());
    cfg.speedup = 1.0;
    let (addr, server) = start(cfg, 1);
    let mut first = Client::connect(&addr);
    assert_eq!(first.recv().unwrap()["type"], "hello");
    first.send(json!({"type": "ready"}));
    assert_eq!(first.recv().unwrap()["type"], "state");

    let mut second = Client::connect(&addr);
    let refusal = second.recv().unwrap();
    assert_eq!(refusal, json!({"type": "error", "message": "session busy"}));
    assert!(second.recv().is_none());

    drop(first);
    let outcomes = server.join().unwrap();
    assert_eq!(outcomes.len(), 1);
    assert_eq!(outcomes[0].termination.as_deref(), Some("disconnect"));
}

#[test]
fn disconnect_mid_drive_keeps_the_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(short_spec(TakeoverTarget::Shared), dir.path());
    cfg.speedup = 4.0;
    let (addr, server) = start(cfg, 1);
    let mut c = Client::connect(&addr);
    c.recv().unwrap();
    c.send(json!({"type": "ready"}));
    for _ in 0..10 {
        assert_eq!(c.recv().unwrap()["type"], "state");
    }
    drop(c);
    let outcomes = server.join().unwrap();
    assert!(outcomes[0].tlx.is_none());
    let log = read_log(outcomes[0].log.as_ref().unwrap()).unwrap();
    assert_eq!(log.meta.termination.name(), "disconnect");
    assert!(log.records.len() >= 10 && log.records.len() < 600);
}

#[test]
fn bad_frames_are_reported_and_ignored() {
    let dir = tempfile::tempdir().unwrap();
    let (addr, server) = start(config(short_spec(TakeoverTarget::Shared), dir.path()), 1);
    let mut c = Client::connect(&addr);
    c.recv().unwrap();
    c.send(json!({"type": "control", "throttle": 2.0, "brake": 0.0, "steering": 0.0}));
    c.w.write_all(b"not json\n").unwrap();
    let a = c.recv().unwrap();
    let b = c.recv().unwrap();
    assert_eq!(a["type"], "error");
    assert!(a["message"].as_str().unwrap().starts_with("control rejected"));
    assert_eq!(b["type"], "error");
    c.send(json!({"type": "ready"}));
    let mut ticks = 0;
    while let Some(m) = c.recv() {
        if m["type"] == "state" {
            ticks += 1;
        }
        if m["type"] == "end" {
            assert_eq!(m["ticks"], ticks);
        }
        if m["type"] == "tlx_request" {
            break;
        }
    }
    assert!(ticks > 100);
    drop(c);
    let outcomes = server.join().unwrap();
    assert!(outcomes[0].tlx.is_none());
    let log = read_log(outcomes[0].log.as_ref().unwrap()).unwrap();
    assert!(log.records.iter().all(|r| r.u_driver.throttle == 0.0));
}
