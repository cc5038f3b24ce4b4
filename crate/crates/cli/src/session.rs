//! Real-time session server for a human driver at the cockpit.
//!
//! The tick loop owns the simulation. A reader thread parses client lines
//! into a channel and a writer thread drains outgoing messages, so neither
//! direction of the socket can stall the loop.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use takeover_core::arbitrator::{ArbiterConfig, TorEvent};
use takeover_core::driver::Percept;
use takeover_core::dynamics::ControlInput;
use takeover_core::expert::{ExpertModel, ExpertTrace, MatchConfig};
use takeover_core::metrics::TlxRating;
use takeover_core::scenario::{check_trace_coverage, DriveLog, DriverSource, Engine, ScenarioSpec, Termination};

use crate::protocol::{encode, ClientMsg, ServerMsg, StateFrame};

/// The session aborts when the loop falls this many ticks behind the wall clock.
pub const MAX_LAG_TICKS: f64 = 5.0;

#[derive(Clone)]
pub struct SessionConfig {
    /// Scenario with the session's strategy and disengagement applied.
    pub spec: ScenarioSpec<f64>,
    pub arbiter: ArbiterConfig<f64>,
    pub trace: Arc<ExpertTrace<f64>>,
    pub seed: u64,
    /// Real-time factor; 0 runs unpaced.
    pub speedup: f64,
    pub out: PathBuf,
    /// How long to wait for the workload rating after the drive.
    pub tlx_timeout: Duration,
}

#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub session: u64,
    pub termination: Option<String>,
    pub log: Option<PathBuf>,
    pub tlx: Option<PathBuf>,
}

enum Inbound {
    Msg(ClientMsg),
    Bad(String),
    Closed,
}

/// Latest control frame received; held until replaced.
struct LiveDriver {
    latest: ControlInput<f64>,
}

impl DriverSource<f64> for LiveDriver {
    fn input(&mut self, _: usize, _: f64, _: Option<&TorEvent<f64>>, _: &Percept<f64>) -> ControlInput<f64> {
        self.latest
    }

    fn id(&self) -> &str {
        "human"
    }
}

fn spawn_reader(stream: TcpStream, tx: Sender<Inbound>) {
    thread::spawn(move || {
        for line in BufReader::new(stream).lines() {
            let Ok(line) = line else { break };
            if line.trim().is_empty() {
                continue;
            }
            let msg = match serde_json::from_str::<ClientMsg>(&line) {
                Ok(m) => Inbound::Msg(m),
                Err(e) => Inbound::Bad(format!("bad message: {e}")),
            };
            if tx.send(msg).is_err() {
                return;
            }
        }
        let _ = tx.send(Inbound::Closed);
    });
}

fn spawn_writer(stream: TcpStream) -> (Sender<ServerMsg>, thread::JoinHandle<()>) {
    let (tx, rx) = mpsc::channel::<ServerMsg>();
    let handle = thread::spawn(move || {
        let mut w = BufWriter::new(stream);
        while let Ok(msg) = rx.recv() {
            if w.write_all(encode(&msg).as_bytes()).is_err() {
                return;
            }
            // batch whatever is already queued into one flush
            let mut ok = true;
            while let Ok(more) = rx.try_recv() {
                ok &= w.write_all(encode(&more).as_bytes()).is_ok();
            }
            if !ok || w.flush().is_err() {
                return;
            }
        }
        let _ = w.flush();
    });
    (tx, handle)
}

fn unique_path(dir: &Path, stem: &str, ext: &str) -> PathBuf {
    let mut p = dir.join(format!("{stem}.{ext}"));
    let mut n = 1;
    while p.exists() {
        p = dir.join(format!("{stem}-{n}.{ext}"));
        n += 1;
    }
    p
}

fn persist(cfg: &SessionConfig, session: u64, log: &DriveLog<f64>, tlx: Option<&TlxRating<f64>>) -> Result<(PathBuf, Option<PathBuf>)> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let stem = format!(
        "session{session}_{}_{}_{}",
        cfg.spec.name,
        cfg.spec.strategy().map(|s| s.as_str()).unwrap_or("mixed").to_ascii_lowercase(),
        cfg.spec.disengagement().map(|d| d.as_str()).unwrap_or("mixed").to_ascii_lowercase()
    );
    let log_path = unique_path(&cfg.out, &stem, "jsonl");
    log.write_jsonl(BufWriter::new(std::fs::File::create(&log_path)?))?;
    let tlx_path = match tlx {
        Some(r) => {
            let p = log_path.with_extension("tlx.json");
            std::fs::write(&p, serde_json::to_string_pretty(r)? + "\n")?;
            Some(p)
        }
        None => None,
    };
    Ok((log_path, tlx_path))
}

/// Runs one session on an accepted connection until the drive is saved or
/// the client goes away.
pub fn run_session(stream: TcpStream, cfg: &SessionConfig, session: u64) -> Result<SessionOutcome> {
    stream.set_nodelay(true).ok();
    let (in_tx, in_rx) = mpsc::channel();
    spawn_reader(stream.try_clone()?, in_tx);
    let (out, writer) = spawn_writer(stream.try_clone()?);
    let result = drive_session(&in_rx, &out, cfg, session);
    drop(out);
    let _ = writer.join();
    let _ = stream.shutdown(Shutdown::Both);
    result
}

fn drive_session(inbox: &Receiver<Inbound>, out: &Sender<ServerMsg>, cfg: &SessionConfig, session: u64) -> Result<SessionOutcome> {
    let spec = &cfg.spec;
    let send = |m: ServerMsg| {
        let _ = out.send(m);
    };
    send(ServerMsg::Hello {
        session,
        scenario: spec.name.clone(),
        strategy: spec.strategy(),
        disengagement: spec.disengagement(),
        dt: spec.dt,
        ticks: spec.n_ticks(),
    });
    let mut outcome = SessionOutcome {
        session,
        termination: None,
        log: None,
        tlx: None,
    };

    let steer_max = spec.dynamics.steer_max;
    let mut driver = LiveDriver {
        latest: ControlInput::zero(),
    };
    let handle = |msg: Inbound, driver: &mut LiveDriver| -> Option<ClientMsg> {
        match msg {
            Inbound::Msg(ClientMsg::Control {
                throttle,
                brake,
                steering,
            }) => {
                let u = ControlInput::new(throttle, brake, steering);
                match u.validate(steer_max) {
                    Ok(()) => driver.latest = u,
                    Err(e) => send(ServerMsg::Error {
                        message: format!("control rejected: {e}"),
                    }),
                }
                None
            }
            Inbound::Msg(m) => Some(m),
            Inbound::Bad(e) => {
                send(ServerMsg::Error { message: e });
                None
            }
            Inbound::Closed => None,
        }
    };

    // wait for the cockpit to be ready
    loop {
        match inbox.recv() {
            Ok(Inbound::Closed) | Err(_) => return Ok(outcome),
            Ok(m) => {
                if let Some(ClientMsg::Ready) = handle(m, &mut driver) {
                    break;
                }
            }
        }
    }

    let model = ExpertModel::new(Arc::clone(&cfg.trace), MatchConfig::default());
    let mut engine = Engine::new(spec.clone(), cfg.arbiter, model, cfg.seed, "human")?;
    let period = if cfg.speedup > 0.0 {
        Some(Duration::from_secs_f64(spec.dt / cfg.speedup))
    } else {
        None
    };
    let start = Instant::now();
    let mut disconnected = false;
    let mut k: u32 = 0;
    while !engine.is_finished() {
        loop {
            match inbox.try_recv() {
                Ok(Inbound::Closed) | Err(TryRecvError::Disconnected) => {
                    disconnected = true;
                    break;
                }
                Ok(m) => {
                    handle(m, &mut driver);
                }
                Err(TryRecvError::Empty) => break,
            }
        }
        if disconnected {
            engine.abort(Termination::Disconnect);
            break;
        }
        if let Some(p) = period {
            let due = start + p * k;
            let now = Instant::now();
            if now > due + p.mul_f64(MAX_LAG_TICKS) {
                engine.abort(Termination::Overrun);
                send(ServerMsg::Error {
                    message: "overrun: simulation fell behind real time".into(),
                });
                break;
            }
            if due > now {
                thread::sleep(due - now);
            }
        }
        let tick = engine.tick_index();
        let Some(record) = engine.step(&mut driver)?.cloned() else { break };
        send(ServerMsg::State(StateFrame::new(tick, &record, engine.active_tor())));
        k += 1;
    }

    let log = engine.finish();
    let t_impact = match log.meta.termination {
        Termination::Collision { t_impact } => Some(t_impact),
        _ => None,
    };
    outcome.termination = Some(log.meta.termination.name().to_string());
    send(ServerMsg::End {
        termination: log.meta.termination.name().to_string(),
        t_impact,
        ticks: log.records.len(),
    });

    let mut rating = None;
    if !disconnected {
        send(ServerMsg::TlxRequest);
        let deadline = Instant::now() + cfg.tlx_timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match inbox.recv_timeout(left) {
                Ok(Inbound::Closed) | Err(RecvTimeoutError::Disconnected) | Err(RecvTimeoutError::Timeout) => break,
                Ok(m) => {
                    if let Some(ClientMsg::Tlx(s)) = handle(m, &mut driver) {
                        match TlxRating::from_scores(s.as_array()) {
                            Ok(r) => {
                                rating = Some(r);
                                break;
                            }
                            Err(e) => send(ServerMsg::Error { message: e.to_string() }),
                        }
                    }
                }
            }
        }
    }

    let (log_path, tlx_path) = persist(cfg, session, &log, rating.as_ref())?;
    send(ServerMsg::Saved {
        log: log_path.display().to_string(),
        tlx: tlx_path.as_ref().map(|p| p.display().to_string()),
    });
    outcome.log = Some(log_path);
    outcome.tlx = tlx_path;
    Ok(outcome)
}

fn refuse(mut stream: TcpStream) {
    let msg = encode(&ServerMsg::Error {
        message: "session busy".into(),
    });
    let _ = stream.write_all(msg.as_bytes());
    let _ = stream.flush();
    let _ = stream.shutdown(Shutdown::Both);
}

/// Accepts clients one at a time; anyone connecting during a session is
/// refused with `session busy`. Returns after `max_sessions` sessions have
/// finished (0 serves forever).
pub fn serve(listener: TcpListener, cfg: SessionConfig, max_sessions: usize) -> Result<Vec<SessionOutcome>> {
    check_trace_coverage(&cfg.spec, &cfg.trace)?;
    listener.set_nonblocking(true)?;
    let busy = Arc::new(AtomicBool::new(false));
    let (done_tx, done_rx) = mpsc::channel::<Result<SessionOutcome>>();
    let mut outcomes = Vec::new();
    let mut next_id = 1u64;
    loop {
        while let Ok(r) = done_rx.try_recv() {
            match r {
                Ok(o) => outcomes.push(o),
                Err(e) => eprintln!("session failed: {e:#}"),
            }
        }
        if max_sessions > 0 && outcomes.len() >= max_sessions {
            return Ok(outcomes);
        }
        match listener.accept() {
            Ok((stream, _)) => {
                stream.set_nonblocking(false)?;
                if busy.swap(true, Ordering::SeqCst) {
                    refuse(stream);
                    continue;
                }
                let id = next_id;
                next_id += 1;
                let (cfg, busy, done) = (cfg.clone(), Arc::clone(&busy), done_tx.clone());
                thread::spawn(move || {
                    let r = run_session(stream, &cfg, id);
                    busy.store(false, Ordering::SeqCst);
                    let _ = done.send(r);
                });
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(e) => return Err(e.into()),
        }
    }
}
