use std::io::Write;
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use takeover_core::arbitrator::{ArbiterConfig, Disengagement, TakeoverTarget};
use takeover_core::expert::ControllerParams;
use takeover_core::metrics::MetricsConfig;
use takeover_core::scenario::synthesize_trace;
use takeover_sim::config::{data_dir, load_route, load_trace_file, trace_file_name, ExperimentConfig};
use takeover_sim::session::{serve, SessionConfig};
use takeover_sim::{analyze, experiment};

#[derive(Parser)]
#[command(name = "takeover-sim", version, about = "Shared-control takeover simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a headless experiment from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Serve live drives to a cockpit client.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "route-a")]
        scenario: String,
        #[arg(long, default_value = "SHARED")]
        strategy: TakeoverTarget,
        #[arg(long, default_value = "ORDINARY")]
        disengagement: Disengagement,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Real-time factor; 0 runs as fast as possible.
        #[arg(long, default_value_t = 1.0)]
        speedup: f64,
        /// Stop after this many sessions (0 = never).
        #[arg(long, default_value_t = 0)]
        sessions: usize,
        /// Where session logs go (default: <data>/sessions).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Expert trace CSV (default: <data>/traces/<route>-<disengagement>.csv).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seconds to wait for the workload rating after a drive.
        #[arg(long, default_value_t = 600.0)]
        tlx_timeout: f64,
    },
    /// Compute safety reports and the summary for a directory of logs.
    Analyze {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        window: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Record synthetic expert traces for a route.
    GenTrace {
        #[arg(long, default_value = "route-a")]
        route: String,
        /// One disengagement type; both when omitted.
        #[arg(long)]
        disengagement: Option<Disengagement>,
        /// Output directory (default: <data>/traces).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Run {
            config,
            seed,
            out,
            threads,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
            }
            let res = experiment::run_experiment(&cfg)?;
            println!(
                "{} drives, {} reports, summary in {}",
                res.logs.len(),
                res.reports.len(),
                res.out.join("summary.json").display()
            );
        }
        Cmd::Serve {
            port,
            host,
            scenario,
            strategy,
            disengagement,
            alpha,
            speedup,
            sessions,
            out,
            trace,
            seed,
            tlx_timeout,
        } => {
            let route = load_route(&scenario)?;
            let trace_path = trace.unwrap_or_else(|| data_dir().join("traces").join(trace_file_name(&route.name, disengagement)));
            let trace = load_trace_file(&trace_path).context("run `takeover-sim gen-trace` to record one")?;
            let arbiter = ArbiterConfig::with_alpha(alpha);
            arbiter.validate().map_err(anyhow::Error::msg)?;
            let cfg = SessionConfig {
                spec: route.with_condition(strategy, disengagement),
                arbiter,
                trace: Arc::new(trace),
                seed,
                speedup,
                out: out.unwrap_or_else(|| data_dir().join("sessions")),
                tlx_timeout: Duration::from_secs_f64(tlx_timeout),
            };
            let listener = TcpListener::bind((host.as_str(), port)).with_context(|| format!("binding {host}:{port}"))?;
            println!("listening on {}", listener.local_addr()?);
            std::io::stdout().flush()?;
            for o in serve(listener, cfg, sessions)? {
                match &o.log {
                    Some(p) => println!("session {} saved {}", o.session, p.display()),
                    None => println!("session {} ended before the drive started", o.session),
                }
            }
        }
        Cmd::Analyze {
            logs,
            theta,
            eps,
            window,
            out,
        } => {
            let d = MetricsConfig::<f64>::default();
            let cfg = MetricsConfig {
                theta: theta.unwrap_or(d.theta),
                eps: eps.unwrap_or(d.eps),
                window: window.unwrap_or(d.window),
            };
            std::fs::create_dir_all(&out)?;
            let (rows, _) = analyze::analyze(&logs, &cfg, &out)?;
            println!("{} logs analysed, reports in {}", rows.len(), out.display());
        }
        Cmd::GenTrace {
            route,
            disengagement,
            out,
        } => {
            let spec = load_route(&route)?;
            let dir = out.unwrap_or_else(|| data_dir().join("traces"));
            std::fs::create_dir_all(&dir)?;
            let kinds = match disengagement {
                Some(d) => vec![d],
                None => vec![Disengagement::Ordinary, Disengagement::Urgent],
            };
            for d in kinds {
                let recording = spec.with_condition(TakeoverTarget::Shared, d);
                let trace = synthesize_trace(&recording, ControllerParams::default())?;
                let path = dir.join(trace_file_name(&spec.name, d));
                trace.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
                println!("{} samples -> {}", trace.len(), path.display());
            }
        }
    }
    Ok(())
}
