//! Headless batch runs over the condition cross-product.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use takeover_core::arbitrator::{ArbiterConfig, Disengagement, TakeoverTarget};
use takeover_core::driver::DriverParams;
use takeover_core::expert::{ControllerParams, ExpertTrace};
use takeover_core::scenario::{counterbalance, run_drive, synthesize_trace, OrderGroup, ScenarioSpec, SimulatedDriver};

use crate::config::{load_route, load_trace_file, trace_file_name, ExperimentConfig};
use crate::report::{summarize, write_drive_report, write_groups_table, write_reports_table, write_summary, DriveKey, DriveRow, Summary};

/// One drive of the experiment plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedDrive {
    pub driver: usize,
    pub route: usize,
    pub strategy: TakeoverTarget,
    pub disengagement: Disengagement,
    pub rep: usize,
    /// Position in the driver's counterbalanced order.
    pub order: usize,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub out: PathBuf,
    pub logs: Vec<PathBuf>,
    pub reports: Vec<PathBuf>,
    pub rows: Vec<DriveRow>,
    pub summary: Summary,
}

/// Seed of one drive, a hash of the experiment seed and the drive's identity.
pub fn drive_seed(seed: u64, driver: &str, route: &str, strategy: TakeoverTarget, d: Disengagement, rep: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in [driver, route, strategy.as_str(), d.as_str()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    h.update((rep as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Every drive, grouped per driver in counterbalanced order. Drivers in the
/// first half of the list take the cells in order, the rest in reverse.
pub fn plan(cfg: &ExperimentConfig, n_drivers: usize) -> Vec<PlannedDrive> {
    let mut cells = Vec::new();
    for route in 0..cfg.routes.len() {
        for &strategy in &cfg.strategies {
            for &disengagement in &cfg.disengagements {
                for rep in 0..cfg.repetitions {
                    cells.push((route, strategy, disengagement, rep));
                }
            }
        }
    }
    let mut out = Vec::with_capacity(cells.len() * n_drivers);
    for driver in 0..n_drivers {
        let group = if driver < n_drivers.div_ceil(2) {
            OrderGroup::First
        } else {
            OrderGroup::Second
        };
        for (order, (route, strategy, disengagement, rep)) in counterbalance(&cells, group).into_iter().enumerate() {
            out.push(PlannedDrive {
                driver,
                route,
                strategy,
                disengagement,
                rep,
                order,
            });
        }
    }
    out
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// File stem shared by a drive's log and report.
pub fn drive_stem(driver: &str, route: &str, s: TakeoverTarget, d: Disengagement, rep: usize) -> String {
    format!(
        "{}_{}_{}_{}_r{rep}",
        sanitize(driver),
        sanitize(route),
        s.as_str().to_ascii_lowercase(),
        d.as_str().to_ascii_lowercase()
    )
}

fn load_traces(
    cfg: &ExperimentConfig,
    routes: &[ScenarioSpec<f64>],
) -> Result<BTreeMap<(usize, Disengagement), Arc<ExpertTrace<f64>>>> {
    let dir = cfg.trace_dir();
    let mut out = BTreeMap::new();
    for (i, spec) in routes.iter().enumerate() {
        for &d in &cfg.disengagements {
            let path = dir.join(trace_file_name(&spec.name, d));
            let trace = if path.is_file() || !cfg.synthesize_traces {
                load_trace_file(&path)?
            } else {
                let recording = spec.with_condition(TakeoverTarget::Shared, d);
                synthesize_trace(&recording, ControllerParams::default())
                    .with_context(|| format!("recording expert trace for {}", spec.name))?
            };
            out.insert((i, d), Arc::new(trace));
        }
    }
    Ok(out)
}

/// Outputs created by a run, removed again if it fails.
struct Outputs {
    dirs: Vec<PathBuf>,
    files: Vec<PathBuf>,
    created_root: Option<PathBuf>,
}

impl Outputs {
    fn cleanup(&self) {
        if let Some(root) = &self.created_root {
            let _ = fs::remove_dir_all(root);
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in &self.dirs {
            let _ = fs::remove_dir_all(d);
        }
    }
}

/// Runs the whole experiment and writes logs, reports and the summary under `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let drivers = cfg.drivers.resolve()?;
    let routes = cfg.routes.iter().map(|r| load_route(r)).collect::<Result<Vec<_>>>()?;
    let traces = load_traces(cfg, &routes)?;

    let out = cfg.out.clone();
    let outputs = Outputs {
        dirs: vec![out.join("logs"), out.join("reports")],
        files: ["reports.csv", "groups.csv", "summary.json"].iter().map(|f| out.join(f)).collect(),
        created_root: (!out.exists()).then(|| out.clone()),
    };
    let result = execute(cfg, &drivers, &routes, &traces, &out);
    if result.is_err() {
        outputs.cleanup();
    }
    result
}

fn execute(
    cfg: &ExperimentConfig,
    drivers: &[DriverParams<f64>],
    routes: &[ScenarioSpec<f64>],
    traces: &BTreeMap<(usize, Disengagement), Arc<ExpertTrace<f64>>>,
    out: &Path,
) -> Result<ExperimentOutput> {
    let logs_dir = out.join("logs");
    let reports_dir = out.join("reports");
    fs::create_dir_all(&logs_dir).with_context(|| format!("creating {}", logs_dir.display()))?;
    fs::create_dir_all(&reports_dir)?;
    let arbiter = ArbiterConfig::with_alpha(cfg.alpha);

    let drives = plan(cfg, drivers.len());
    let mut rows: Vec<(PathBuf, PathBuf, DriveRow)> = drives
        .par_iter()
        .map(|p| -> Result<_> {
            let route = &routes[p.route];
            let spec = route.with_condition(p.strategy, p.disengagement);
            let mut params = drivers[p.driver].clone();
            let seed = drive_seed(cfg.seed, &params.id, &route.name, p.strategy, p.disengagement, p.rep);
            if cfg.driver_noise {
                params.noise_seed = seed | 1;
            }
            let stem = drive_stem(&params.id, &route.name, p.strategy, p.disengagement, p.rep);
            let trace = &traces[&(p.route, p.disengagement)];
            let log = run_drive(&spec, &mut SimulatedDriver(params.clone()), &arbiter, trace, seed)
                .with_context(|| format!("drive {stem}"))?;

            let log_path = logs_dir.join(format!("{stem}.jsonl"));
            let f = fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
            log.write_jsonl(BufWriter::new(f))?;

            let key = DriveKey {
                driver_id: params.id.clone(),
                route: route.name.clone(),
                strategy: Some(p.strategy),
                disengagement: Some(p.disengagement),
                rep: p.rep,
                seed,
                log: format!("logs/{stem}.jsonl"),
            };
            let row = DriveRow::from_log(key, &log, &cfg.metrics, None)?;
            let report_path = reports_dir.join(format!("{stem}.csv"));
            write_drive_report(&row, BufWriter::new(fs::File::create(&report_path)?))?;
            Ok((log_path, report_path, row))
        })
        .collect::<Result<_>>()?;
    // same row order as `analyze` over the written logs
    rows.sort_by(|a, b| a.0.cmp(&b.0));

    let mut logs = Vec::with_capacity(rows.len());
    let mut reports = Vec::with_capacity(rows.len());
    let mut table = Vec::with_capacity(rows.len());
    for (l, r, row) in rows {
        logs.push(l);
        reports.push(r);
        table.push(row);
    }
    write_reports_table(&table, BufWriter::new(fs::File::create(out.join("reports.csv"))?))?;
    let summary = summarize(&table, &cfg.metrics);
    write_groups_table(&summary.groups, BufWriter::new(fs::File::create(out.join("groups.csv"))?))?;
    write_summary(&summary, &out.join("summary.json"))?;
    Ok(ExperimentOutput {
        out: out.to_path_buf(),
        logs,
        reports,
        rows: table,
        summary,
    })
}
