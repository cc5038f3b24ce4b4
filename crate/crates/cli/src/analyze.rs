//! Offline metrics over a directory of drive logs.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use takeover_core::metrics::{MetricsConfig, TlxRating};
use takeover_core::scenario::DriveLog;

use crate::report::{summarize, write_drive_report, write_groups_table, write_reports_table, write_summary, DriveKey, DriveRow, Summary};

/// Logs found directly in `dir`, or in its `logs/` subdirectory, sorted by name.
pub fn find_logs(dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = if dir.join("logs").is_dir() { dir.join("logs") } else { dir.to_path_buf() };
    let mut logs: Vec<PathBuf> = fs::read_dir(&dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    logs.sort();
    if logs.is_empty() {
        bail!("no .jsonl drive logs in {}", dir.display());
    }
    Ok(logs)
}

pub fn read_log(path: &Path) -> Result<DriveLog<f64>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    DriveLog::read_jsonl(BufReader::new(f)).with_context(|| format!("in {}", path.display()))
}

/// Path of the workload rating stored next to a log.
pub fn tlx_path(log: &Path) -> PathBuf {
    log.with_extension("tlx.json")
}

pub fn read_tlx(log: &Path) -> Result<Option<TlxRating<f64>>> {
    let p = tlx_path(log);
    if !p.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&p)?;
    let r: TlxRating<f64> = serde_json::from_str(&text).with_context(|| format!("in {}", p.display()))?;
    // recompute so a hand-edited overall cannot disagree with the scores
    Ok(Some(TlxRating::from_scores(r.scores())?))
}

fn rep_of(stem: &str) -> usize {
    stem.rsplit_once("_r").and_then(|(_, n)| n.parse().ok()).unwrap_or(0)
}

/// `label` is how the log is named in the reports.
fn analyze_labelled(path: &Path, label: String, cfg: &MetricsConfig<f64>) -> Result<DriveRow> {
    let log = read_log(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
    let key = DriveKey {
        driver_id: log.meta.driver_id.clone(),
        route: log.meta.route.clone(),
        strategy: log.meta.strategy,
        disengagement: log.meta.disengagement,
        rep: rep_of(&stem),
        seed: log.meta.seed,
        log: label,
    };
    let tlx = read_tlx(path)?.map(|r| r.overall);
    DriveRow::from_log(key, &log, cfg, tlx)
}

pub fn analyze_log(path: &Path, cfg: &MetricsConfig<f64>) -> Result<DriveRow> {
    analyze_labelled(path, file_name(path), cfg)
}

fn file_name(path: &Path) -> String {
    path.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string()
}

/// Recomputes reports and the summary for every log under `logs`, writing
/// `reports.csv`, `groups.csv`, `summary.json` and `reports/<log>.csv` to `out`.
pub fn analyze(logs: &Path, cfg: &MetricsConfig<f64>, out: &Path) -> Result<(Vec<DriveRow>, Summary)> {
    cfg.validate()?;
    let paths = find_logs(logs)?;
    let prefix = if logs.join("logs").is_dir() { "logs/" } else { "" };
    let rows = paths
        .iter()
        .map(|p| analyze_labelled(p, format!("{prefix}{}", file_name(p)), cfg))
        .collect::<Result<Vec<_>>>()?;
    let reports = out.join("reports");
    fs::create_dir_all(&reports).with_context(|| format!("creating {}", reports.display()))?;
    for (p, row) in paths.iter().zip(&rows) {
        let name = p.with_extension("csv");
        let name = name.file_name().expect("log has a file name");
        write_drive_report(row, BufWriter::new(fs::File::create(reports.join(name))?))?;
    }
    write_reports_table(&rows, BufWriter::new(fs::File::create(out.join("reports.csv"))?))?;
    let summary = summarize(&rows, cfg);
    write_groups_table(&summary.groups, BufWriter::new(fs::File::create(out.join("groups.csv"))?))?;
    write_summary(&summary, &out.join("summary.json"))?;
    Ok((rows, summary))
}
