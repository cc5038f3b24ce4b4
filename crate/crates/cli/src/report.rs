//! Report tables and the experiment summary.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use takeover_core::arbitrator::{Disengagement, TakeoverTarget};
use takeover_core::metrics::{
    event_report, safety_report, welch_t, Distribution, GroupAssignment, MetricsConfig, SafetyReport, WelchResult,
    SAFETY_REPORT_COLUMNS,
};
use takeover_core::scenario::DriveLog;

/// Identification of one drive in the reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriveKey {
    pub driver_id: String,
    pub route: String,
    pub strategy: Option<TakeoverTarget>,
    pub disengagement: Option<Disengagement>,
    pub rep: usize,
    pub seed: u64,
    pub log: String,
}

/// Report of one drive plus its per-request breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveRow {
    pub key: DriveKey,
    pub termination: String,
    pub report: SafetyReport<f64>,
    pub events: Vec<(f64, SafetyReport<f64>)>,
    pub tlx_overall: Option<f64>,
}

impl DriveRow {
    pub fn from_log(key: DriveKey, log: &DriveLog<f64>, cfg: &MetricsConfig<f64>, tlx_overall: Option<f64>) -> Result<Self> {
        let report = safety_report(log, cfg).with_context(|| format!("metrics for {}", key.log))?;
        let events = log
            .tor_events()
            .iter()
            .map(|e| Ok((e.t_issued, event_report(log, e, cfg)?)))
            .collect::<Result<Vec<_>, takeover_core::metrics::MetricsError>>()?;
        Ok(Self {
            key,
            termination: log.meta.termination.name().to_string(),
            report,
            events,
            tlx_overall,
        })
    }
}

const KEY_COLUMNS: [&str; 7] = ["driver_id", "route", "strategy", "disengagement", "rep", "seed", "log"];

fn key_fields(k: &DriveKey) -> Vec<String> {
    vec![
        k.driver_id.clone(),
        k.route.clone(),
        k.strategy.map(|s| s.to_string()).unwrap_or_default(),
        k.disengagement.map(|d| d.to_string()).unwrap_or_default(),
        k.rep.to_string(),
        k.seed.to_string(),
        k.log.clone(),
    ]
}

fn header(extra: &[&str]) -> Vec<String> {
    KEY_COLUMNS
        .iter()
        .chain(extra)
        .chain(SAFETY_REPORT_COLUMNS.iter())
        .map(|s| s.to_string())
        .collect()
}

/// Per-drive report: the drive-level row followed by one row per request.
pub fn write_drive_report<W: Write>(row: &DriveRow, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header(&["scope", "event", "t_issued", "termination"]))?;
    let mut rec = key_fields(&row.key);
    rec.extend(["drive".into(), String::new(), String::new(), row.termination.clone()]);
    rec.extend(row.report.csv_fields());
    wtr.write_record(&rec)?;
    for (i, (t, r)) in row.events.iter().enumerate() {
        let mut rec = key_fields(&row.key);
        rec.extend(["tor".into(), i.to_string(), t.to_string(), row.termination.clone()]);
        rec.extend(r.csv_fields());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Aggregate table: one drive-level row per drive.
pub fn write_reports_table<W: Write>(rows: &[DriveRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut h = header(&["termination", "n_tor"]);
    h.push("tlx_overall".into());
    wtr.write_record(&h)?;
    for row in rows {
        let mut rec = key_fields(&row.key);
        rec.push(row.termination.clone());
        rec.push(row.events.len().to_string());
        rec.extend(row.report.csv_fields());
        rec.push(row.tlx_overall.map(|x| x.to_string()).unwrap_or_default());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub const GROUP_COLUMNS: [&str; 4] = ["driver_id", "disengagement", "d_min_ttc", "group"];

pub fn write_groups_table<W: Write>(groups: &[GroupRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(GROUP_COLUMNS)?;
    for g in groups {
        wtr.write_record([
            g.assignment.driver_id.clone(),
            g.disengagement.to_string(),
            g.assignment.d_min_ttc.to_string(),
            g.assignment.group.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSummary {
    pub strategy: TakeoverTarget,
    pub disengagement: Disengagement,
    pub drives: usize,
    pub collisions: usize,
    pub min_ttc: Option<Distribution>,
    pub rt: Option<Distribution>,
    pub tet: Option<Distribution>,
    pub tit: Option<Distribution>,
    pub tlx_overall: Option<Distribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow {
    pub disengagement: Disengagement,
    #[serde(flatten)]
    pub assignment: GroupAssignment<f64>,
    /// rt(shared) − rt(manual), when both exist.
    pub rt_diff: Option<f64>,
    /// TLX overall (shared) − TLX overall (manual), when both were rated.
    pub workload_diff: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: Option<f64>,
}

fn mean_sd(x: &[f64]) -> Option<MeanSd> {
    if x.is_empty() {
        return None;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.len() > 1).then(|| (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    Some(MeanSd { mean, sd })
}

/// One column of the group-differences table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupTableEntry {
    pub group: u8,
    pub drivers: usize,
    pub rt_diff: Option<MeanSd>,
    pub workload_diff: Option<MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTest {
    pub disengagement: Disengagement,
    pub metric: String,
    /// Which samples are compared, e.g. `SHARED vs MANUAL` or `group 1 vs group 2`.
    pub compare: String,
    pub n_a: usize,
    pub n_b: usize,
    pub result: Option<WelchResult>,
    pub significant: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub drives: usize,
    pub ttc_threshold: f64,
    pub brake_eps: f64,
    pub window: f64,
    pub conditions: Vec<ConditionSummary>,
    pub groups: Vec<GroupRow>,
    pub group_table: BTreeMap<String, Vec<GroupTableEntry>>,
    pub t_tests: Vec<TTest>,
}

const SIGNIFICANCE: f64 = 0.05;

fn t_test(disengagement: Disengagement, metric: &str, compare: String, a: &[f64], b: &[f64]) -> TTest {
    let a: Vec<f64> = a.iter().copied().filter(|x| x.is_finite()).collect();
    let b: Vec<f64> = b.iter().copied().filter(|x| x.is_finite()).collect();
    let result = welch_t(&a, &b).ok();
    TTest {
        disengagement,
        metric: metric.into(),
        compare,
        n_a: a.len(),
        n_b: b.len(),
        significant: result.map(|r| r.p < SIGNIFICANCE),
        result,
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Per-driver means over routes and repetitions of one condition.
#[derive(Default)]
struct DriverCell {
    min_ttc: Vec<f64>,
    rt: Vec<f64>,
    tet: Vec<f64>,
    tit: Vec<f64>,
    tlx: Vec<f64>,
}

type CellKey = (Disengagement, TakeoverTarget);

pub fn summarize(rows: &[DriveRow], cfg: &MetricsConfig<f64>) -> Summary {
    let mut conditions = Vec::new();
    let mut per_driver: BTreeMap<CellKey, BTreeMap<String, DriverCell>> = BTreeMap::new();

    for d in [Disengagement::Ordinary, Disengagement::Urgent] {
        for s in [TakeoverTarget::Shared, TakeoverTarget::Manual] {
            let sel: Vec<&DriveRow> = rows
                .iter()
                .filter(|r| r.key.strategy == Some(s) && r.key.disengagement == Some(d))
                .collect();
            if sel.is_empty() {
                continue;
            }
            let pick = |f: &dyn Fn(&DriveRow) -> Option<f64>| -> Vec<f64> { sel.iter().filter_map(|r| f(r)).collect() };
            conditions.push(ConditionSummary {
                strategy: s,
                disengagement: d,
                drives: sel.len(),
                collisions: sel.iter().filter(|r| r.report.collision).count(),
                min_ttc: Distribution::of(&pick(&|r| Some(r.report.min_ttc))),
                rt: Distribution::of(&pick(&|r| r.report.rt)),
                tet: Distribution::of(&pick(&|r| Some(r.report.tet))),
                tit: Distribution::of(&pick(&|r| Some(r.report.tit))),
                tlx_overall: Distribution::of(&pick(&|r| r.tlx_overall)),
            });
            let cells = per_driver.entry((d, s)).or_default();
            for r in sel {
                let c = cells.entry(r.key.driver_id.clone()).or_default();
                c.min_ttc.push(r.report.min_ttc);
                c.rt.extend(r.report.rt);
                c.tet.push(r.report.tet);
                c.tit.push(r.report.tit);
                c.tlx.extend(r.tlx_overall);
            }
        }
    }

    let mut groups = Vec::new();
    let mut t_tests = Vec::new();
    let mut group_table = BTreeMap::new();
    let empty = BTreeMap::new();
    for d in [Disengagement::Ordinary, Disengagement::Urgent] {
        let shared = per_driver.get(&(d, TakeoverTarget::Shared)).unwrap_or(&empty);
        let manual = per_driver.get(&(d, TakeoverTarget::Manual)).unwrap_or(&empty);
        if shared.is_empty() || manual.is_empty() {
            continue;
        }
        type Metric = fn(&DriverCell) -> &Vec<f64>;
        let metrics: [(&str, Metric); 4] = [
            ("min_ttc", |c| &c.min_ttc),
            ("rt", |c| &c.rt),
            ("tet", |c| &c.tet),
            ("tit", |c| &c.tit),
        ];
        for (name, f) in metrics {
            let a: Vec<f64> = shared.values().filter(|c| !f(c).is_empty()).map(|c| mean(f(c))).collect();
            let b: Vec<f64> = manual.values().filter(|c| !f(c).is_empty()).map(|c| mean(f(c))).collect();
            t_tests.push(t_test(d, name, "SHARED vs MANUAL".into(), &a, &b));
        }

        let mut these = Vec::new();
        for (id, sc) in shared {
            let Some(mc) = manual.get(id) else { continue };
            let diff = mean(&sc.min_ttc) - mean(&mc.min_ttc);
            if diff.is_nan() {
                continue;
            }
            let both = |f: fn(&DriverCell) -> &Vec<f64>| {
                (!f(sc).is_empty() && !f(mc).is_empty()).then(|| mean(f(sc)) - mean(f(mc)))
            };
            these.push(GroupRow {
                disengagement: d,
                assignment: GroupAssignment::new(id.clone(), diff),
                rt_diff: both(|c| &c.rt),
                workload_diff: both(|c| &c.tlx),
            });
        }

        let column = |g: u8, f: fn(&GroupRow) -> Option<f64>| -> Vec<f64> {
            these.iter().filter(|r| r.assignment.group == g).filter_map(f).collect()
        };
        let table: Vec<GroupTableEntry> = (1..=3)
            .map(|g| GroupTableEntry {
                group: g,
                drivers: these.iter().filter(|r| r.assignment.group == g).count(),
                rt_diff: mean_sd(&column(g, |r| r.rt_diff)),
                workload_diff: mean_sd(&column(g, |r| r.workload_diff)),
            })
            .collect();
        group_table.insert(d.to_string(), table);
        for (ga, gb) in [(1u8, 2u8), (2, 3)] {
            for (name, f) in [
                ("rt_diff", (|r: &GroupRow| r.rt_diff) as fn(&GroupRow) -> Option<f64>),
                ("workload_diff", |r: &GroupRow| r.workload_diff),
            ] {
                t_tests.push(t_test(d, name, format!("group {ga} vs group {gb}"), &column(ga, f), &column(gb, f)));
            }
        }
        groups.extend(these);
    }

    Summary {
        drives: rows.len(),
        ttc_threshold: cfg.theta,
        brake_eps: cfg.eps,
        window: cfg.window,
        conditions,
        groups,
        group_table,
        t_tests,
    }
}

/// Writes `summary` as pretty JSON; non-finite numbers become `null`.
pub fn write_summary(summary: &Summary, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
