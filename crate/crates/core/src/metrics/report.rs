use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ttc::{min_ttc, tet, tit, ttc_series, window, TtcSample};
use super::{MetricsConfig, MetricsError};
use crate::arbitrator::TorEvent;
use crate::scalar::Real;
use crate::scenario::DriveLog;

/// First brake press above `eps` at or after `t_issued`, relative to it.
/// Presses before the request are ignored; `None` if nothing happens by
/// `t_issued + w`.
pub fn reaction_time_in<T: Real>(brake: &[(T, T)], t_issued: T, eps: T, w: T) -> Option<T> {
    let tol = T::of(1e-9) * (T::one() + t_issued.abs() + w.abs());
    brake
        .iter()
        .find(|&&(t, b)| t + tol >= t_issued && t <= t_issued + w + tol && b > eps)
        .map(|&(t, _)| (t - t_issued).max(T::zero()))
}

fn check_tor<T: Real>(log: &DriveLog<T>, tor: &TorEvent<T>) -> Result<(), MetricsError> {
    if log.tor_events().iter().any(|e| e == tor) {
        Ok(())
    } else {
        Err(MetricsError::TorNotInLog(tor.t_issued.as_f64()))
    }
}

/// Driver brake reaction time to `tor`, which must be one of the log's requests.
pub fn reaction_time<T: Real>(log: &DriveLog<T>, tor: &TorEvent<T>, cfg: &MetricsConfig<T>) -> Result<Option<T>, MetricsError> {
    check_tor(log, tor)?;
    let brake: Vec<(T, T)> = log.records.iter().map(|r| (r.t, r.u_driver.brake)).collect();
    Ok(reaction_time_in(&brake, tor.t_issued, cfg.eps, cfg.window))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport<T> {
    pub rt: Option<T>,
    pub min_ttc: T,
    pub tet: T,
    pub tit: T,
    pub collision: bool,
    pub ttc_threshold_used: T,
}

/// Column names of [`SafetyReport::csv_fields`].
pub const SAFETY_REPORT_COLUMNS: [&str; 6] = ["rt", "min_ttc", "tet", "tit", "collision", "ttc_threshold_used"];

impl<T: Real> SafetyReport<T> {
    /// CSV cells in [`SAFETY_REPORT_COLUMNS`] order. An absent reaction
    /// time is an empty cell; infinite TTC is written as `inf`.
    pub fn csv_fields(&self) -> [String; 6] {
        [
            self.rt.map(|x| x.to_string()).unwrap_or_default(),
            self.min_ttc.to_string(),
            self.tet.to_string(),
            self.tit.to_string(),
            self.collision.to_string(),
            self.ttc_threshold_used.to_string(),
        ]
    }

    pub fn from_csv_fields(f: &[&str]) -> Result<Self, MetricsError> {
        if f.len() != SAFETY_REPORT_COLUMNS.len() {
            return Err(MetricsError::Parse(format!("expected 6 report fields, got {}", f.len())));
        }
        let num = |k: usize| {
            f[k].parse::<T>()
                .map_err(|_| MetricsError::Parse(format!("bad {}: {:?}", SAFETY_REPORT_COLUMNS[k], f[k])))
        };
        Ok(Self {
            rt: if f[0].is_empty() { None } else { Some(num(0)?) },
            min_ttc: num(1)?,
            tet: num(2)?,
            tit: num(3)?,
            collision: f[4]
                .parse()
                .map_err(|_| MetricsError::Parse(format!("bad collision: {:?}", f[4])))?,
            ttc_threshold_used: num(5)?,
        })
    }
}

/// Writes reports as CSV with the [`SAFETY_REPORT_COLUMNS`] header.
pub fn write_reports_csv<T: Real, W: Write>(reports: &[SafetyReport<T>], w: W) -> Result<(), MetricsError> {
    let mut wtr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| MetricsError::Parse(e.to_string());
    wtr.write_record(SAFETY_REPORT_COLUMNS).map_err(err)?;
    for r in reports {
        wtr.write_record(r.csv_fields()).map_err(err)?;
    }
    wtr.flush().map_err(|e| MetricsError::Parse(e.to_string()))
}

fn window_report<T: Real>(
    series: &[TtcSample<T>],
    t0: T,
    rt: Option<T>,
    collision: bool,
    cfg: &MetricsConfig<T>,
) -> Result<SafetyReport<T>, MetricsError> {
    let win = window(series, t0, cfg.window);
    let mut m = min_ttc(series, t0, cfg.window)?;
    if collision {
        m = T::zero();
    }
    Ok(SafetyReport {
        rt,
        min_ttc: m,
        tet: tet(win, cfg.theta)?,
        tit: tit(win, cfg.theta)?,
        collision,
        ttc_threshold_used: cfg.theta,
    })
}

/// Safety measures over the evaluation window of one request. `collision`
/// is set when the drive ended in a collision inside that window.
pub fn event_report<T: Real>(log: &DriveLog<T>, tor: &TorEvent<T>, cfg: &MetricsConfig<T>) -> Result<SafetyReport<T>, MetricsError> {
    cfg.validate()?;
    let rt = reaction_time(log, tor, cfg)?;
    let series = ttc_series(log);
    let collided_here = log.collided()
        && log
            .records
            .last()
            .is_some_and(|r| r.t <= tor.t_issued + cfg.window + cfg.window * T::of(1e-9));
    window_report(&series, tor.t_issued, rt, collided_here, cfg)
}

/// Drive-level report: the first request's reaction time, the smallest
/// minTTC over all request windows, and TET/TIT summed over them.
///
/// A drive without requests is evaluated over the whole log. A collision
/// anywhere forces `min_ttc = 0`.
pub fn safety_report<T: Real>(log: &DriveLog<T>, cfg: &MetricsConfig<T>) -> Result<SafetyReport<T>, MetricsError> {
    cfg.validate()?;
    let series = ttc_series(log);
    let collision = log.collided();
    let tors = log.tor_events();
    if tors.is_empty() {
        let first = series.first().ok_or(MetricsError::EmptyWindow { t0: 0.0, w: 0.0 })?;
        let last = series[series.len() - 1].t;
        let whole = MetricsConfig {
            window: last - first.t,
            ..*cfg
        };
        return window_report(&series, first.t, None, collision, &whole);
    }
    let mut out = SafetyReport {
        rt: None,
        min_ttc: T::infinity(),
        tet: T::zero(),
        tit: T::zero(),
        collision,
        ttc_threshold_used: cfg.theta,
    };
    for (i, tor) in tors.iter().enumerate() {
        let r = event_report(log, tor, cfg)?;
        if i == 0 {
            out.rt = r.rt;
        }
        out.min_ttc = out.min_ttc.min(r.min_ttc);
        out.tet = out.tet + r.tet;
        out.tit = out.tit + r.tit;
    }
    if collision {
        out.min_ttc = T::zero();
    }
    Ok(out)
}
