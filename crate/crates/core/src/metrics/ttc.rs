use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::dynamics::gap;
use crate::scalar::Real;
use crate::scenario::DriveLog;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtcSample<T> {
    pub t: T,
    pub ttc: T,
}

/// Time to collision for one gap/speed pair.
///
/// `gap / (v_ego - v_lead)` while closing, 0 once the gap is gone and
/// infinite while the gap holds or opens.
pub fn ttc<T: Real>(gap: T, v_ego: T, v_lead: T) -> T {
    if gap <= T::zero() {
        T::zero()
    } else if v_ego > v_lead {
        gap / (v_ego - v_lead)
    } else {
        T::infinity()
    }
}

/// Per-tick TTC to the lead. Ticks where the lead is in another lane are infinite.
pub fn ttc_series<T: Real>(log: &DriveLog<T>) -> Vec<TtcSample<T>> {
    log.records
        .iter()
        .map(|r| TtcSample {
            t: r.t,
            ttc: gap(&r.ego, &r.lead).map_or(T::infinity(), |g| ttc(g, r.ego.v, r.lead.v)),
        })
        .collect()
}

/// Samples with `t0 <= t <= t0 + w`. A relative tolerance absorbs
/// rounding in tick times.
pub fn window<T: Real>(series: &[TtcSample<T>], t0: T, w: T) -> &[TtcSample<T>] {
    let tol = T::of(1e-9) * (T::one() + t0.abs() + w.abs());
    let lo = series.partition_point(|x| x.t < t0 - tol);
    let hi = series.partition_point(|x| x.t <= t0 + w + tol);
    &series[lo..hi.max(lo)]
}

/// Smallest TTC in the window `[t0, t0 + w]`; infinite if it never closes.
pub fn min_ttc<T: Real>(series: &[TtcSample<T>], t0: T, w: T) -> Result<T, MetricsError> {
    let win = window(series, t0, w);
    if win.is_empty() {
        return Err(MetricsError::EmptyWindow { t0: t0.as_f64(), w: w.as_f64() });
    }
    Ok(win.iter().map(|x| x.ttc).fold(T::infinity(), T::min))
}

fn check_theta<T: Real>(theta: T) -> Result<(), MetricsError> {
    if theta.is_finite() && theta > T::zero() {
        Ok(())
    } else {
        Err(MetricsError::Theta(theta.as_f64()))
    }
}

/// Time below `theta` and area under `theta` on one segment where TTC runs
/// linearly from `a` to `b` over `h` seconds.
fn linear_segment<T: Real>(a: T, b: T, h: T, theta: T) -> (T, T) {
    let half = T::of(0.5);
    if a >= theta && b >= theta {
        return (T::zero(), T::zero());
    }
    if a < theta && b < theta {
        return (h, h * (theta - half * (a + b)));
    }
    // one crossing: the part below theta is a triangle
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let dur = h * (theta - lo) / (hi - lo);
    (dur, half * dur * (theta - lo))
}

fn exposure<T: Real>(series: &[TtcSample<T>], theta: T) -> Result<(T, T), MetricsError> {
    check_theta(theta)?;
    let half = T::of(0.5);
    let mut tet = T::zero();
    let mut tit = T::zero();
    for w in series.windows(2) {
        let (a, b) = (w[0].ttc, w[1].ttc);
        let h = w[1].t - w[0].t;
        let (d, area) = match (a.is_finite(), b.is_finite()) {
            (true, true) => linear_segment(a, b, h, theta),
            (false, false) => (T::zero(), T::zero()),
            // an infinite end switches at the midpoint
            (true, false) | (false, true) => {
                let y = if a.is_finite() { a } else { b };
                if y < theta {
                    (half * h, half * h * (theta - y))
                } else {
                    (T::zero(), T::zero())
                }
            }
        };
        tet = tet + d;
        tit = tit + area;
    }
    Ok((tet, tit))
}

/// Time exposed below `theta`, integrating the linear interpolant of the
/// series exactly (crossings are located between ticks).
pub fn tet<T: Real>(series: &[TtcSample<T>], theta: T) -> Result<T, MetricsError> {
    exposure(series, theta).map(|(d, _)| d)
}

/// Time-integrated `theta - ttc` over the part of the series below `theta`,
/// with the same interpolation as [`tet`].
pub fn tit<T: Real>(series: &[TtcSample<T>], theta: T) -> Result<T, MetricsError> {
    exposure(series, theta).map(|(_, a)| a)
}

/// Rectangle-rule TET: `dt` for every tick with `ttc < theta`.
pub fn tet_rect<T: Real>(series: &[TtcSample<T>], theta: T, dt: T) -> Result<T, MetricsError> {
    check_theta(theta)?;
    Ok(series
        .iter()
        .filter(|x| x.ttc < theta)
        .map(|_| dt)
        .fold(T::zero(), |a, b| a + b))
}

/// Rectangle-rule TIT: `dt * (theta - ttc)` for every tick with `ttc < theta`.
pub fn tit_rect<T: Real>(series: &[TtcSample<T>], theta: T, dt: T) -> Result<T, MetricsError> {
    check_theta(theta)?;
    Ok(series
        .iter()
        .filter(|x| x.ttc < theta)
        .map(|x| dt * (theta - x.ttc))
        .fold(T::zero(), |a, b| a + b))
}
