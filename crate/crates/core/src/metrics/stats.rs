use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::MetricsError;
use crate::scalar::Real;

/// Half-width of the middle band of the minTTC-difference grouping (s).
pub const GROUP_THRESHOLD: f64 = 0.2;

/// Group of a driver by `d = minTTC(shared) - minTTC(manual)`:
/// 1 below -0.2 s, 3 above 0.2 s, 2 in between (bounds included).
pub fn group_assign<T: Real>(d: T) -> u8 {
    let th = T::of(GROUP_THRESHOLD);
    if d < -th {
        1
    } else if d > th {
        3
    } else {
        2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment<T> {
    pub driver_id: String,
    pub d_min_ttc: T,
    pub group: u8,
}

impl<T: Real> GroupAssignment<T> {
    pub fn new(driver_id: impl Into<String>, d_min_ttc: T) -> Self {
        Self {
            driver_id: driver_id.into(),
            d_min_ttc,
            group: group_assign(d_min_ttc),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Welch's two-sample t-test with Welch–Satterthwaite degrees of freedom and
/// a two-sided p-value.
///
/// When both samples have zero variance the statistic degenerates: equal
/// means give `t = 0, p = 1`, different means give `t = ±inf, p = 0`.
pub fn welch_t<T: Real>(a: &[T], b: &[T]) -> Result<WelchResult, MetricsError> {
    for (name, s) in [("a", a), ("b", b)] {
        if s.len() < 2 {
            return Err(MetricsError::Sample(format!("sample {name} needs at least 2 values")));
        }
        if !s.iter().all(|x| x.is_finite()) {
            return Err(MetricsError::Sample(format!("sample {name} has non-finite values")));
        }
    }
    let a: Vec<f64> = a.iter().map(|x| x.as_f64()).collect();
    let b: Vec<f64> = b.iter().map(|x| x.as_f64()).collect();
    let (ma, va) = mean_var(&a);
    let (mb, vb) = mean_var(&b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let diff = ma - mb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if diff == 0.0 {
            WelchResult { t: 0.0, df, p: 1.0 }
        } else {
            WelchResult {
                t: diff.signum() * f64::INFINITY,
                df,
                p: 0.0,
            }
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p = if t == 0.0 {
        1.0
    } else {
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| MetricsError::Sample(e.to_string()))?;
        (2.0 * dist.cdf(-t.abs())).min(1.0)
    };
    Ok(WelchResult { t, df, p })
}

/// Linear-interpolation quantile of sorted data (the usual "type 7").
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 || sorted[lo] == sorted[hi] {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Five-number summary plus mean, the data behind a box plot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl Distribution {
    pub fn of<T: Real>(values: &[T]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = values.iter().map(|x| x.as_f64()).collect();
        v.sort_by(f64::total_cmp);
        Some(Self {
            n: v.len(),
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grouping_bins() {
        let d = [-0.5, -0.2, 0.0, 0.2, 0.3];
        let g: Vec<u8> = d.iter().map(|&x| group_assign(x)).collect();
        assert_eq!(g, vec![1, 2, 2, 2, 3]);
        assert_eq!(group_assign(-0.2000001), 1);
        assert_eq!(group_assign(0.2000001), 3);
    }

    #[test]
    fn welch_identical_samples() {
        let r = welch_t(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
    }

    #[test]
    fn welch_degenerate_samples() {
        let r = welch_t(&[0.0, 0.0], &[10.0, 10.0]).unwrap();
        assert_eq!(r.t, f64::NEG_INFINITY);
        assert!(r.p < 0.05);
        let r = welch_t(&[4.0, 4.0], &[4.0, 4.0]).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
    }

    #[test]
    fn welch_rejects_bad_samples() {
        assert!(welch_t(&[1.0], &[1.0, 2.0]).is_err());
        assert!(welch_t(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn quartiles() {
        let d = Distribution::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((d.min, d.q1, d.median, d.q3, d.max), (1.0, 1.75, 2.5, 3.25, 4.0));
        assert_eq!(d.mean, 2.5);
        assert!(Distribution::of::<f64>(&[]).is_none());
    }
}
