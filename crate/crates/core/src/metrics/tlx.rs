use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::scalar::Real;

pub const TLX_DIMENSIONS: [&str; 6] = ["mental", "physical", "temporal", "performance", "effort", "frustration"];

/// Unweighted mean of the six workload scores (each in 0..=100).
pub fn tlx_overall<T: Real>(scores: &[T; 6]) -> Result<T, MetricsError> {
    for (name, &s) in TLX_DIMENSIONS.iter().zip(scores) {
        if !(s >= T::zero() && s <= T::of(100.0)) {
            return Err(MetricsError::Tlx(format!("{name} = {s} is outside 0..=100")));
        }
    }
    Ok(scores.iter().copied().sum::<T>() / T::of(6.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlxRating<T> {
    pub mental: T,
    pub physical: T,
    pub temporal: T,
    pub performance: T,
    pub effort: T,
    pub frustration: T,
    pub overall: T,
}

impl<T: Real> TlxRating<T> {
    pub fn from_scores(scores: [T; 6]) -> Result<Self, MetricsError> {
        let overall = tlx_overall(&scores)?;
        let [mental, physical, temporal, performance, effort, frustration] = scores;
        Ok(Self {
            mental,
            physical,
            temporal,
            performance,
            effort,
            frustration,
            overall,
        })
    }

    pub fn scores(&self) -> [T; 6] {
        [
            self.mental,
            self.physical,
            self.temporal,
            self.performance,
            self.effort,
            self.frustration,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overall_is_the_mean() {
        assert_eq!(tlx_overall(&[50.0; 6]).unwrap(), 50.0);
        assert_eq!(tlx_overall(&[30.0, 40.0, 50.0, 60.0, 70.0, 80.0]).unwrap(), 55.0);
        assert_eq!(tlx_overall(&[0.0; 6]).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range() {
        assert!(tlx_overall(&[50.0, 50.0, 101.0, 50.0, 50.0, 50.0]).is_err());
        assert!(tlx_overall(&[-5.0, 50.0, 50.0, 50.0, 50.0, 50.0]).is_err());
        assert!(TlxRating::from_scores([f64::NAN; 6]).is_err());
    }

    #[test]
    fn rating_keeps_scores() {
        let r = TlxRating::from_scores([30.0, 40.0, 50.0, 60.0, 70.0, 80.0]).unwrap();
        assert_eq!(r.overall, 55.0);
        assert_eq!(r.scores()[5], 80.0);
    }
}
