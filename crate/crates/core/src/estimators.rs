//! Streaming per-arm statistics and the first-stage confidence bounds.
//!
//! [`ArmStats`] accumulates count, mean and the running sum of squared
//! deviations with Welford's recurrence, so a replication never has to keep
//! raw outcomes around. Two summaries can be merged exactly with Chan's
//! pairwise update, which is what the batched samplers in [`crate::model`]
//! rely on.

use crate::error::{Error, Result};

/// Count, mean and sum of squared deviations of one arm's outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ArmStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl ArmStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a summary directly from its sufficient statistics.
    pub fn from_parts(count: u64, mean: f64, m2: f64) -> Result<Self> {
        if !mean.is_finite() || !m2.is_finite() || m2 < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "summary needs finite mean and m2 >= 0, got mean={mean}, m2={m2}"
            )));
        }
        if count == 0 && (mean != 0.0 || m2 != 0.0) {
            return Err(Error::InvalidArgument(
                "empty summary must have zero mean and m2".into(),
            ));
        }
        Ok(Self { count, mean, m2 })
    }

    pub fn from_slice(ys: &[f64]) -> Self {
        ys.iter().fold(Self::new(), |s, &y| s.update(y))
    }

    /// Adds one observation.
    #[must_use]
    pub fn update(mut self, y: f64) -> Self {
        self.push(y);
        self
    }

    pub fn push(&mut self, y: f64) {
        self.count += 1;
        let delta = y - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (y - self.mean);
    }

    /// Combines two disjoint summaries.
    #[must_use]
    pub fn merge(self, other: Self) -> Self {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let n_a = self.count as f64;
        let n_b = other.count as f64;
        let count = self.count + other.count;
        let n = count as f64;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * (n_b / n);
        let m2 = self.m2 + other.m2 + delta * delta * (n_a * n_b / n);
        Self { count, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Sample mean; zero for an empty summary.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// Unbiased variance estimate `m2 / (count - 1)`.
    pub fn variance_hat(&self) -> Result<f64> {
        if self.count < 2 {
            return Err(Error::InsufficientData(format!(
                "variance needs at least 2 observations, have {}",
                self.count
            )));
        }
        Ok(self.m2 / (self.count - 1) as f64)
    }

    pub fn std_hat(&self) -> Result<f64> {
        self.variance_hat().map(f64::sqrt)
    }
}

/// Symmetric first-stage confidence bands, one per arm, sharing one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub radius: f64,
}

impl ConfBounds {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Whether every true mean lies inside its band.
    pub fn covers(&self, means: &[f64]) -> bool {
        means
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&mu, (&lo, &hi))| lo <= mu && mu <= hi)
    }
}

/// Confidence bounds after a first stage of `r * budget` rounds split
/// evenly over `arms` arms.
///
/// The radius is `radius_mult * sqrt(K ln T / (r T)) * max_b sigma_hat_b`.
pub fn conf_bounds(
    stats: &[ArmStats],
    budget: u64,
    r: f64,
    arms: usize,
    radius_mult: f64,
) -> Result<ConfBounds> {
    if stats.len() != arms {
        return Err(Error::InvalidArgument(format!(
            "expected statistics for {arms} arms, got {}",
            stats.len()
        )));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!("split ratio must be in (0,1), got {r}")));
    }
    if budget < 2 {
        return Err(Error::InvalidArgument(format!("budget must be at least 2, got {budget}")));
    }
    if !(radius_mult.is_finite() && radius_mult >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius multiplier must be finite and non-negative, got {radius_mult}"
        )));
    }
    let mut max_sd = 0.0_f64;
    for (a, s) in stats.iter().enumerate() {
        let sd = s.std_hat().map_err(|_| {
            Error::InsufficientData(format!("arm {a} has {} observations, need >= 2", s.count()))
        })?;
        max_sd = max_sd.max(sd);
    }
    let t = budget as f64;
    let radius = radius_mult * (arms as f64 * t.ln() / (r * t)).sqrt() * max_sd;
    let lower = stats.iter().map(|s| s.mean() - radius).collect();
    let upper = stats.iter().map(|s| s.mean() + radius).collect();
    Ok(ConfBounds { lower, upper, radius })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pass(ys: &[f64]) -> (f64, f64) {
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn single_observation() {
        let s = ArmStats::new().update(5.0);
        assert_eq!(s.count(), 1);
        assert_eq!(s.mean(), 5.0);
        assert!(matches!(s.variance_hat(), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn hand_computed_pairs() {
        let s = ArmStats::from_slice(&[1.0, 3.0]);
        assert_eq!(s.mean(), 2.0);
        assert_eq!(s.variance_hat().unwrap(), 2.0);
        let b = ArmStats::from_slice(&[0.0, 1.0]);
        assert_eq!(b.variance_hat().unwrap(), 0.5);
        let c = ArmStats::from_slice(&[2.0; 4]);
        assert_eq!(c.variance_hat().unwrap(), 0.0);
    }

    #[test]
    fn merge_matches_sequential() {
        let ys: Vec<f64> = (0..37).map(|i| ((i * 7919) % 101) as f64 * 0.37 - 4.0).collect();
        let whole = ArmStats::from_slice(&ys);
        let merged = ArmStats::from_slice(&ys[..11]).merge(ArmStats::from_slice(&ys[11..]));
        assert_eq!(whole.count(), merged.count());
        assert!((whole.mean() - merged.mean()).abs() < 1e-12);
        assert!((whole.m2() - merged.m2()).abs() < 1e-9);
        assert_eq!(ArmStats::new().merge(whole), whole);
    }

    #[test]
    fn radius_formula() {
        // sample sd exactly 1 for both arms: {-1, 1} repeated
        let mut ys = Vec::new();
        for _ in 0..1000 {
            ys.push(-1.0);
            ys.push(1.0);
        }
        let s = ArmStats::from_slice(&ys);
        let scale = s.std_hat().unwrap();
        let b = conf_bounds(&[s, s], 10_000, 0.2, 2, 1.0 / scale).unwrap();
        let expected = (2.0 * 10_000f64.ln() / 2000.0).sqrt();
        assert!((b.radius - expected).abs() < 1e-12);
        assert!((b.radius - 0.095970).abs() < 1e-6);
    }

    #[test]
    fn zero_variance_collapses_bounds() {
        let s = ArmStats::from_slice(&[0.3; 10]);
        let t = ArmStats::from_slice(&[0.7; 10]);
        let b = conf_bounds(&[s, t], 100, 0.2, 2, 1.0).unwrap();
        assert_eq!(b.radius, 0.0);
        assert_eq!(b.lower, vec![0.3, 0.7]);
        assert_eq!(b.upper, b.lower);
    }

    #[test]
    fn equal_means_bands_overlap() {
        let s = ArmStats::from_slice(&[0.0, 1.0, 0.5, 0.5]);
        let b = conf_bounds(&[s, s, s], 100, 0.5, 3, 1.0).unwrap();
        for u in &b.upper {
            for l in &b.lower {
                assert!(u >= l);
            }
        }
    }

    #[test]
    fn insufficient_counts_rejected() {
        let s = ArmStats::from_slice(&[1.0]);
        let t = ArmStats::from_slice(&[1.0, 2.0]);
        assert!(matches!(conf_bounds(&[s, t], 100, 0.2, 2, 1.0), Err(Error::InsufficientData(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn one_pass_equals_two_pass(ys in proptest::collection::vec(-1e3f64..1e3, 2..10_000)) {
                let s = ArmStats::from_slice(&ys);
                let (m, v) = two_pass(&ys);
                let scale = ys.iter().fold(1.0f64, |acc, y| acc.max(y.abs()));
                prop_assert!((s.mean() - m).abs() <= 1e-10 * scale);
                prop_assert!((s.variance_hat().unwrap() - v).abs() <= 1e-10 * v.max(1e-300) + 1e-12 * scale * scale);
            }

            #[test]
            fn bands_contain_means(means in proptest::collection::vec(-5f64..5.0, 2..6), spread in 0.01f64..3.0, mult in 0.0f64..3.0) {
                let stats: Vec<_> = means.iter().map(|&m| ArmStats::from_slice(&[m - spread, m + spread, m])).collect();
                let b = conf_bounds(&stats, 1000, 0.3, stats.len(), mult).unwrap();
                for (a, s) in stats.iter().enumerate() {
                    prop_assert!(b.lower[a] <= s.mean() && s.mean() <= b.upper[a]);
                    prop_assert!((b.upper[a] - b.lower[a] - 2.0 * b.radius).abs() < 1e-12);
                }
            }
        }
    }
}
