//! Mean-parametrized outcome distributions.
//!
//! Each arm is a one-parameter family indexed by its mean, with a variance
//! function `sigma^2(mu)` and Fisher information `1 / sigma^2(mu)`. Two
//! families ship: Gaussian with known variance and Bernoulli.

use rand::Rng;
use rand_distr::{Binomial, ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::estimators::ArmStats;

/// Closed interval `[lo, hi]` of admissible means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpace {
    lo: f64,
    hi: f64,
}

impl ParamSpace {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidSpace { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// `[0.05, 0.95]`, used for Bernoulli arms when no space is given.
    pub fn bernoulli_default() -> Self {
        Self { lo: 0.05, hi: 0.95 }
    }

    /// Smallest space holding every value, padded by `pad` on both sides.
    pub fn enclosing(values: &[f64], pad: f64) -> Result<Self> {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(lo - pad, hi + pad)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// Gaussian outcomes with a fixed, known variance.
    GaussianKnownVar { variance: f64 },
    Bernoulli,
}

impl Family {
    pub fn gaussian(variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::InvalidArm(format!(
                "gaussian variance must be positive and finite, got {variance}"
            )));
        }
        Ok(Family::GaussianKnownVar { variance })
    }

    /// Variance function evaluated at `mean`.
    pub fn variance_at(&self, mean: f64) -> f64 {
        match *self {
            Family::GaussianKnownVar { variance } => variance,
            Family::Bernoulli => mean * (1.0 - mean),
        }
    }

    fn same_kind(&self, other: &Family) -> bool {
        matches!(
            (self, other),
            (Family::GaussianKnownVar { .. }, Family::GaussianKnownVar { .. })
                | (Family::Bernoulli, Family::Bernoulli)
        )
    }
}

/// One arm: a family together with its mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmModel {
    family: Family,
    mean: f64,
}

impl ArmModel {
    pub fn new(family: Family, mean: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::InvalidArm(format!("mean must be finite, got {mean}")));
        }
        match family {
            Family::GaussianKnownVar { variance } => {
                Family::gaussian(variance)?;
            }
            Family::Bernoulli => {
                // Fisher information blows up at 0 and 1
                if !(mean > 0.0 && mean < 1.0) {
                    return Err(Error::InvalidArm(format!(
                        "bernoulli mean must lie strictly inside (0,1), got {mean}"
                    )));
                }
            }
        }
        Ok(Self { family, mean })
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        Self::new(Family::gaussian(variance)?, mean)
    }

    pub fn bernoulli(mean: f64) -> Result<Self> {
        Self::new(Family::Bernoulli, mean)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.family.variance_at(self.mean)
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn fisher_info(&self) -> f64 {
        1.0 / self.variance()
    }

    /// One draw from the arm's outcome distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::GaussianKnownVar { variance } => {
                let z: f64 = StandardNormal.sample(rng);
                self.mean + variance.sqrt() * z
            }
            Family::Bernoulli => {
                if rng.random::<f64>() < self.mean {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Summary statistics of `n` i.i.d. draws, generated from their exact
    /// joint sampling distribution in O(1) work.
    ///
    /// Gaussian: the mean is `N(mu, sigma^2/n)` and `m2 / sigma^2` is an
    /// independent chi-square with `n - 1` degrees of freedom. Bernoulli: the
    /// success count is binomial and `m2 = S (n - S) / n`.
    pub fn sample_summary<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> ArmStats {
        if n == 0 {
            return ArmStats::new();
        }
        let nf = n as f64;
        let (mean, m2) = match self.family {
            Family::GaussianKnownVar { variance } => {
                let z: f64 = StandardNormal.sample(rng);
                let mean = self.mean + (variance / nf).sqrt() * z;
                let m2 = if n >= 2 {
                    let chi = ChiSquared::new((n - 1) as f64).expect("dof >= 1");
                    variance * chi.sample(rng)
                } else {
                    0.0
                };
                (mean, m2)
            }
            Family::Bernoulli => {
                let successes = Binomial::new(n, self.mean).expect("mean in (0,1)").sample(rng) as f64;
                (successes / nf, successes * (nf - successes) / nf)
            }
        };
        ArmStats::from_parts(n, mean, m2).expect("sampled summary is finite")
    }
}

/// KL divergence `KL(P_p || P_q)` between two arms of the same family.
pub fn kl(p: &ArmModel, q: &ArmModel) -> Result<f64> {
    match (p.family, q.family) {
        (Family::GaussianKnownVar { variance: vp }, Family::GaussianKnownVar { variance: vq }) => {
            if vp != vq {
                return Err(Error::FamilyMismatch(format!(
                    "gaussian KL is defined here only for equal variances ({vp} vs {vq})"
                )));
            }
            Ok((p.mean - q.mean).powi(2) / (2.0 * vp))
        }
        (Family::Bernoulli, Family::Bernoulli) => {
            let (a, b) = (p.mean, q.mean);
            Ok(a * (a / b).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln())
        }
        _ => Err(Error::FamilyMismatch(format!(
            "cannot compare {:?} with {:?}",
            p.family, q.family
        ))),
    }
}

/// K >= 2 arms sharing a parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    arms: Vec<ArmModel>,
    space: ParamSpace,
}

impl BanditInstance {
    pub fn new(arms: Vec<ArmModel>, space: ParamSpace) -> Result<Self> {
        if arms.len() < 2 {
            return Err(Error::InvalidInstance(format!(
                "need at least 2 arms, got {}",
                arms.len()
            )));
        }
        for (a, arm) in arms.iter().enumerate() {
            if !space.contains(arm.mean()) {
                return Err(Error::InvalidInstance(format!(
                    "arm {a} mean {} outside parameter space [{}, {}]",
                    arm.mean(),
                    space.lo(),
                    space.hi()
                )));
            }
            if matches!(arm.family(), Family::Bernoulli) && !(space.lo() > 0.0 && space.hi() < 1.0) {
                return Err(Error::InvalidInstance(format!(
                    "bernoulli arms need a space inside (0,1), got [{}, {}]",
                    space.lo(),
                    space.hi()
                )));
            }
        }
        if !arms.iter().all(|a| a.family().same_kind(&arms[0].family())) {
            return Err(Error::InvalidInstance("all arms must share one family kind".into()));
        }
        Ok(Self { arms, space })
    }

    /// Gaussian arms with per-arm standard deviations; the space is the
    /// range of the means padded by one unit.
    pub fn gaussian(means: &[f64], sigmas: &[f64]) -> Result<Self> {
        if means.len() != sigmas.len() {
            return Err(Error::InvalidInstance(format!(
                "{} means but {} sigmas",
                means.len(),
                sigmas.len()
            )));
        }
        let arms = means
            .iter()
            .zip(sigmas)
            .map(|(&m, &s)| ArmModel::gaussian(m, s * s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(arms, ParamSpace::enclosing(means, 1.0)?)
    }

    /// Bernoulli arms in the default space `[0.05, 0.95]`.
    pub fn bernoulli(means: &[f64]) -> Result<Self> {
        Self::bernoulli_in(means, ParamSpace::bernoulli_default())
    }

    pub fn bernoulli_in(means: &[f64], space: ParamSpace) -> Result<Self> {
        let arms = means
            .iter()
            .map(|&m| ArmModel::bernoulli(m))
            .collect::<Result<Vec<_>>>()?;
        Self::new(arms, space)
    }

    pub fn arms(&self) -> &[ArmModel] {
        &self.arms
    }

    pub fn space(&self) -> ParamSpace {
        self.space
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn means(&self) -> Vec<f64> {
        self.arms.iter().map(ArmModel::mean).collect()
    }

    pub fn std_devs(&self) -> Vec<f64> {
        self.arms.iter().map(ArmModel::std_dev).collect()
    }

    pub fn max_mean(&self) -> f64 {
        self.arms.iter().map(ArmModel::mean).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest index attaining the maximal mean.
    pub fn best_arm(&self) -> usize {
        let best = self.max_mean();
        self.arms.iter().position(|a| a.mean() == best).expect("non-empty")
    }

    /// Mean gap `mu_best - mu_a` of every arm.
    pub fn gaps(&self) -> Vec<f64> {
        let best = self.max_mean();
        self.arms.iter().map(|a| best - a.mean()).collect()
    }
}
