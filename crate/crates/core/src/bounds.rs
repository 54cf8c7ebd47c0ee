//! Closed-form regret constants and simulation oracles.
//!
//! Worst-case constants (scaled by `sqrt(T)`):
//!
//! | K   | constant                                      |
//! |-----|-----------------------------------------------|
//! | 2   | `(sigma_1 + sigma_2) / sqrt(e)`               |
//! | >=3 | `2 (1 + (K-1)/K) sqrt(sum_a sigma_a^2 ln K)`  |
//!
//! Bayes constants (scaled by `T`) are integrals against the prior and are
//! evaluated by Monte Carlo for independent uniform priors.

use rand::Rng;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::estimators::ArmStats;
use crate::model::Family;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    TwoArm,
    MultiArm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub minimax_constant: f64,
    /// Gap attaining the constant at the given budget.
    pub worst_gap: f64,
    pub regime: Regime,
    pub side_condition_ok: bool,
}

fn check_sigmas(sigmas: &[f64]) -> Result<()> {
    if sigmas.len() < 2 {
        return Err(Error::InvalidArgument(format!("need K >= 2 arms, got {}", sigmas.len())));
    }
    if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::InvalidArgument(format!("standard deviations must be positive, got {s}")));
    }
    Ok(())
}

/// Worst-case constant for standard deviations `sigmas`, one per arm.
pub fn minimax_constant(sigmas: &[f64]) -> Result<f64> {
    check_sigmas(sigmas)?;
    let k = sigmas.len() as f64;
    if sigmas.len() == 2 {
        return Ok((sigmas[0] + sigmas[1]) / std::f64::consts::E.sqrt());
    }
    let total_var: f64 = sigmas.iter().map(|s| s * s).sum();
    Ok(2.0 * (1.0 + (k - 1.0) / k) * (total_var * k.ln()).sqrt())
}

/// Gap at which the worst case is attained for budget `budget`.
///
/// Two arms: `(sigma_1 + sigma_2) / sqrt(T)`. Three or more:
/// `sqrt(2 V ln K / T)` with `V = 2 sum_c sigma_c^2`.
pub fn worst_gap(sigmas: &[f64], budget: u64) -> Result<f64> {
    check_sigmas(sigmas)?;
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be positive".into()));
    }
    let t = budget as f64;
    if sigmas.len() == 2 {
        return Ok((sigmas[0] + sigmas[1]) / t.sqrt());
    }
    let v = 2.0 * sigmas.iter().map(|s| s * s).sum::<f64>();
    Ok((2.0 * v * (sigmas.len() as f64).ln() / t).sqrt())
}

/// Constants plus the side condition `r/K <= min ratio` for split `split`.
pub fn bound_report(sigmas: &[f64], budget: u64, split: f64) -> Result<BoundReport> {
    let minimax_constant = minimax_constant(sigmas)?;
    let worst_gap = worst_gap(sigmas, budget)?;
    let k = sigmas.len();
    let (regime, ratio) = if k == 2 {
        let m = sigmas[0].min(sigmas[1]);
        (Regime::TwoArm, m / (sigmas[0] + sigmas[1]))
    } else {
        let sq: Vec<f64> = sigmas.iter().map(|s| s * s).collect();
        let m = sq.iter().copied().fold(f64::INFINITY, f64::min);
        (Regime::MultiArm, m / sq.iter().sum::<f64>())
    };
    Ok(BoundReport {
        minimax_constant,
        worst_gap,
        regime,
        side_condition_ok: split / k as f64 <= ratio,
    })
}

/// Prior on the mean vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorSpec {
    /// Every mean independently uniform on `[lo, hi]`; `lo == hi` is a point
    /// mass.
    Uniform { lo: f64, hi: f64 },
    /// Every mean independently normal. Accepted by the configuration layer
    /// but not by the integrators here.
    Normal { mean: f64, sd: f64 },
}

impl PriorSpec {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::UnsupportedPrior(format!("uniform prior needs lo <= hi, got [{lo}, {hi}]")));
        }
        Ok(PriorSpec::Uniform { lo, hi })
    }

    /// `(lo, hi)` of a uniform prior.
    pub fn uniform_bounds(&self) -> Result<(f64, f64)> {
        match *self {
            PriorSpec::Uniform { lo, hi } => Ok((lo, hi)),
            other => Err(Error::UnsupportedPrior(format!(
                "only independent uniform priors are supported, got {other:?}"
            ))),
        }
    }

    /// Draws a mean vector of length `k`.
    pub fn draw<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<f64>> {
        let (lo, hi) = self.uniform_bounds()?;
        Ok((0..k).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesBoundReport {
    pub lower_constant: f64,
    /// `lower_constant / (1 - (K-2) r / K)`
    pub upper_constant: f64,
    /// Monte Carlo standard error of `lower_constant`.
    pub mc_sigma: f64,
}

/// `1 / (1 - (K-2) r / K)`
pub fn bayes_prefactor(k: usize, split: f64) -> f64 {
    1.0 / (1.0 - (k as f64 - 2.0) * split / k as f64)
}

/// Monte Carlo evaluation of `4 sum_a E[sigma^2_{b*}(mu_{b*}) h_a(mu_{b*})]`
/// where `b*` is the best arm among the others and `h_a` the prior density
/// of arm `a`, integrating over the `K-1` means excluding `a`.
pub fn bayes_constants<R: Rng + ?Sized>(
    families: &[Family],
    prior: PriorSpec,
    split: f64,
    draws: u64,
    rng: &mut R,
) -> Result<BayesBoundReport> {
    let k = families.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need K >= 2 arms, got {k}")));
    }
    if draws < 10_000 {
        return Err(Error::InvalidArgument(format!("need at least 10^4 prior draws, got {draws}")));
    }
    if !(0.0..1.0).contains(&split) {
        return Err(Error::InvalidArgument(format!("split ratio must be in [0,1), got {split}")));
    }
    let (lo, hi) = prior.uniform_bounds()?;
    if hi <= lo {
        return Err(Error::UnsupportedPrior("a point-mass prior has no density".into()));
    }
    let density = 1.0 / (hi - lo);
    let mut lower = 0.0;
    let mut var_sum = 0.0;
    let mut others = vec![0.0; k - 1];
    for a in 0..k {
        let mut acc = ArmStats::new();
        for _ in 0..draws {
            for m in others.iter_mut() {
                *m = lo + (hi - lo) * rng.random::<f64>();
            }
            let mut best = 0;
            for (j, m) in others.iter().enumerate() {
                if *m > others[best] {
                    best = j;
                }
            }
            let arm = if best < a { best } else { best + 1 };
            acc.push(families[arm].variance_at(others[best]) * density);
        }
        lower += acc.mean();
        var_sum += acc.variance_hat()? / draws as f64;
    }
    let lower_constant = 4.0 * lower;
    Ok(BayesBoundReport {
        lower_constant,
        upper_constant: lower_constant * bayes_prefactor(k, split),
        mc_sigma: 4.0 * var_sum.sqrt(),
    })
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisidOracle {
    /// CLT prediction `Phi(-sqrt(T) gap / sqrt(V))`.
    pub probability: f64,
    /// Chernoff envelope `exp(-T gap^2 / (2 V))`.
    pub envelope: f64,
    /// `V = sigma_best^2 / w_best + sigma_other^2 / w_other`
    pub asymptotic_variance: f64,
}

/// Probability that the empirical means of the best arm and one competitor
/// are misordered after `T` rounds at allocation fractions `weights`.
pub fn misid_normal_oracle(
    gap: f64,
    sigmas: (f64, f64),
    weights: (f64, f64),
    budget: u64,
) -> Result<MisidOracle> {
    if !(gap.is_finite() && gap >= 0.0) {
        return Err(Error::InvalidArgument(format!("gap must be >= 0, got {gap}")));
    }
    let (wa, wb) = weights;
    if !(wa > 0.0 && wa < 1.0 && wb > 0.0 && wb < 1.0) {
        return Err(Error::InvalidArgument(format!("weights must lie in (0,1), got {weights:?}")));
    }
    let v = sigmas.0 * sigmas.0 / wa + sigmas.1 * sigmas.1 / wb;
    let t = budget as f64;
    Ok(MisidOracle {
        probability: std_normal_cdf(-(t.sqrt() * gap) / v.sqrt()),
        envelope: (-t * gap * gap / (2.0 * v)).exp(),
        asymptotic_variance: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream_rng;

    #[test]
    fn minimax_examples() {
        assert!((minimax_constant(&[1.0, 1.0]).unwrap() - 1.213_061_319).abs() < 1e-9);
        let k3 = minimax_constant(&[1.0, 1.0, 1.0]).unwrap();
        assert!((k3 - 10.0 / 3.0 * (3.0 * 3f64.ln()).sqrt()).abs() < 1e-12);
        assert!((k3 - 6.051_480).abs() < 1e-6);
        assert!(minimax_constant(&[0.0, 1.0]).is_err());
        assert!(minimax_constant(&[1.0]).is_err());
    }

    #[test]
    fn worst_gap_examples() {
        assert!((worst_gap(&[1.0, 1.0], 10_000).unwrap() - 0.02).abs() < 1e-15);
        let g = worst_gap(&[1.0; 3], 9000).unwrap();
        assert!((g - (12.0 * 3f64.ln() / 9000.0).sqrt()).abs() < 1e-15);
        assert!((g - 0.038_273).abs() < 1e-6);
        for sig in [vec![1.0, 2.0], vec![0.5, 1.0, 3.0]] {
            let a = worst_gap(&sig, 1000).unwrap();
            let b = worst_gap(&sig, 4000).unwrap();
            assert!((a / b - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn report_regimes() {
        let r = bound_report(&[1.0, 1.0], 10_000, 0.2).unwrap();
        assert_eq!(r.regime, Regime::TwoArm);
        assert!(r.side_condition_ok);
        let r = bound_report(&[1.0, 1.0, 1.0], 9000, 0.2).unwrap();
        assert_eq!(r.regime, Regime::MultiArm);
        assert!(r.side_condition_ok);
        // r/K = 0.1 against min sigma^2 / sum sigma^2 = 1/11
        assert!(!bound_report(&[1.0, 1.0, 3.0], 9000, 0.3).unwrap().side_condition_ok);
        assert!(!bound_report(&[1.0, 9.0], 9000, 0.5).unwrap().side_condition_ok);
    }

    // golden-section maximizer, independent of the closed forms above
    fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        for _ in 0..200 {
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - g * (b - a);
            d = a + g * (b - a);
        }
        (a + b) / 2.0
    }

    #[test]
    fn two_arm_constant_matches_numerical_maximum() {
        for (s1, s2, t) in [(1.0, 1.0, 10_000u64), (0.5, 2.0, 400), (3.0, 1.5, 123_456)] {
            let tf = t as f64;
            let f = |d: f64| d * (-tf * d * d / (2.0 * (s1 + s2) * (s1 + s2))).exp();
            let d = golden_max(f, 0.0, 10.0 * (s1 + s2) / tf.sqrt());
            let gap = worst_gap(&[s1, s2], t).unwrap();
            assert!((d - gap).abs() / gap < 1e-6);
            let c = minimax_constant(&[s1, s2]).unwrap();
            assert!((f(d) * tf.sqrt() - c).abs() / c < 1e-6);
        }
    }

    #[test]
    fn bayes_gaussian_constant_is_exact() {
        let fam = [Family::gaussian(1.0).unwrap(); 2];
        let prior = PriorSpec::uniform(0.0, 1.0).unwrap();
        let rep = bayes_constants(&fam, prior, 0.0, 10_000, &mut stream_rng(1, 0, 0)).unwrap();
        assert_eq!(rep.lower_constant, 8.0);
        assert_eq!(rep.upper_constant, 8.0);
        assert_eq!(rep.mc_sigma, 0.0);
        let rep3 = bayes_constants(&[Family::gaussian(1.0).unwrap(); 3], prior, 0.3, 10_000, &mut stream_rng(1, 0, 0)).unwrap();
        assert!((rep3.upper_constant / rep3.lower_constant - 1.0 / 0.9).abs() < 1e-12);
        assert!((bayes_prefactor(3, 0.3) - 1.111_111_111_111_111).abs() < 1e-12);
    }

    #[test]
    fn bayes_rejects_bad_priors() {
        let fam = [Family::Bernoulli; 2];
        let mut rng = stream_rng(1, 0, 0);
        assert!(matches!(
            bayes_constants(&fam, PriorSpec::Normal { mean: 0.5, sd: 0.1 }, 0.1, 10_000, &mut rng),
            Err(Error::UnsupportedPrior(_))
        ));
        assert!(bayes_constants(&fam, PriorSpec::uniform(0.5, 0.5).unwrap(), 0.1, 10_000, &mut rng).is_err());
        assert!(bayes_constants(&fam, PriorSpec::uniform(0.1, 0.9).unwrap(), 0.1, 100, &mut rng).is_err());
    }

    #[test]
    fn bayes_bernoulli_mc_rate() {
        // integrand for K=2 on [0.1, 0.9]: mu(1-mu)/0.8 with mu uniform, so the
        // exact constant is 4 * 2 * E[mu(1-mu)] / 0.8
        let fam = [Family::Bernoulli; 2];
        let prior = PriorSpec::uniform(0.1, 0.9).unwrap();
        // E[mu - mu^2] = 0.5 - (0.9^3 - 0.1^3) / (3 * 0.8)
        let exact = 8.0 * (0.5 - (0.729 - 0.001) / 2.4) / 0.8;
        let a = bayes_constants(&fam, prior, 0.1, 20_000, &mut stream_rng(2, 0, 0)).unwrap();
        let b = bayes_constants(&fam, prior, 0.1, 80_000, &mut stream_rng(2, 1, 0)).unwrap();
        assert!((a.lower_constant - exact).abs() < 4.0 * a.mc_sigma);
        assert!((b.lower_constant - exact).abs() < 4.0 * b.mc_sigma);
        let ratio = b.mc_sigma / a.mc_sigma;
        assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn misid_oracle_examples() {
        let t = 10_000u64;
        let o = misid_normal_oracle(2.0 / 100.0, (1.0, 1.0), (0.5, 0.5), t).unwrap();
        assert!((o.probability - 0.158_655_253_9).abs() < 1e-9);
        assert!((o.envelope - (-0.5f64).exp()).abs() < 1e-12);
        assert_eq!(o.asymptotic_variance, 4.0);
        let z = misid_normal_oracle(0.0, (1.0, 1.0), (0.5, 0.5), t).unwrap();
        assert_eq!(z.probability, 0.5);
        // sqrt(T) gap = 3 with V = 1: sigma^2 = 0.25 each at w = 0.5
        let three = misid_normal_oracle(0.03, (0.5, 0.5), (0.5, 0.5), t).unwrap();
        assert!((three.probability - 0.001_349_898).abs() < 1e-9);
        assert!(misid_normal_oracle(0.1, (1.0, 1.0), (0.0, 1.0), t).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn minimax_monotone_in_each_sigma(sig in proptest::collection::vec(0.01f64..10.0, 2..6), idx in 0usize..6, bump in 1e-6f64..1.0) {
                let i = idx % sig.len();
                let mut up = sig.clone();
                up[i] += bump;
                prop_assert!(minimax_constant(&up).unwrap() > minimax_constant(&sig).unwrap());
            }

            #[test]
            fn envelope_dominates_gaussian_tail(z in 1e-3f64..8.0) {
                // V = 1, T = 1: probability Phi(-z), envelope exp(-z^2/2)
                let o = misid_normal_oracle(z, (0.5, 0.5), (0.5, 0.5), 1).unwrap();
                prop_assert!(o.envelope >= o.probability);
            }
        }
    }
}
