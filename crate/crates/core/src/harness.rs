//! Parallel Monte Carlo engine.
//!
//! Replications are grouped into fixed-size chunks. Each chunk folds its
//! replications in index order and the chunk accumulators are merged in
//! chunk order, so every floating-point reduction happens in the same order
//! no matter how many rayon workers run. Replication `i` draws from the
//! stream keyed by `(base_seed, i)`.

use log::warn;
use rayon::prelude::*;

use crate::bounds::{minimax_constant, PriorSpec};
use crate::error::{Error, Result};
use crate::estimators::{conf_bounds, ArmStats};
use crate::model::{ArmModel, BanditInstance, Family, ParamSpace};
use crate::policy::{run, run_baseline, Baseline, RunResult, Sampling, TsEbaConfig};
use crate::seed::{stream_rng, stream_seed, TAG_POLICY, TAG_PRIOR, TAG_PRIOR_DRAW};

const CHUNK: u64 = 1024;

/// Design under test.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    TsEba(TsEbaConfig),
    Baseline { kind: Baseline, budget: u64, sampling: Sampling },
}

impl PolicySpec {
    pub fn budget(&self) -> u64 {
        match self {
            PolicySpec::TsEba(cfg) => cfg.budget(),
            PolicySpec::Baseline { budget, .. } => *budget,
        }
    }

    pub fn run_once(&self, instance: &BanditInstance, rng: &mut crate::seed::SimRng) -> Result<RunResult> {
        match self {
            PolicySpec::TsEba(cfg) => run(cfg, instance, rng),
            PolicySpec::Baseline { kind, budget, sampling } => {
                run_baseline(*kind, instance, *budget, *sampling, rng)
            }
        }
    }

    fn check(&self, instance: &BanditInstance) -> Result<()> {
        match self {
            PolicySpec::TsEba(cfg) if cfg.arms() != instance.k() => Err(Error::InvalidConfig(format!(
                "policy is configured for K={} but the instance has {} arms",
                cfg.arms(),
                instance.k()
            ))),
            PolicySpec::Baseline { budget: 0, .. } => {
                Err(Error::InvalidConfig("budget must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimPlan {
    pub policy: PolicySpec,
    pub instance: BanditInstance,
    pub reps: u64,
    pub base_seed: u64,
}

/// Summary of a batch of replications.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub budget: u64,
    pub reps: u64,
    pub mean_regret: f64,
    pub regret_se: f64,
    pub misid_rate: f64,
    pub misid_se: f64,
    /// `sqrt(T) * mean_regret`
    pub scaled_regret: f64,
    pub mean_counts: Vec<f64>,
    /// Fraction of replications recommending each arm.
    pub choice_freq: Vec<f64>,
    pub early_stop_rate: f64,
    pub mean_candidate_size: f64,
    /// Fraction of replications whose Stage-1 bands covered every true
    /// mean; `None` for designs without a first stage.
    pub coverage_rate: Option<f64>,
    /// Fraction of replications whose candidate set kept a true best arm.
    pub best_in_candidates_rate: Option<f64>,
}

impl AggregateStats {
    pub fn scaled_regret_se(&self) -> f64 {
        (self.budget as f64).sqrt() * self.regret_se
    }
}

#[derive(Debug, Clone)]
struct Acc {
    regret: ArmStats,
    misid: ArmStats,
    counts: Vec<u64>,
    choices: Vec<u64>,
    early: u64,
    candidates: u64,
    covered: u64,
    best_kept: u64,
    staged: u64,
}

impl Acc {
    fn new(k: usize) -> Self {
        Self {
            regret: ArmStats::new(),
            misid: ArmStats::new(),
            counts: vec![0; k],
            choices: vec![0; k],
            early: 0,
            candidates: 0,
            covered: 0,
            best_kept: 0,
            staged: 0,
        }
    }

    fn push(&mut self, res: &RunResult, instance: &BanditInstance) {
        self.regret.push(res.regret);
        self.misid.push(if res.misidentified { 1.0 } else { 0.0 });
        for (c, n) in self.counts.iter_mut().zip(&res.counts) {
            *c += n;
        }
        self.choices[res.chosen] += 1;
        self.early += u64::from(res.early_stop);
        self.candidates += res.candidate_size as u64;
        if let Some(s1) = &res.stage_one {
            let means = instance.means();
            let best = instance.max_mean();
            self.staged += 1;
            self.covered += u64::from(s1.bounds.covers(&means));
            self.best_kept += u64::from(s1.candidates.iter().any(|&a| means[a] == best));
        }
    }

    fn merge(mut self, other: Acc) -> Self {
        self.regret = self.regret.merge(other.regret);
        self.misid = self.misid.merge(other.misid);
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        for (a, b) in self.choices.iter_mut().zip(other.choices) {
            *a += b;
        }
        self.early += other.early;
        self.candidates += other.candidates;
        self.covered += other.covered;
        self.best_kept += other.best_kept;
        self.staged += other.staged;
        self
    }
}

fn se_of(stats: &ArmStats) -> f64 {
    stats.variance_hat().map(|v| (v / stats.count() as f64).sqrt()).unwrap_or(0.0)
}

/// Runs `f` on every replication index in fixed chunks and returns the
/// per-chunk accumulators in chunk order.
fn chunked<A, I, F>(reps: u64, init: I, f: F) -> Result<Vec<A>>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(u64, &mut A) -> Result<()> + Sync,
{
    let chunks = reps.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for i in c * CHUNK..((c + 1) * CHUNK).min(reps) {
                f(i, &mut acc)?;
            }
            Ok(acc)
        })
        .collect()
}

/// Runs `plan.reps` independent replications and aggregates them.
pub fn simulate(plan: &SimPlan) -> Result<AggregateStats> {
    if plan.reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    plan.policy.check(&plan.instance)?;
    if let PolicySpec::TsEba(cfg) = &plan.policy {
        if !cfg.side_condition_holds(&plan.instance.std_devs()) {
            warn!(
                "r/K = {} exceeds the allocation side condition for sigmas {:?}; results are still well defined",
                cfg.split() / cfg.arms() as f64,
                plan.instance.std_devs()
            );
        }
    }
    let k = plan.instance.k();
    let parts = chunked(
        plan.reps,
        || Acc::new(k),
        |i, acc| {
            let mut rng = stream_rng(plan.base_seed, i, TAG_POLICY);
            let res = plan.policy.run_once(&plan.instance, &mut rng)?;
            acc.push(&res, &plan.instance);
            Ok(())
        },
    )?;
    let acc = parts.into_iter().fold(Acc::new(k), Acc::merge);
    let n = plan.reps as f64;
    let budget = plan.policy.budget();
    let mean_regret = acc.regret.mean();
    Ok(AggregateStats {
        budget,
        reps: plan.reps,
        mean_regret,
        regret_se: se_of(&acc.regret),
        misid_rate: acc.misid.mean(),
        misid_se: se_of(&acc.misid),
        scaled_regret: (budget as f64).sqrt() * mean_regret,
        mean_counts: acc.counts.iter().map(|&c| c as f64 / n).collect(),
        choice_freq: acc.choices.iter().map(|&c| c as f64 / n).collect(),
        early_stop_rate: acc.early as f64 / n,
        mean_candidate_size: acc.candidates as f64 / n,
        coverage_rate: (acc.staged > 0).then(|| acc.covered as f64 / acc.staged as f64),
        best_in_candidates_rate: (acc.staged > 0).then(|| acc.best_kept as f64 / acc.staged as f64),
    })
}

/// `|mean_regret - sum_a gap_a * freq_a|`.
pub fn regret_decomposition_check(
    stats: &AggregateStats,
    instance: &BanditInstance,
    choice_freq: &[f64],
) -> Result<f64> {
    if choice_freq.len() != instance.k() {
        return Err(Error::InvalidArgument(format!(
            "{} frequencies for {} arms",
            choice_freq.len(),
            instance.k()
        )));
    }
    let total: f64 = choice_freq.iter().sum();
    if (total - 1.0).abs() > 1e-9 || choice_freq.iter().any(|f| *f < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "choice frequencies must be non-negative and sum to 1, got sum {total}"
        )));
    }
    let implied: f64 = instance.gaps().iter().zip(choice_freq).map(|(g, f)| g * f).sum();
    Ok((stats.mean_regret - implied).abs())
}

/// Family of the adversarial instances built by [`worst_case_scan`].
#[derive(Debug, Clone, PartialEq)]
pub enum ScanFamily {
    /// Best arm at `+gap`, every other arm at 0, given standard deviations.
    Gaussian { sigmas: Vec<f64> },
    /// Best arm at `0.5 + gap/2`, others at `0.5 - gap/2`.
    Bernoulli { arms: usize },
}

impl ScanFamily {
    pub fn arms(&self) -> usize {
        match self {
            ScanFamily::Gaussian { sigmas } => sigmas.len(),
            ScanFamily::Bernoulli { arms } => *arms,
        }
    }

    /// Standard deviations at which the worst-case constant is evaluated.
    pub fn bound_sigmas(&self) -> Vec<f64> {
        match self {
            ScanFamily::Gaussian { sigmas } => sigmas.clone(),
            ScanFamily::Bernoulli { arms } => vec![0.5; *arms],
        }
    }

    pub fn instance(&self, gap: f64) -> Result<BanditInstance> {
        match self {
            ScanFamily::Gaussian { sigmas } => {
                let mut means = vec![0.0; sigmas.len()];
                means[0] = gap;
                BanditInstance::gaussian(&means, sigmas)
            }
            ScanFamily::Bernoulli { arms } => {
                let mut means = vec![0.5 - gap / 2.0; *arms];
                means[0] = 0.5 + gap / 2.0;
                BanditInstance::bernoulli(&means)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub grid: Vec<(f64, AggregateStats)>,
    pub sup_scaled_regret: f64,
    pub argmax_gap: f64,
    pub bound_constant: f64,
    /// Largest scaled-regret standard error over the grid.
    pub max_scaled_se: f64,
    /// `sup_scaled_regret <= bound_constant + 3 * max_scaled_se`
    pub within_bound: bool,
}

/// Simulates the adversarial instance at every gap and compares the
/// largest `sqrt(T) * regret` with the worst-case constant.
///
/// All gaps share `base_seed` (common random numbers across the grid).
pub fn worst_case_scan(
    policy: &PolicySpec,
    family: &ScanFamily,
    gap_grid: &[f64],
    reps: u64,
    base_seed: u64,
) -> Result<ScanReport> {
    if gap_grid.is_empty() {
        return Err(Error::InvalidArgument("gap grid is empty".into()));
    }
    if let Some(g) = gap_grid.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(Error::InvalidArgument(format!("gaps must be positive, got {g}")));
    }
    let bound_constant = minimax_constant(&family.bound_sigmas())?;
    let mut grid = Vec::with_capacity(gap_grid.len());
    for &gap in gap_grid {
        let plan = SimPlan {
            policy: policy.clone(),
            instance: family.instance(gap)?,
            reps,
            base_seed,
        };
        grid.push((gap, simulate(&plan)?));
    }
    let (mut argmax_gap, mut sup) = (grid[0].0, f64::NEG_INFINITY);
    for (gap, stats) in &grid {
        if stats.scaled_regret > sup {
            sup = stats.scaled_regret;
            argmax_gap = *gap;
        }
    }
    let max_scaled_se = grid.iter().map(|(_, s)| s.scaled_regret_se()).fold(0.0, f64::max);
    Ok(ScanReport {
        within_bound: sup <= bound_constant + 3.0 * max_scaled_se,
        grid,
        sup_scaled_regret: sup,
        argmax_gap,
        bound_constant,
        max_scaled_se,
    })
}

/// `points` gaps `c / sqrt(T)` with `c` log-spaced over `[c_min, c_max]`.
pub fn log_gap_grid(c_min: f64, c_max: f64, points: usize, budget: u64) -> Result<Vec<f64>> {
    if !(c_min > 0.0 && c_max >= c_min && points >= 1) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < c_min <= c_max and points >= 1, got [{c_min}, {c_max}] x {points}"
        )));
    }
    let root = (budget as f64).sqrt();
    if points == 1 {
        return Ok(vec![c_min / root]);
    }
    let step = (c_max / c_min).ln() / (points - 1) as f64;
    Ok((0..points).map(|i| c_min * (step * i as f64).exp() / root).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesEstimate {
    /// `T` times the prior-averaged simple regret.
    pub mean: f64,
    pub se: f64,
    pub draws: u64,
}

/// Builds an instance for a prior draw. Point-mass priors get a space
/// padded around the single point.
pub fn prior_instance(families: &[Family], means: &[f64], prior: PriorSpec) -> Result<BanditInstance> {
    if families.len() != means.len() {
        return Err(Error::InvalidInstance(format!(
            "{} families but {} means",
            families.len(),
            means.len()
        )));
    }
    let (lo, hi) = prior.uniform_bounds()?;
    let bernoulli = families.iter().any(|f| matches!(f, Family::Bernoulli));
    let space = if lo < hi {
        ParamSpace::new(lo, hi)?
    } else if bernoulli {
        ParamSpace::new(lo - 1e-9, hi + 1e-9)?
    } else {
        ParamSpace::new(lo - 1.0, hi + 1.0)?
    };
    let arms = families
        .iter()
        .zip(means)
        .map(|(f, &m)| ArmModel::new(*f, m))
        .collect::<Result<Vec<_>>>()?;
    BanditInstance::new(arms, space)
}

/// Base seed of the replications for prior draw `draw`.
pub fn prior_draw_seed(seed: u64, draw: u64) -> u64 {
    stream_seed(seed, draw, TAG_PRIOR_DRAW)
}

/// Estimates `T * integral Regret dH` by drawing `prior_draws` mean vectors
/// and simulating each `reps_per_draw` times.
///
/// The standard error is the spread of the per-draw mean regrets, which
/// carries both the between-draw and within-draw variance.
pub fn bayes_eval(
    policy: &PolicySpec,
    families: &[Family],
    prior: PriorSpec,
    prior_draws: u64,
    reps_per_draw: u64,
    seed: u64,
) -> Result<BayesEstimate> {
    prior.uniform_bounds()?;
    if prior_draws == 0 || reps_per_draw == 0 {
        return Err(Error::InvalidConfig("prior_draws and reps_per_draw must be positive".into()));
    }
    let k = families.len();
    let per_draw: Vec<AggregateStats> = (0..prior_draws)
        .into_par_iter()
        .map(|d| {
            let means = prior.draw(k, &mut stream_rng(seed, d, TAG_PRIOR))?;
            let plan = SimPlan {
                policy: policy.clone(),
                instance: prior_instance(families, &means, prior)?,
                reps: reps_per_draw,
                base_seed: prior_draw_seed(seed, d),
            };
            simulate(&plan)
        })
        .collect::<Result<_>>()?;
    let t = policy.budget() as f64;
    let across = per_draw.iter().fold(ArmStats::new(), |s, a| s.update(a.mean_regret));
    let se = if prior_draws >= 2 {
        se_of(&across)
    } else {
        per_draw[0].regret_se
    };
    Ok(BayesEstimate {
        mean: t * across.mean(),
        se: t * se,
        draws: prior_draws,
    })
}

/// Frequency of the Stage-1 event that every band covers its true mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageReport {
    pub reps: u64,
    pub frequency: f64,
    pub se: f64,
    /// Frequency with which a true best arm survived into the candidate set.
    pub best_kept: f64,
}

/// Runs Stage 1 of `config` only, `reps` times.
pub fn stage_one_coverage(
    config: &TsEbaConfig,
    instance: &BanditInstance,
    reps: u64,
    base_seed: u64,
) -> Result<CoverageReport> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    if config.arms() != instance.k() {
        return Err(Error::InvalidConfig("arm count mismatch".into()));
    }
    let means = instance.means();
    let best = instance.max_mean();
    let n1 = config.per_arm_stage_one();
    let parts = chunked(
        reps,
        || (0u64, 0u64),
        |i, acc| {
            let mut rng = stream_rng(base_seed, i, TAG_POLICY);
            let stats: Vec<ArmStats> = instance
                .arms()
                .iter()
                .map(|arm| match config.sampling {
                    Sampling::PerRound => (0..n1).fold(ArmStats::new(), |s, _| s.update(arm.sample(&mut rng))),
                    Sampling::Aggregated => arm.sample_summary(n1, &mut rng),
                })
                .collect();
            let b = conf_bounds(&stats, config.budget(), config.split(), config.arms(), config.radius_mult)?;
            acc.0 += u64::from(b.covers(&means));
            let kept = crate::policy::candidate_set(&b).iter().any(|&a| means[a] == best);
            acc.1 += u64::from(kept);
            Ok(())
        },
    )?;
    let (covered, kept) = parts.into_iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = reps as f64;
    let p = covered as f64 / n;
    Ok(CoverageReport {
        reps,
        frequency: p,
        se: (p * (1.0 - p) / n).sqrt(),
        best_kept: kept as f64 / n,
    })
}
