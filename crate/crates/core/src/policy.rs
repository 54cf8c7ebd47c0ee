//! The two-stage TS-EBA experiment and the baseline designs it is compared
//! against.
//!
//! Stage 1 pulls every arm `rT/K` times in arm order, builds confidence
//! bands and keeps the arms whose upper bound reaches the best lower bound.
//! If one arm survives it is returned at once. Otherwise Stage 2 draws arms
//! i.i.d. from clipped, renormalized allocation probabilities for the
//! remaining `(1 - r)T` rounds. The recommendation is the empirical best arm
//! over all `K` arms.
//!
//! [`PolicyState`] is the round-by-round state machine. [`run`] drives it
//! either one outcome at a time ([`Sampling::PerRound`]) or by drawing each
//! arm's block of outcomes as an exact summary ([`Sampling::Aggregated`]).

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::estimators::{conf_bounds, ArmStats, ConfBounds};
use crate::model::BanditInstance;

/// How the Stage-2 allocation target is formed from the candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// Standard deviations for two candidates, variances for three or more.
    #[default]
    VarianceBased,
    /// Equal weight on every candidate (the Bernoulli simplification).
    UniformOnCandidates,
}

/// How outcomes are generated during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// One draw per round through [`PolicyState`].
    #[default]
    PerRound,
    /// Per-arm blocks drawn from the exact distribution of their summary
    /// statistics, with Stage-2 counts drawn as one multinomial vector.
    Aggregated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsEbaConfig {
    budget: u64,
    split: f64,
    arms: usize,
    per_arm_stage_one: u64,
    pub variant: Variant,
    pub radius_mult: f64,
    pub sampling: Sampling,
}

impl TsEbaConfig {
    /// Validates budget `T`, split ratio `r` and arm count `K`.
    ///
    /// `rT/K` must be an integer of at least 2.
    pub fn new(budget: u64, split: f64, arms: usize) -> Result<Self> {
        if arms < 2 {
            return Err(Error::InvalidConfig(format!("K must be at least 2, got {arms}")));
        }
        if !(split > 0.0 && split < 1.0) {
            return Err(Error::InvalidConfig(format!("split ratio r must lie in (0,1), got {split}")));
        }
        let per_arm = split * budget as f64 / arms as f64;
        let rounded = per_arm.round();
        if (per_arm - rounded).abs() > 1e-9 * per_arm.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "rT/K must be an integer: r={split}, T={budget}, K={arms} gives {per_arm}"
            )));
        }
        if rounded < 2.0 {
            return Err(Error::InvalidConfig(format!(
                "rT/K must be at least 2 so variances can be estimated, got {rounded}"
            )));
        }
        Ok(Self {
            budget,
            split,
            arms,
            per_arm_stage_one: rounded as u64,
            variant: Variant::VarianceBased,
            radius_mult: 1.0,
            sampling: Sampling::PerRound,
        })
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_radius_mult(mut self, radius_mult: f64) -> Result<Self> {
        if !(radius_mult.is_finite() && radius_mult >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "radius_mult must be finite and non-negative, got {radius_mult}"
            )));
        }
        self.radius_mult = radius_mult;
        Ok(self)
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn split(&self) -> f64 {
        self.split
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    /// Pulls per arm in Stage 1, `rT/K`.
    pub fn per_arm_stage_one(&self) -> u64 {
        self.per_arm_stage_one
    }

    /// Length of Stage 1, `rT`.
    pub fn stage_one_len(&self) -> u64 {
        self.per_arm_stage_one * self.arms as u64
    }

    pub fn stage_two_len(&self) -> u64 {
        self.budget - self.stage_one_len()
    }

    /// Side condition of the worst-case guarantee:
    /// `r/K <= min sigma_a / sum sigma` for two arms and
    /// `r/K <= min sigma_a^2 / sum sigma^2` otherwise.
    pub fn side_condition_holds(&self, sigmas: &[f64]) -> bool {
        let rk = self.split / self.arms as f64;
        let (min, sum) = if sigmas.len() == 2 {
            (sigmas.iter().copied().fold(f64::INFINITY, f64::min), sigmas.iter().sum::<f64>())
        } else {
            (
                sigmas.iter().map(|s| s * s).fold(f64::INFINITY, f64::min),
                sigmas.iter().map(|s| s * s).sum::<f64>(),
            )
        };
        rk <= min / sum
    }

    fn check_instance(&self, instance: &BanditInstance) -> Result<()> {
        if instance.k() != self.arms {
            return Err(Error::InvalidConfig(format!(
                "config is for K={} arms but instance has {}",
                self.arms,
                instance.k()
            )));
        }
        Ok(())
    }
}

/// Arms whose upper bound reaches the largest lower bound, in index order.
pub fn candidate_set(bounds: &ConfBounds) -> Vec<usize> {
    let best_lower = bounds.lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..bounds.len()).filter(|&a| bounds.upper[a] >= best_lower).collect()
}

/// Target allocation over a candidate set: proportional to standard
/// deviations for two candidates, to variances for three or more.
pub fn ideal_ratio(sigmas: &[f64]) -> Result<Vec<f64>> {
    if sigmas.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "allocation ratio needs at least 2 candidates, got {}",
            sigmas.len()
        )));
    }
    if let Some(bad) = sigmas.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::InvalidArgument(format!("standard deviations must be >= 0, got {bad}")));
    }
    let weights: Vec<f64> = if sigmas.len() == 2 {
        sigmas.to_vec()
    } else {
        sigmas.iter().map(|s| s * s).collect()
    };
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        // every candidate looked constant in Stage 1
        return Ok(vec![1.0 / sigmas.len() as f64; sigmas.len()]);
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// Stage-2 probabilities: `max(w_a - r/K, 0)` renormalized, uniform when
/// every entry clips to zero.
pub fn stage2_probs(w: &[f64], split: f64, arms: usize) -> Vec<f64> {
    let spent = split / arms as f64;
    let clipped: Vec<f64> = w.iter().map(|wa| (wa - spent).max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total > 0.0 {
        clipped.iter().map(|c| c / total).collect()
    } else {
        vec![1.0 / w.len() as f64; w.len()]
    }
}

/// Lowest-index arm with the largest sample mean among sampled arms.
pub fn empirical_best(stats: &[ArmStats]) -> usize {
    let mut best: Option<usize> = None;
    for (a, s) in stats.iter().enumerate() {
        if s.count() == 0 {
            continue;
        }
        match best {
            Some(b) if stats[b].mean() >= s.mean() => {}
            _ => best = Some(a),
        }
    }
    best.unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Stage1,
    Stage2,
    Done,
}

/// Stage-1 outcome kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOneReport {
    pub bounds: ConfBounds,
    pub candidates: Vec<usize>,
    /// Stage-2 probabilities over all arms; all zero on early stop.
    pub probs: Vec<f64>,
}

/// Full state of one TS-EBA replication.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    config: TsEbaConfig,
    phase: Phase,
    round: u64,
    stats: Vec<ArmStats>,
    candidates: Vec<usize>,
    probs: Vec<f64>,
    early_winner: Option<usize>,
    bounds: Option<ConfBounds>,
}

impl PolicyState {
    pub fn new(config: TsEbaConfig) -> Self {
        let k = config.arms;
        Self {
            config,
            phase: Phase::Stage1,
            round: 0,
            stats: vec![ArmStats::new(); k],
            candidates: Vec::new(),
            probs: vec![0.0; k],
            early_winner: None,
            bounds: None,
        }
    }

    pub fn config(&self) -> &TsEbaConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Rounds observed so far.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn stats(&self) -> &[ArmStats] {
        &self.stats
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    /// Stage-2 probabilities over all arms; zero outside the candidate set.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn early_winner(&self) -> Option<usize> {
        self.early_winner
    }

    pub fn bounds(&self) -> Option<&ConfBounds> {
        self.bounds.as_ref()
    }

    /// Arm to pull in the next round, or `None` once the run is over.
    pub fn next_arm<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        match self.phase {
            Phase::Stage1 => Some((self.round / self.config.per_arm_stage_one) as usize),
            Phase::Stage2 => Some(self.draw_stage_two_arm(rng)),
            Phase::Done => None,
        }
    }

    fn draw_stage_two_arm<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = self.candidates[0];
        for &a in &self.candidates {
            if self.probs[a] <= 0.0 {
                continue;
            }
            acc += self.probs[a];
            last = a;
            if u < acc {
                return a;
            }
        }
        last
    }

    /// Records the outcome of pulling `arm` in the current round.
    pub fn observe(&mut self, arm: usize, y: f64) -> Result<()> {
        match self.phase {
            Phase::Done => {
                return Err(Error::InvalidArgument("run already finished".into()));
            }
            Phase::Stage1 => {
                let expected = (self.round / self.config.per_arm_stage_one) as usize;
                if arm != expected {
                    return Err(Error::InvalidArgument(format!(
                        "stage 1 round {} belongs to arm {expected}, not {arm}",
                        self.round
                    )));
                }
            }
            Phase::Stage2 => {
                if arm >= self.config.arms || self.probs[arm] <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "arm {arm} has zero stage 2 probability"
                    )));
                }
            }
        }
        self.stats[arm].push(y);
        self.round += 1;
        if self.phase == Phase::Stage1 && self.round == self.config.stage_one_len() {
            self.close_stage_one()?;
        } else if self.phase == Phase::Stage2 && self.round == self.config.budget {
            self.phase = Phase::Done;
        }
        Ok(())
    }

    /// Installs Stage-1 summaries produced in one block per arm.
    pub fn absorb_stage_one(&mut self, stats: Vec<ArmStats>) -> Result<()> {
        if self.phase != Phase::Stage1 || self.round != 0 {
            return Err(Error::InvalidArgument("stage 1 already under way".into()));
        }
        if stats.len() != self.config.arms
            || stats.iter().any(|s| s.count() != self.config.per_arm_stage_one)
        {
            return Err(Error::InvalidArgument(format!(
                "stage 1 needs {} arms with {} observations each",
                self.config.arms, self.config.per_arm_stage_one
            )));
        }
        self.stats = stats;
        self.round = self.config.stage_one_len();
        self.close_stage_one()
    }

    /// Draws the Stage-2 pull counts as one multinomial vector.
    pub fn stage_two_counts<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        let mut counts = vec![0u64; self.config.arms];
        if self.phase != Phase::Stage2 {
            return counts;
        }
        let mut left = self.config.budget - self.round;
        let mut mass = 1.0;
        let live: Vec<usize> = self.candidates.iter().copied().filter(|&a| self.probs[a] > 0.0).collect();
        for (i, &a) in live.iter().enumerate() {
            if left == 0 {
                break;
            }
            if i + 1 == live.len() {
                counts[a] = left;
                break;
            }
            let p = (self.probs[a] / mass).clamp(0.0, 1.0);
            let n = Binomial::new(left, p).expect("p in [0,1]").sample(rng);
            counts[a] = n;
            left -= n;
            mass -= self.probs[a];
        }
        counts
    }

    /// Installs all Stage-2 outcomes, one summary per arm.
    pub fn absorb_stage_two(&mut self, blocks: Vec<ArmStats>) -> Result<()> {
        if self.phase != Phase::Stage2 {
            return Err(Error::InvalidArgument("not in stage 2".into()));
        }
        let total: u64 = blocks.iter().map(ArmStats::count).sum();
        if blocks.len() != self.config.arms || self.round + total != self.config.budget {
            return Err(Error::InvalidArgument(format!(
                "stage 2 blocks must cover the remaining {} rounds",
                self.config.budget - self.round
            )));
        }
        for (a, block) in blocks.into_iter().enumerate() {
            if block.count() > 0 && self.probs[a] <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "arm {a} has zero stage 2 probability"
                )));
            }
            self.stats[a] = self.stats[a].merge(block);
        }
        self.round = self.config.budget;
        self.phase = Phase::Done;
        Ok(())
    }

    fn close_stage_one(&mut self) -> Result<()> {
        let cfg = &self.config;
        let bounds = conf_bounds(&self.stats, cfg.budget, cfg.split, cfg.arms, cfg.radius_mult)?;
        self.candidates = candidate_set(&bounds);
        self.bounds = Some(bounds);
        if self.candidates.len() == 1 {
            self.early_winner = Some(self.candidates[0]);
            self.phase = Phase::Done;
            return Ok(());
        }
        let w = match cfg.variant {
            Variant::VarianceBased => {
                let sigmas = self
                    .candidates
                    .iter()
                    .map(|&a| self.stats[a].std_hat())
                    .collect::<Result<Vec<_>>>()?;
                ideal_ratio(&sigmas)?
            }
            Variant::UniformOnCandidates => {
                vec![1.0 / self.candidates.len() as f64; self.candidates.len()]
            }
        };
        let pi = stage2_probs(&w, cfg.split, cfg.arms);
        self.probs = vec![0.0; cfg.arms];
        for (&a, p) in self.candidates.iter().zip(pi) {
            self.probs[a] = p;
        }
        self.phase = if self.round == cfg.budget { Phase::Done } else { Phase::Stage2 };
        Ok(())
    }

    /// The recommended arm; `None` until the run is finished.
    pub fn recommend(&self) -> Option<usize> {
        if self.phase != Phase::Done {
            return None;
        }
        Some(self.early_winner.unwrap_or_else(|| empirical_best(&self.stats)))
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub chosen: usize,
    pub counts: Vec<u64>,
    /// `mu_best - mu_chosen`
    pub regret: f64,
    pub misidentified: bool,
    pub candidate_size: usize,
    pub early_stop: bool,
    pub stage_one: Option<StageOneReport>,
}

impl RunResult {
    fn finish(instance: &BanditInstance, chosen: usize, stats: &[ArmStats]) -> Self {
        let regret = instance.max_mean() - instance.arms()[chosen].mean();
        Self {
            chosen,
            counts: stats.iter().map(ArmStats::count).collect(),
            regret,
            misidentified: regret > 0.0,
            candidate_size: instance.k(),
            early_stop: false,
            stage_one: None,
        }
    }
}

/// Runs one TS-EBA replication on `instance`.
pub fn run<R: Rng + ?Sized>(
    config: &TsEbaConfig,
    instance: &BanditInstance,
    rng: &mut R,
) -> Result<RunResult> {
    config.check_instance(instance)?;
    let mut state = PolicyState::new(config.clone());
    match config.sampling {
        Sampling::PerRound => {
            while let Some(arm) = state.next_arm(rng) {
                let y = instance.arms()[arm].sample(rng);
                state.observe(arm, y)?;
            }
        }
        Sampling::Aggregated => {
            let n1 = config.per_arm_stage_one;
            let first = instance.arms().iter().map(|arm| arm.sample_summary(n1, rng)).collect();
            state.absorb_stage_one(first)?;
            if state.phase() == Phase::Stage2 {
                let counts = state.stage_two_counts(rng);
                let blocks = instance
                    .arms()
                    .iter()
                    .zip(&counts)
                    .map(|(arm, &n)| arm.sample_summary(n, rng))
                    .collect();
                state.absorb_stage_two(blocks)?;
            }
        }
    }
    let chosen = state.recommend().expect("run finished");
    let mut result = RunResult::finish(instance, chosen, state.stats());
    result.candidate_size = state.candidates().len();
    result.early_stop = state.early_winner().is_some();
    result.stage_one = Some(StageOneReport {
        bounds: state.bounds().cloned().expect("stage 1 closed"),
        candidates: state.candidates().to_vec(),
        probs: state.probs().to_vec(),
    });
    Ok(result)
}

/// Non-adaptive comparison designs followed by the empirical-best choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// `T/K` pulls per arm, remainder handed out round-robin.
    UniformEba,
    /// Pulls proportional to the true standard deviations.
    OracleNeymanEba,
}

/// Deterministic pull counts of a baseline design.
pub fn baseline_counts(kind: Baseline, instance: &BanditInstance, budget: u64) -> Vec<u64> {
    let k = instance.k() as u64;
    match kind {
        Baseline::UniformEba => (0..k).map(|a| budget / k + u64::from(a < budget % k)).collect(),
        Baseline::OracleNeymanEba => {
            let sigmas = instance.std_devs();
            let total: f64 = sigmas.iter().sum();
            let exact: Vec<f64> = sigmas.iter().map(|s| budget as f64 * s / total).collect();
            let mut counts: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
            let assigned: u64 = counts.iter().sum();
            let mut order: Vec<usize> = (0..counts.len()).collect();
            // largest fractional part first, lower index on ties
            order.sort_by(|&a, &b| {
                let fa = exact[a] - exact[a].floor();
                let fb = exact[b] - exact[b].floor();
                fb.total_cmp(&fa).then(a.cmp(&b))
            });
            for &a in order.iter().take(budget.saturating_sub(assigned) as usize) {
                counts[a] += 1;
            }
            counts
        }
    }
}

/// Runs one replication of a baseline design.
pub fn run_baseline<R: Rng + ?Sized>(
    kind: Baseline,
    instance: &BanditInstance,
    budget: u64,
    sampling: Sampling,
    rng: &mut R,
) -> Result<RunResult> {
    if budget == 0 {
        return Err(Error::InvalidConfig("budget must be positive".into()));
    }
    let counts = baseline_counts(kind, instance, budget);
    let stats: Vec<ArmStats> = instance
        .arms()
        .iter()
        .zip(&counts)
        .map(|(arm, &n)| match sampling {
            Sampling::PerRound => (0..n).fold(ArmStats::new(), |s, _| s.update(arm.sample(rng))),
            Sampling::Aggregated => arm.sample_summary(n, rng),
        })
        .collect();
    let chosen = empirical_best(&stats);
    Ok(RunResult::finish(instance, chosen, &stats))
}
