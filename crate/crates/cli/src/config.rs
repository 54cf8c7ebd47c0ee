//! TOML run configuration.
//!
//! A document is deserialized into a raw mirror of the file (unknown keys
//! rejected), then every field is checked by building the core objects it
//! describes, so a bad value is reported before any simulation starts.

use std::fmt;
use std::path::PathBuf;

use serde::Deserialize;
use thiserror::Error;
use tseba_core::harness::log_gap_grid;
use tseba_core::harness::prior_instance;
use tseba_core::{
    ArmModel, BanditInstance, Baseline, Family, ParamSpace, PolicySpec, PriorSpec, Sampling, ScanFamily,
    TsEbaConfig, Variant,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("parse error: {0}")]
    Syntax(String),

    #[error("invalid `{field}`: {message}")]
    Field { field: String, message: String },
}

fn field_err(field: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError::Field { field: field.to_string(), message: message.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Scan,
    Bayes,
    Bounds,
    KlCheck,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Simulate => "simulate",
            Command::Scan => "scan",
            Command::Bayes => "bayes",
            Command::Bounds => "bounds",
            Command::KlCheck => "kl-check",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FamilyName {
    Gaussian,
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum PolicyName {
    #[default]
    TsEba,
    Uniform,
    OracleNeyman,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum VariantName {
    VarianceBased,
    UniformOnCandidates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum SamplingName {
    PerRound,
    Aggregated,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    c_min: Option<f64>,
    c_max: Option<f64>,
    points: Option<usize>,
    gaps: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrior {
    kind: String,
    lo: Option<f64>,
    hi: Option<f64>,
    mean: Option<f64>,
    sd: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<Command>,
    family: Option<FamilyName>,
    arms: Option<usize>,
    means: Option<Vec<f64>>,
    sigmas: Option<Vec<f64>>,
    space: Option<[f64; 2]>,
    #[serde(rename = "T", alias = "budget")]
    budget: Option<u64>,
    r: Option<f64>,
    variant: Option<VariantName>,
    radius_mult: Option<f64>,
    policy: Option<PolicyName>,
    sampling: Option<SamplingName>,
    #[serde(alias = "reps_per_draw")]
    reps: Option<u64>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    format: Option<Format>,
    scan: Option<RawScan>,
    prior: Option<RawPrior>,
    prior_draws: Option<u64>,
    constant_draws: Option<u64>,
    epsilons: Option<Vec<f64>>,
}

pub const DEFAULT_SPLIT: f64 = 0.2;
pub const DEFAULT_RADIUS_MULT: f64 = 1.0;
pub const DEFAULT_CONSTANT_DRAWS: u64 = 100_000;
pub const DEFAULT_SCAN_POINTS: usize = 15;
pub const DEFAULT_EPSILONS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// The work a validated configuration describes.
#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Simulate {
        policy: PolicySpec,
        instance: BanditInstance,
    },
    Scan {
        policy: PolicySpec,
        family: ScanFamily,
        gaps: Vec<f64>,
    },
    Bayes {
        policy: PolicySpec,
        families: Vec<Family>,
        prior: PriorSpec,
        prior_draws: u64,
        constant_draws: u64,
    },
    Bounds {
        sigmas: Vec<f64>,
        budget: u64,
        split: f64,
    },
    KlCheck {
        arms: Vec<ArmModel>,
        epsilons: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub job: Job,
    /// Replications per simulated instance (per prior draw for `bayes`).
    /// Zero for commands that do not simulate.
    pub reps: u64,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
}

/// Command-line overrides applied on top of a parsed document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn apply(mut self, ov: &Overrides) -> Result<Self, ConfigError> {
        if let Some(seed) = ov.seed {
            self.seed = seed;
        }
        if let Some(reps) = ov.reps {
            if self.simulates() && reps == 0 {
                return Err(field_err("reps", "must be at least 1"));
            }
            self.reps = reps;
        }
        if let Some(out) = &ov.output {
            self.output = Some(out.clone());
        }
        if let Some(fmt) = ov.format {
            self.format = fmt;
        }
        Ok(self)
    }

    fn simulates(&self) -> bool {
        matches!(self.command, Command::Simulate | Command::Scan | Command::Bayes)
    }
}

/// Parses and validates a document that names its own `command`.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_for(text, None)
}

/// Parses a document for `command`. The document may omit `command`; if it
/// names one, the two must agree.
pub fn parse_config_for(text: &str, command: Option<Command>) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| locate(text, &e))?;
    let command = match (raw.command, command) {
        (Some(a), Some(b)) if a != b => {
            return Err(field_err("command", format!("document says `{a}` but `{b}` was requested")))
        }
        (Some(c), _) | (None, Some(c)) => c,
        (None, None) => return Err(field_err("command", "missing")),
    };
    build(raw, command)
}

fn locate(text: &str, err: &toml::de::Error) -> ConfigError {
    match err.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            ConfigError::Parse { line, column, message: err.message().to_string() }
        }
        None => ConfigError::Syntax(err.message().to_string()),
    }
}

fn require<T>(value: Option<T>, field: &str) -> Result<T, ConfigError> {
    value.ok_or_else(|| field_err(field, "missing"))
}

fn build(raw: RawConfig, command: Command) -> Result<RunConfig, ConfigError> {
    let reps = match command {
        Command::Simulate | Command::Scan | Command::Bayes => {
            let reps = require(raw.reps, "reps")?;
            if reps == 0 {
                return Err(field_err("reps", "must be at least 1"));
            }
            reps
        }
        Command::Bounds | Command::KlCheck => raw.reps.unwrap_or(0),
    };
    let job = match command {
        Command::Simulate => {
            let instance = instance(&raw)?;
            Job::Simulate { policy: policy(&raw, instance.k())?, instance }
        }
        Command::Scan => scan_job(&raw)?,
        Command::Bayes => bayes_job(&raw)?,
        Command::Bounds => bounds_job(&raw)?,
        Command::KlCheck => kl_job(&raw)?,
    };
    Ok(RunConfig {
        command,
        job,
        reps,
        seed: raw.seed.unwrap_or(0),
        output: raw.output,
        format: raw.format.unwrap_or_default(),
    })
}

/// `K` from `arms`, `means` and `sigmas`, which must agree when present.
fn arm_count(raw: &RawConfig) -> Result<usize, ConfigError> {
    let mut k = raw.arms;
    for (field, len) in [
        ("means", raw.means.as_ref().map(Vec::len)),
        ("sigmas", raw.sigmas.as_ref().map(Vec::len)),
    ] {
        match (k, len) {
            (Some(a), Some(b)) if a != b => {
                return Err(field_err(field, format!("has {b} entries but K = {a}")));
            }
            (None, Some(b)) => k = Some(b),
            _ => {}
        }
    }
    let k = k.ok_or_else(|| field_err("arms", "K is not given by `arms`, `means` or `sigmas`"))?;
    if k < 2 {
        return Err(field_err("arms", format!("need K >= 2, got {k}")));
    }
    Ok(k)
}

fn gaussian_sigmas(raw: &RawConfig) -> Result<Vec<f64>, ConfigError> {
    let sigmas = require(raw.sigmas.clone(), "sigmas")?;
    if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(field_err("sigmas", format!("standard deviations must be positive, got {s}")));
    }
    Ok(sigmas)
}

fn no_bernoulli_sigmas(raw: &RawConfig) -> Result<(), ConfigError> {
    if raw.sigmas.is_some() {
        return Err(field_err("sigmas", "Bernoulli variances follow from the means; drop `sigmas`"));
    }
    Ok(())
}

fn space(raw: &RawConfig) -> Result<Option<ParamSpace>, ConfigError> {
    raw.space
        .map(|[lo, hi]| ParamSpace::new(lo, hi).map_err(|e| field_err("space", e)))
        .transpose()
}

fn instance(raw: &RawConfig) -> Result<BanditInstance, ConfigError> {
    arm_count(raw)?;
    let family = require(raw.family, "family")?;
    let means = require(raw.means.clone(), "means")?;
    let space = space(raw)?;
    let built = match family {
        FamilyName::Gaussian => {
            let sigmas = gaussian_sigmas(raw)?;
            match space {
                Some(sp) => means
                    .iter()
                    .zip(&sigmas)
                    .map(|(&m, &s)| ArmModel::gaussian(m, s * s))
                    .collect::<tseba_core::Result<Vec<_>>>()
                    .and_then(|arms| BanditInstance::new(arms, sp)),
                None => BanditInstance::gaussian(&means, &sigmas),
            }
        }
        FamilyName::Bernoulli => {
            no_bernoulli_sigmas(raw)?;
            BanditInstance::bernoulli_in(&means, space.unwrap_or_else(ParamSpace::bernoulli_default))
        }
    };
    built.map_err(|e| field_err("means", e))
}

fn split(raw: &RawConfig) -> Result<f64, ConfigError> {
    let r = raw.r.unwrap_or(DEFAULT_SPLIT);
    if !(r > 0.0 && r < 1.0) {
        return Err(field_err("r", format!("must lie in (0,1), got {r}")));
    }
    Ok(r)
}

fn budget(raw: &RawConfig) -> Result<u64, ConfigError> {
    let t = require(raw.budget, "T")?;
    if t == 0 {
        return Err(field_err("T", "must be positive"));
    }
    Ok(t)
}

fn policy(raw: &RawConfig, k: usize) -> Result<PolicySpec, ConfigError> {
    let budget = budget(raw)?;
    let sampling = match raw.sampling {
        Some(SamplingName::Aggregated) => Sampling::Aggregated,
        Some(SamplingName::PerRound) | None => Sampling::PerRound,
    };
    let kind = match raw.policy.unwrap_or_default() {
        PolicyName::TsEba => None,
        PolicyName::Uniform => Some(Baseline::UniformEba),
        PolicyName::OracleNeyman => Some(Baseline::OracleNeymanEba),
    };
    if let Some(kind) = kind {
        return Ok(PolicySpec::Baseline { kind, budget, sampling });
    }
    let variant = match raw.variant {
        Some(VariantName::UniformOnCandidates) => Variant::UniformOnCandidates,
        Some(VariantName::VarianceBased) | None => Variant::VarianceBased,
    };
    let cfg = TsEbaConfig::new(budget, split(raw)?, k)
        .map_err(|e| field_err("r", e))?
        .with_variant(variant)
        .with_sampling(sampling)
        .with_radius_mult(raw.radius_mult.unwrap_or(DEFAULT_RADIUS_MULT))
        .map_err(|e| field_err("radius_mult", e))?;
    Ok(PolicySpec::TsEba(cfg))
}

fn scan_job(raw: &RawConfig) -> Result<Job, ConfigError> {
    if raw.means.is_some() {
        return Err(field_err("means", "scan builds its own adversarial instances; drop `means`"));
    }
    let k = arm_count(raw)?;
    let family = match require(raw.family, "family")? {
        FamilyName::Gaussian => ScanFamily::Gaussian { sigmas: gaussian_sigmas(raw)? },
        FamilyName::Bernoulli => {
            no_bernoulli_sigmas(raw)?;
            ScanFamily::Bernoulli { arms: k }
        }
    };
    let policy = policy(raw, k)?;
    let grid = require(raw.scan.as_ref(), "scan")?;
    let gaps = match &grid.gaps {
        Some(gaps) => {
            if grid.c_min.is_some() || grid.c_max.is_some() || grid.points.is_some() {
                return Err(field_err("scan.gaps", "give either `gaps` or `c_min`/`c_max`/`points`, not both"));
            }
            gaps.clone()
        }
        None => log_gap_grid(
            require(grid.c_min, "scan.c_min")?,
            require(grid.c_max, "scan.c_max")?,
            grid.points.unwrap_or(DEFAULT_SCAN_POINTS),
            policy.budget(),
        )
        .map_err(|e| field_err("scan", e))?,
    };
    if gaps.is_empty() {
        return Err(field_err("scan.gaps", "grid is empty"));
    }
    for &gap in &gaps {
        if !(gap.is_finite() && gap > 0.0) {
            return Err(field_err("scan.gaps", format!("gaps must be positive, got {gap}")));
        }
        family.instance(gap).map_err(|e| field_err("scan.gaps", e))?;
    }
    Ok(Job::Scan { policy, family, gaps })
}

fn prior(raw: &RawConfig) -> Result<PriorSpec, ConfigError> {
    let p = require(raw.prior.as_ref(), "prior")?;
    match p.kind.as_str() {
        "uniform" => {
            if p.mean.is_some() || p.sd.is_some() {
                return Err(field_err("prior", "a uniform prior takes `lo` and `hi`"));
            }
            PriorSpec::uniform(require(p.lo, "prior.lo")?, require(p.hi, "prior.hi")?)
                .map_err(|e| field_err("prior", e))
        }
        "normal" => Err(field_err(
            "prior",
            "normal priors are not supported by the Bayes integrators; use kind = \"uniform\"",
        )),
        other => Err(field_err("prior.kind", format!("unknown prior `{other}`"))),
    }
}

fn bayes_job(raw: &RawConfig) -> Result<Job, ConfigError> {
    if raw.means.is_some() {
        return Err(field_err("means", "means are drawn from the prior; drop `means`"));
    }
    let k = arm_count(raw)?;
    let families = match require(raw.family, "family")? {
        FamilyName::Gaussian => gaussian_sigmas(raw)?
            .iter()
            .map(|s| Family::gaussian(s * s))
            .collect::<tseba_core::Result<Vec<_>>>()
            .map_err(|e| field_err("sigmas", e))?,
        FamilyName::Bernoulli => {
            no_bernoulli_sigmas(raw)?;
            vec![Family::Bernoulli; k]
        }
    };
    let prior = prior(raw)?;
    let (lo, hi) = prior.uniform_bounds().map_err(|e| field_err("prior", e))?;
    if hi <= lo {
        return Err(field_err("prior", "the prior needs lo < hi to have a density"));
    }
    prior_instance(&families, &vec![0.5 * (lo + hi); k], prior).map_err(|e| field_err("prior", e))?;
    let prior_draws = require(raw.prior_draws, "prior_draws")?;
    if prior_draws == 0 {
        return Err(field_err("prior_draws", "must be at least 1"));
    }
    let constant_draws = raw.constant_draws.unwrap_or(DEFAULT_CONSTANT_DRAWS);
    if constant_draws < 10_000 {
        return Err(field_err("constant_draws", format!("need at least 10^4, got {constant_draws}")));
    }
    Ok(Job::Bayes { policy: policy(raw, k)?, families, prior, prior_draws, constant_draws })
}

fn bounds_job(raw: &RawConfig) -> Result<Job, ConfigError> {
    arm_count(raw)?;
    let sigmas = match require(raw.family, "family")? {
        FamilyName::Gaussian => gaussian_sigmas(raw)?,
        FamilyName::Bernoulli => instance(raw)?.std_devs(),
    };
    let budget = budget(raw)?;
    let split = split(raw)?;
    Ok(Job::Bounds { sigmas, budget, split })
}

fn kl_job(raw: &RawConfig) -> Result<Job, ConfigError> {
    arm_count(raw)?;
    let means = require(raw.means.clone(), "means")?;
    let epsilons = raw.epsilons.clone().unwrap_or_else(|| DEFAULT_EPSILONS.to_vec());
    if epsilons.is_empty() {
        return Err(field_err("epsilons", "list is empty"));
    }
    if let Some(e) = epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(field_err("epsilons", format!("must be positive, got {e}")));
    }
    let family = match require(raw.family, "family")? {
        FamilyName::Gaussian => {
            let sigmas = gaussian_sigmas(raw)?;
            sigmas.iter().map(|s| Family::gaussian(s * s)).collect::<tseba_core::Result<Vec<_>>>()
        }
        FamilyName::Bernoulli => {
            no_bernoulli_sigmas(raw)?;
            Ok(vec![Family::Bernoulli; means.len()])
        }
    }
    .map_err(|e| field_err("sigmas", e))?;
    let arms = family
        .iter()
        .zip(&means)
        .map(|(f, &m)| ArmModel::new(*f, m))
        .collect::<tseba_core::Result<Vec<_>>>()
        .map_err(|e| field_err("means", e))?;
    for arm in &arms {
        for &eps in &epsilons {
            ArmModel::new(arm.family(), arm.mean() + eps).map_err(|e| {
                field_err("epsilons", format!("mean {} + {eps} leaves the family: {e}", arm.mean()))
            })?;
        }
    }
    Ok(Job::KlCheck { arms, epsilons })
}
