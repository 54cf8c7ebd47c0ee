//! Fixed-budget best-arm identification with the two-stage TS-EBA design.
//!
//! * [`model`]: mean-parametrized arm distributions (Gaussian with known
//!   variance, Bernoulli), variance functions, Fisher information, KL.
//! * [`estimators`]: streaming per-arm statistics and Stage-1 confidence
//!   bands.
//! * [`policy`]: the TS-EBA state machine and baseline designs.
//! * [`bounds`]: worst-case and Bayes regret constants, misidentification
//!   oracles.
//! * [`harness`]: seeded, worker-count invariant Monte Carlo replications.

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod model;
pub mod policy;
pub mod seed;

pub use bounds::{
    bayes_constants, bound_report, minimax_constant, misid_normal_oracle, worst_gap,
    BayesBoundReport, BoundReport, MisidOracle, PriorSpec, Regime,
};
pub use error::{Error, Result};
pub use estimators::{conf_bounds, ArmStats, ConfBounds};
pub use harness::{
    bayes_eval, regret_decomposition_check, simulate, stage_one_coverage, worst_case_scan,
    AggregateStats, BayesEstimate, CoverageReport, PolicySpec, ScanFamily, ScanReport, SimPlan,
};
pub use model::{kl, ArmModel, BanditInstance, Family, ParamSpace};
pub use policy::{
    candidate_set, ideal_ratio, run, run_baseline, stage2_probs, Baseline, Phase, PolicyState,
    RunResult, Sampling, TsEbaConfig, Variant,
};
