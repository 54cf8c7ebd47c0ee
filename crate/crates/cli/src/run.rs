//! Executes a validated [`RunConfig`].

use tseba_core::seed::{stream_rng, TAG_BOUNDS};
use tseba_core::{
    bayes_constants, bayes_eval, bound_report, kl, simulate, worst_case_scan, ArmModel, Baseline, PolicySpec,
    Result, SimPlan,
};

use crate::config::{Job, RunConfig};
use crate::report::{KlRow, Report};

pub fn policy_label(policy: &PolicySpec) -> &'static str {
    match policy {
        PolicySpec::TsEba(_) => "ts-eba",
        PolicySpec::Baseline { kind: Baseline::UniformEba, .. } => "uniform",
        PolicySpec::Baseline { kind: Baseline::OracleNeymanEba, .. } => "oracle-neyman",
    }
}

pub fn execute(cfg: &RunConfig) -> Result<Report> {
    match &cfg.job {
        Job::Simulate { policy, instance } => {
            let stats = simulate(&SimPlan {
                policy: policy.clone(),
                instance: instance.clone(),
                reps: cfg.reps,
                base_seed: cfg.seed,
            })?;
            Ok(Report::Simulate { policy: policy_label(policy).into(), stats })
        }
        Job::Scan { policy, family, gaps } => {
            Ok(Report::Scan(worst_case_scan(policy, family, gaps, cfg.reps, cfg.seed)?))
        }
        Job::Bayes { policy, families, prior, prior_draws, constant_draws } => {
            let split = match policy {
                PolicySpec::TsEba(ts) => ts.split(),
                PolicySpec::Baseline { .. } => 0.0,
            };
            let mut rng = stream_rng(cfg.seed, 0, TAG_BOUNDS);
            let constants = bayes_constants(families, *prior, split, *constant_draws, &mut rng)?;
            let estimate = bayes_eval(policy, families, *prior, *prior_draws, cfg.reps, cfg.seed)?;
            Ok(Report::Bayes { budget: policy.budget(), reps_per_draw: cfg.reps, estimate, constants })
        }
        Job::Bounds { sigmas, budget, split } => Ok(Report::Bounds {
            arms: sigmas.len(),
            budget: *budget,
            split: *split,
            report: bound_report(sigmas, *budget, *split)?,
        }),
        Job::KlCheck { arms, epsilons } => {
            let mut rows = Vec::new();
            for (a, p) in arms.iter().enumerate() {
                for &eps in epsilons {
                    let q = ArmModel::new(p.family(), p.mean() + eps)?;
                    let value = kl(p, &q)?;
                    let ratio = value / (eps * eps);
                    let limit = p.fisher_info() / 2.0;
                    let rel_err = (ratio - limit).abs() / limit;
                    rows.push(KlRow {
                        arm: a,
                        mean: p.mean(),
                        eps,
                        kl: value,
                        ratio,
                        limit,
                        rel_err,
                        within_tol: rel_err <= 5.0 * eps,
                    });
                }
            }
            Ok(Report::KlCheck(rows))
        }
    }
}
