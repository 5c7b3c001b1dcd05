use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::policy::HeuristicParams;
use crate::rng::{self, tags};
use crate::scalar::Scalar;

use super::ce::{cross_entropy_optimize, CeConfig, CeResult, ParamSpace};
use super::evaluate::{evaluate_policy, DecisionProblem, EvaluationSummary, Policy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub ce: CeConfig,
    pub bu_space: ParamSpace,
    pub static_space: ParamSpace,
    /// Independent CE runs per policy; the one with the lowest final cost is kept.
    pub restarts: usize,
    /// Rollouts of the final re-evaluation.
    pub n_mc_final: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            ce: CeConfig::default(),
            bu_space: ParamSpace::bu_default(),
            static_space: ParamSpace::static_default(),
            restarts: 3,
            n_mc_final: 5000,
        }
    }
}

/// One CE run and the final evaluation of its result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome<T: Scalar = f64> {
    pub restart: usize,
    pub master_seed: u64,
    pub ce: CeResult,
    pub evaluation: EvaluationSummary<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow<T: Scalar = f64> {
    /// `bu` or `static`.
    pub policy: String,
    /// Noise level the policy was optimized for; absent for the static baseline.
    pub sigma_eps: Option<T>,
    pub w_opt: Vec<f64>,
    pub selected_restart: usize,
    pub evaluation: EvaluationSummary<T>,
    pub restarts: Vec<RestartOutcome<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult<T: Scalar = f64> {
    pub final_seed: u64,
    pub bu_rows: Vec<StudyRow<T>>,
    pub static_row: Option<StudyRow<T>>,
}

impl<T: Scalar> StudyResult<T> {
    pub fn rows(&self) -> impl Iterator<Item = &StudyRow<T>> {
        self.bu_rows.iter().chain(self.static_row.iter())
    }
}

fn optimize_policy<T: Scalar, P>(
    problem: &DecisionProblem<T>,
    sigma_eps: T,
    space: &ParamSpace,
    cfg: &StudyConfig,
    final_seed: u64,
    to_policy: P,
) -> Result<(Vec<f64>, usize, EvaluationSummary<T>, Vec<RestartOutcome<T>>)>
where
    P: Fn(&[f64]) -> Result<Policy<T>> + Sync,
{
    let mut outcomes = Vec::with_capacity(cfg.restarts.max(1));
    for r in 0..cfg.restarts.max(1) {
        let seed = rng::child_seed(cfg.ce.master_seed, tags::CE_RESTART, r as u64);
        let ce_cfg = CeConfig {
            master_seed: seed,
            ..cfg.ce.clone()
        };
        let objective = |w: &[f64], crn: u64| {
            let policy = to_policy(w)?;
            Ok(evaluate_policy(problem, &policy, sigma_eps, ce_cfg.n_mc, ce_cfg.n_bu, crn)?
                .summary
                .mean_cost
                .to_f64_lossy())
        };
        let ce = cross_entropy_optimize(objective, space, &ce_cfg)?;
        let evaluation =
            evaluate_policy(problem, &to_policy(&ce.w_opt)?, sigma_eps, cfg.n_mc_final, cfg.ce.n_bu, final_seed)?.summary;
        outcomes.push(RestartOutcome {
            restart: r,
            master_seed: seed,
            ce,
            evaluation,
        });
    }
    let best = outcomes
        .iter()
        .min_by(|a, b| {
            a.evaluation
                .mean_cost
                .partial_cmp(&b.evaluation.mean_cost)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.restart.cmp(&b.restart))
        })
        .expect("at least one restart");
    Ok((best.ce.w_opt.clone(), best.restart, best.evaluation.clone(), outcomes))
}

/// Policy family searched by the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Bu,
    Static,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Bu => "bu",
            PolicyKind::Static => "static",
        }
    }
}

/// CE search with restarts for one policy family at one noise level, followed by the final
/// re-evaluation of every restart's optimum with `n_mc_final` rollouts under `final_seed`.
pub fn optimize_policy_kind<T: Scalar>(
    problem: &DecisionProblem<T>,
    kind: PolicyKind,
    sigma_eps: T,
    cfg: &StudyConfig,
    final_seed: u64,
) -> Result<StudyRow<T>> {
    cfg.ce.validate()?;
    let (space, row_sigma) = match kind {
        PolicyKind::Bu => (&cfg.bu_space, Some(sigma_eps)),
        PolicyKind::Static => (&cfg.static_space, None),
    };
    space.validate()?;
    let (w_opt, selected_restart, evaluation, restarts) =
        optimize_policy(problem, sigma_eps, space, cfg, final_seed, |w| match kind {
            PolicyKind::Bu => Ok(Policy::Bu(HeuristicParams::from_slice(w)?)),
            PolicyKind::Static => Ok(Policy::Static { h0: T::lit(w[0]) }),
        })?;
    Ok(StudyRow {
        policy: kind.name().into(),
        sigma_eps: row_sigma,
        w_opt,
        selected_restart,
        evaluation,
        restarts,
    })
}

/// Seed of the final re-evaluation shared by every row of a study.
pub fn final_eval_seed(master_seed: u64) -> u64 {
    rng::child_seed(master_seed, tags::FINAL_EVAL, 0)
}

/// Optimizes the Bayesian-updating heuristic for every noise level and the static baseline
/// once, then re-evaluates each optimum with `n_mc_final` rollouts under one common seed.
pub fn run_study<T: Scalar>(problem: &DecisionProblem<T>, sigma_eps_list: &[T], cfg: &StudyConfig) -> Result<StudyResult<T>> {
    cfg.ce.validate()?;
    cfg.bu_space.validate()?;
    cfg.static_space.validate()?;
    let final_seed = final_eval_seed(cfg.ce.master_seed);
    let bu_rows = sigma_eps_list
        .iter()
        .map(|&sigma| optimize_policy_kind(problem, PolicyKind::Bu, sigma, cfg, final_seed))
        .collect::<Result<Vec<_>>>()?;
    // the static policy never reads measurements, so any noise level gives the same row
    let static_row = match sigma_eps_list.first() {
        None => None,
        Some(&sigma) => Some(optimize_policy_kind(problem, PolicyKind::Static, sigma, cfg, final_seed)?),
    };
    Ok(StudyResult {
        final_seed,
        bu_rows,
        static_row,
    })
}
