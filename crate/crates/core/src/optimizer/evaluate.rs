use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consolidation::{ActionSchedule, ConsolidationModel, SettlementModel};
use crate::error::{PdtError, Result};
use crate::filter::{init_belief, Belief, FilterOptions, Measurement};
use crate::policy::{
    cost_of_model, heuristic_bu_decide, Action, CostBreakdown, CostParams, GateStatistic, HeuristicParams,
    IncrementGrid, Requirements,
};
use crate::priors::{sample_soil_with, SoilPriorSet, SoilSample};
use crate::rng::{self, tags};
use crate::scalar::Scalar;
use crate::stats;

/// Everything a policy rollout needs besides the policy and the noise level.
#[derive(Debug, Clone)]
pub struct DecisionProblem<T: Scalar = f64> {
    pub model: Arc<ConsolidationModel<T>>,
    pub priors: SoilPriorSet<T>,
    pub requirements: Requirements<T>,
    pub costs: CostParams<T>,
    pub grid: IncrementGrid<T>,
    pub gate: GateStatistic,
    pub filter: FilterOptions<T>,
}

impl<T: Scalar> DecisionProblem<T> {
    pub fn road_length(&self) -> T {
        self.model.geometry.road_length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Policy<T: Scalar = f64> {
    /// Bayesian-updating heuristic.
    Bu(HeuristicParams<T>),
    /// Initial surcharge only.
    Static { h0: T },
    /// Bayesian-updating heuristic run on a belief that knows the true soil exactly.
    Clairvoyant(HeuristicParams<T>),
}

impl<T: Scalar> Policy<T> {
    pub fn h0(&self) -> T {
        match self {
            Policy::Bu(w) | Policy::Clairvoyant(w) => w.h0,
            Policy::Static { h0 } => *h0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Bu(_) => "bu",
            Policy::Static { .. } => "static",
            Policy::Clairvoyant(_) => "clairvoyant",
        }
    }
}

/// Outcome of one Monte Carlo rollout, scored against the true soil.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord<T: Scalar = f64> {
    pub k: usize,
    pub truth: SoilSample<T>,
    /// Week at which the heuristic took its final decision, if it did.
    pub decision_week: Option<u32>,
    pub action: Action<T>,
    pub grid_exhausted: bool,
    pub s_t_max: T,
    pub ocr_t_max: T,
    pub cost: CostBreakdown<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMeans<T: Scalar = f64> {
    pub sur_initial: T,
    pub sur_increase: T,
    pub delay: T,
    pub ocr: T,
}

impl<T: Scalar> ComponentMeans<T> {
    pub fn sum(&self) -> T {
        self.sur_initial + self.sur_increase + self.delay + self.ocr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary<T: Scalar = f64> {
    pub policy: Policy<T>,
    pub sigma_eps: T,
    pub n_mc: usize,
    pub seed: u64,
    pub mean_cost: T,
    /// Sample standard deviation of the rollout costs.
    pub std_cost: T,
    /// Standard error of `mean_cost`.
    pub std_error: T,
    pub components: ComponentMeans<T>,
    pub settlement_compliance_rate: T,
    pub ocr_compliance_rate: T,
    pub increment_rate: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult<T: Scalar = f64> {
    pub summary: EvaluationSummary<T>,
    pub records: Vec<RolloutRecord<T>>,
}

/// Ground truth for rollout `(seed, k)`. Shared by every policy evaluated with that seed.
pub fn truth_for<T: Scalar>(priors: &SoilPriorSet<T>, seed: u64, k: usize) -> Result<SoilSample<T>> {
    let mut r = rng::stream(seed, tags::TRUTH, k as u64);
    Ok(sample_soil_with(priors, &mut r, 1)?[0])
}

/// Standard normal measurement noise for weeks `1..=weeks` of rollout `(seed, k)`. The same
/// draws are scaled by every σ_ε.
pub fn noise_for(seed: u64, k: usize, weeks: u32) -> Vec<f64> {
    let mut r = rng::stream(seed, tags::NOISE, k as u64);
    (0..weeks).map(|_| r.sample(StandardNormal)).collect()
}

/// Synthetic measurement sequence `z(t) = S_true(t) + σ_ε·ξ_t` for `t = 1..=weeks` under the
/// initial surcharge `h0`.
pub fn synthetic_measurements<T: Scalar>(
    model: &ConsolidationModel<T>,
    truth: &SoilSample<T>,
    h0: T,
    sigma_eps: T,
    xi: &[f64],
) -> Result<Vec<Measurement<T>>> {
    let m = SettlementModel::new(model, truth, &ActionSchedule::initial(h0))?;
    Ok(xi
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let t = (i + 1) as u32;
            Measurement {
                t,
                z_s: m.settlement(T::from_u32(t).unwrap()) + sigma_eps * T::lit(x),
                sigma_eps,
            }
        })
        .collect())
}

/// Runs the heuristic over the measurement sequence until it takes a final decision. Returns
/// the final schedule, the decision week and whether the grid was exhausted.
pub fn run_heuristic<T: Scalar>(
    problem: &DecisionProblem<T>,
    mut belief: Belief<T>,
    w: &HeuristicParams<T>,
    measurements: &[Measurement<T>],
) -> Result<(ActionSchedule<T>, Option<u32>, Action<T>, bool)> {
    let req = &problem.requirements;
    for z in measurements.iter().take_while(|z| z.t <= req.t_max) {
        belief = belief.update(z)?;
        let d = heuristic_bu_decide(&belief, z.t, w, req, &problem.grid, problem.gate)?;
        match d.action {
            Action::KeepMeasuring => continue,
            Action::Hold => return Ok((ActionSchedule::initial(w.h0), Some(z.t), d.action, false)),
            Action::Adjust { h_add } => {
                return Ok((
                    ActionSchedule::with_increment(w.h0, z.t, h_add),
                    Some(z.t),
                    d.action,
                    d.grid_exhausted,
                ))
            }
        }
    }
    Ok((ActionSchedule::initial(w.h0), None, Action::KeepMeasuring, false))
}

/// One rollout `k` of `policy` at noise level `sigma_eps`.
pub fn rollout<T: Scalar>(
    problem: &DecisionProblem<T>,
    policy: &Policy<T>,
    sigma_eps: T,
    n_bu: usize,
    seed: u64,
    k: usize,
) -> Result<RolloutRecord<T>> {
    let req = &problem.requirements;
    let truth = truth_for(&problem.priors, seed, k)?;
    let (schedule, decision_week, action, grid_exhausted) = match policy {
        Policy::Static { h0 } => (ActionSchedule::initial(*h0), None, Action::Hold, false),
        Policy::Bu(w) => {
            let xi = noise_for(seed, k, req.t_max);
            let zs = synthetic_measurements(&problem.model, &truth, w.h0, sigma_eps, &xi)?;
            let belief = init_belief(
                problem.model.clone(),
                &problem.priors,
                ActionSchedule::initial(w.h0),
                n_bu,
                rng::child_seed(seed, tags::FILTER, k as u64),
                problem.filter.clone(),
            )?;
            run_heuristic(problem, belief, w, &zs)?
        }
        Policy::Clairvoyant(w) => {
            let belief = Belief::from_soils(
                problem.model.clone(),
                vec![truth; 2],
                ActionSchedule::initial(w.h0),
                rng::stream(seed, tags::FILTER, k as u64),
                problem.filter.clone(),
            )?;
            let xi = vec![0.0; req.t_max as usize];
            let zs = synthetic_measurements(&problem.model, &truth, w.h0, sigma_eps, &xi)?;
            run_heuristic(problem, belief, w, &zs)?
        }
    };
    let m = SettlementModel::new(&problem.model, &truth, &schedule)?;
    let t = req.t_max_f();
    Ok(RolloutRecord {
        k,
        truth,
        decision_week,
        action,
        grid_exhausted,
        s_t_max: m.settlement(t),
        ocr_t_max: m.ocr(t),
        cost: cost_of_model(&m, &schedule, req, &problem.costs, problem.road_length()),
    })
}

/// Monte Carlo estimate of the expected total cost of `policy`. Rollout `k` uses streams keyed
/// on `(seed, k)` only, so every policy evaluated with the same seed sees the same ground
/// truths and the same standardized measurement noise.
pub fn evaluate_policy<T: Scalar>(
    problem: &DecisionProblem<T>,
    policy: &Policy<T>,
    sigma_eps: T,
    n_mc: usize,
    n_bu: usize,
    seed: u64,
) -> Result<EvaluationResult<T>> {
    if n_mc < 2 {
        return Err(PdtError::Config(format!("n_mc must be at least 2, got {n_mc}")));
    }
    if matches!(policy, Policy::Bu(_)) && !(sigma_eps > T::zero()) {
        return Err(PdtError::Domain("sigma_eps must be positive".into()));
    }
    let records = (0..n_mc)
        .into_par_iter()
        .map(|k| {
            rollout(problem, policy, sigma_eps, n_bu, seed, k).map_err(|e| PdtError::Rollout {
                k,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationResult {
        summary: summarize(policy, sigma_eps, seed, &records),
        records,
    })
}

pub fn summarize<T: Scalar>(policy: &Policy<T>, sigma_eps: T, seed: u64, records: &[RolloutRecord<T>]) -> EvaluationSummary<T> {
    let n = records.len();
    let col = |f: &dyn Fn(&RolloutRecord<T>) -> T| -> Vec<T> { records.iter().map(f).collect() };
    let frac = |f: &dyn Fn(&RolloutRecord<T>) -> bool| -> T {
        stats::mean(&col(&|r| if f(r) { T::one() } else { T::zero() }))
    };
    let totals = col(&|r| r.cost.total);
    let std_cost = stats::sample_std(&totals);
    EvaluationSummary {
        policy: *policy,
        sigma_eps,
        n_mc: n,
        seed,
        mean_cost: stats::mean(&totals),
        std_cost,
        std_error: std_cost / T::from_usize(n).unwrap().sqrt(),
        components: ComponentMeans {
            sur_initial: stats::mean(&col(&|r| r.cost.sur_initial)),
            sur_increase: stats::mean(&col(&|r| r.cost.sur_increase)),
            delay: stats::mean(&col(&|r| r.cost.delay)),
            ocr: stats::mean(&col(&|r| r.cost.ocr)),
        },
        settlement_compliance_rate: frac(&|r| r.cost.compliance.settlement_ok),
        ocr_compliance_rate: frac(&|r| r.cost.compliance.ocr_ok),
        increment_rate: frac(&|r| matches!(r.action, Action::Adjust { .. })),
    }
}
