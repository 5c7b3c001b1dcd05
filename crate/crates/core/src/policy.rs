//! Requirement checks, construction costs and the surcharge decision rules.

use serde::{Deserialize, Serialize};

use crate::consolidation::{ActionSchedule, SettlementModel, Trajectory};
use crate::error::{PdtError, Result};
use crate::filter::{Belief, Functional};
use crate::scalar::{lit, Scalar};
use crate::stats;

/// Direction of the settlement requirement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettlementCriterion {
    /// Compliant when `S(t_max) ≥ s_target`: the surcharge must pre-complete this much settlement.
    #[default]
    Achieved,
    /// Compliant when `S(t_max) ≤ s_target`.
    Residual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Requirements<T: Scalar = f64> {
    pub s_target: T,
    pub ocr_target: T,
    pub t_max: u32,
    pub criterion: SettlementCriterion,
}

impl<T: Scalar> Default for Requirements<T> {
    fn default() -> Self {
        Self {
            s_target: lit(1.27),
            ocr_target: lit(1.10),
            t_max: 72,
            criterion: SettlementCriterion::Achieved,
        }
    }
}

impl<T: Scalar> Requirements<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_target > T::zero()) {
            return Err(PdtError::Config(format!("s_target must be positive, got {}", self.s_target)));
        }
        if !(self.ocr_target >= T::one()) {
            return Err(PdtError::Config(format!("ocr_target must be at least 1, got {}", self.ocr_target)));
        }
        if self.t_max < 1 {
            return Err(PdtError::Config("t_max must be at least 1 week".into()));
        }
        Ok(())
    }

    pub fn settlement_ok(&self, s: T) -> bool {
        match self.criterion {
            SettlementCriterion::Achieved => s >= self.s_target,
            SettlementCriterion::Residual => s <= self.s_target,
        }
    }

    pub fn ocr_ok(&self, ocr: T) -> bool {
        ocr >= self.ocr_target
    }

    pub fn t_max_f(&self) -> T {
        T::from_u32(self.t_max).unwrap()
    }

    pub fn cast<U: Scalar>(&self) -> Requirements<U> {
        Requirements {
            s_target: U::lit(self.s_target.to_f64_lossy()),
            ocr_target: U::lit(self.ocr_target.to_f64_lossy()),
            t_max: self.t_max,
            criterion: self.criterion,
        }
    }
}

/// Cost rates. Per-meter rates are multiplied by the road length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams<T: Scalar = f64> {
    /// SEK per m of initial surcharge height per m of road.
    pub c_sur_initial: T,
    /// SEK per m of increment height per m of road.
    pub c_sur_increase: T,
    /// Fixed SEK per m of road for bringing equipment back for an increment.
    pub remobilization: T,
    /// SEK per week of delay past t_max.
    pub c_delay: T,
    pub delay_cap: u32,
    /// SEK charged once when the OCR requirement fails.
    pub c_ocr_penalty: T,
}

impl<T: Scalar> CostParams<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c_sur_initial,
            self.c_sur_increase,
            self.remobilization,
            self.c_delay,
            self.c_ocr_penalty,
        ];
        if all.iter().any(|&c| !(c >= T::zero()) || !c.is_finite()) {
            return Err(PdtError::Config("cost parameters must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> CostParams<U> {
        CostParams {
            c_sur_initial: U::lit(self.c_sur_initial.to_f64_lossy()),
            c_sur_increase: U::lit(self.c_sur_increase.to_f64_lossy()),
            remobilization: U::lit(self.remobilization.to_f64_lossy()),
            c_delay: U::lit(self.c_delay.to_f64_lossy()),
            delay_cap: self.delay_cap,
            c_ocr_penalty: U::lit(self.c_ocr_penalty.to_f64_lossy()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compliance {
    pub settlement_ok: bool,
    pub ocr_ok: bool,
}

/// Cost components in SEK plus the compliance that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown<T: Scalar = f64> {
    pub sur_initial: T,
    pub sur_increase: T,
    pub delay: T,
    pub ocr: T,
    pub total: T,
    pub delay_weeks: u32,
    /// The target was not reached within the delay cap; delay is charged at the cap.
    pub delay_capped: bool,
    pub compliance: Compliance,
}

pub fn check_requirements<T: Scalar>(traj: &Trajectory<T>, req: &Requirements<T>) -> Result<Compliance> {
    let s = traj.settlement_at(req.t_max);
    let o = traj.ocr_at(req.t_max);
    match (s, o) {
        (Some(s), Some(o)) => Ok(Compliance {
            settlement_ok: req.settlement_ok(s),
            ocr_ok: req.ocr_ok(o),
        }),
        _ => Err(PdtError::TrajectoryTooShort {
            covered: traj.last_week(),
            needed: req.t_max,
        }),
    }
}

/// Total cost scored on a tabulated trajectory. The trajectory must reach `t_max`, and also
/// `t_max + delay_cap` whenever the target is missed at `t_max` and not reached on the covered
/// weeks.
pub fn total_cost<T: Scalar>(
    traj: &Trajectory<T>,
    schedule: &ActionSchedule<T>,
    req: &Requirements<T>,
    costs: &CostParams<T>,
    road_length: T,
) -> Result<CostBreakdown<T>> {
    let compliance = check_requirements(traj, req)?;
    let needed = req.t_max + costs.delay_cap;
    let s_at = |w: u32| traj.settlement_at(w);
    if !compliance.settlement_ok {
        let reached = (req.t_max..=needed.min(traj.last_week())).any(|w| s_at(w).is_some_and(|s| req.settlement_ok(s)));
        if !reached && traj.last_week() < needed {
            return Err(PdtError::TrajectoryTooShort {
                covered: traj.last_week(),
                needed,
            });
        }
    }
    Ok(assemble(|w| s_at(w).unwrap(), compliance, schedule, req, costs, road_length))
}

/// Total cost evaluated directly from a settlement model, without tabulating.
pub fn cost_of_model<T: Scalar>(
    model: &SettlementModel<T>,
    schedule: &ActionSchedule<T>,
    req: &Requirements<T>,
    costs: &CostParams<T>,
    road_length: T,
) -> CostBreakdown<T> {
    let t = req.t_max_f();
    let compliance = Compliance {
        settlement_ok: req.settlement_ok(model.settlement(t)),
        ocr_ok: req.ocr_ok(model.ocr(t)),
    };
    assemble(
        |w| model.settlement(T::from_u32(w).unwrap()),
        compliance,
        schedule,
        req,
        costs,
        road_length,
    )
}

fn assemble<T: Scalar, F: Fn(u32) -> T>(
    s_at: F,
    compliance: Compliance,
    schedule: &ActionSchedule<T>,
    req: &Requirements<T>,
    costs: &CostParams<T>,
    road_length: T,
) -> CostBreakdown<T> {
    let sur_initial = costs.c_sur_initial * schedule.h0 * road_length;
    let sur_increase = if schedule.has_increment() {
        (costs.remobilization + costs.c_sur_increase * schedule.h_add) * road_length
    } else {
        T::zero()
    };
    let (delay_weeks, delay_capped) = if compliance.settlement_ok {
        (0, false)
    } else {
        match (1..=costs.delay_cap).find(|&d| req.settlement_ok(s_at(req.t_max + d))) {
            Some(d) => (d, false),
            None => (costs.delay_cap, true),
        }
    };
    let delay = costs.c_delay * T::from_u32(delay_weeks).unwrap();
    let ocr = if compliance.ocr_ok { T::zero() } else { costs.c_ocr_penalty };
    CostBreakdown {
        sur_initial,
        sur_increase,
        delay,
        ocr,
        total: sur_initial + sur_increase + delay + ocr,
        delay_weeks,
        delay_capped,
        compliance,
    }
}

/// Parameters of the Bayesian-updating heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicParams<T: Scalar = f64> {
    pub h0: T,
    pub cov_th: T,
    pub p_th: T,
}

impl<T: Scalar> HeuristicParams<T> {
    pub fn new(h0: T, cov_th: T, p_th: T) -> Result<Self> {
        let w = Self { h0, cov_th, p_th };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h0 >= T::zero()) || !(self.cov_th > T::zero()) || !(self.p_th > T::zero() && self.p_th < T::one()) {
            return Err(PdtError::Domain(format!(
                "heuristic parameters out of range: h0 {} cov_th {} p_th {}",
                self.h0, self.cov_th, self.p_th
            )));
        }
        Ok(())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.h0.to_f64_lossy(), self.cov_th.to_f64_lossy(), self.p_th.to_f64_lossy()]
    }

    pub fn from_slice(w: &[f64]) -> Result<Self> {
        match w {
            [h0, cov, p] => Self::new(lit(*h0), lit(*cov), lit(*p)),
            _ => Err(PdtError::Domain(format!("expected 3 heuristic parameters, got {}", w.len()))),
        }
    }
}

/// Statistic compared against `cov_th`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateStatistic {
    /// Coefficient of variation of the posterior of S(t_max).
    #[default]
    Cov,
    /// Standard deviation of the posterior of S(t_max), m.
    Std,
}

/// Candidate increment heights `min, min + step, …, max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementGrid<T: Scalar = f64> {
    pub min: T,
    pub max: T,
    pub step: T,
}

impl<T: Scalar> Default for IncrementGrid<T> {
    fn default() -> Self {
        Self {
            min: lit(0.1),
            max: lit(3.0),
            step: lit(0.1),
        }
    }
}

impl<T: Scalar> IncrementGrid<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > T::zero()) || !(self.min > T::zero()) || self.max < self.min {
            return Err(PdtError::Config("increment grid needs 0 < min ≤ max and step > 0".into()));
        }
        Ok(())
    }

    /// Grid values, rounded to 1e-9 m so that decimal steps print cleanly.
    pub fn values(&self) -> Vec<T> {
        let (min, max, step) = (self.min.to_f64_lossy(), self.max.to_f64_lossy(), self.step.to_f64_lossy());
        let first = (min / step).round() as i64;
        let last = ((max / step) + 1e-9).floor() as i64;
        (first..=last)
            .map(|k| T::lit((k as f64 * step * 1e9).round() / 1e9))
            .filter(|&v| v >= self.min - lit(1e-12))
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> IncrementGrid<U> {
        IncrementGrid {
            min: U::lit(self.min.to_f64_lossy()),
            max: U::lit(self.max.to_f64_lossy()),
            step: U::lit(self.step.to_f64_lossy()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "action")]
pub enum Action<T: Scalar = f64> {
    /// Gate still closed; keep collecting measurements.
    KeepMeasuring,
    /// Requirement on track; no increment for the rest of the project.
    Hold,
    Adjust { h_add: T },
}

impl<T: Scalar> Action<T> {
    pub fn is_final(&self) -> bool {
        !matches!(self, Action::KeepMeasuring)
    }
}

/// Outcome of the Bayesian-updating heuristic with the quantities that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuDecision<T: Scalar = f64> {
    pub t: u32,
    pub action: Action<T>,
    pub gate_statistic: T,
    pub gate_open: bool,
    /// Probability of missing the settlement requirement with no increment.
    pub prob_not_compliant: T,
    /// Probability after the chosen increment.
    pub prob_after: Option<T>,
    /// No grid value met `p_th`; the largest one was chosen.
    pub grid_exhausted: bool,
}

/// Probability of missing the settlement requirement given per-member S(t_max) values.
pub fn prob_not_compliant_of<T: Scalar>(values: &[T], weights: &[T], req: &Requirements<T>) -> T {
    let w: Vec<T> = values
        .iter()
        .zip(weights)
        .map(|(&s, &w)| if req.settlement_ok(s) { T::zero() } else { w })
        .collect();
    stats::pairwise_sum(&w)
}

pub fn prob_not_compliant<T: Scalar>(belief: &Belief<T>, req: &Requirements<T>) -> T {
    let values = belief.values(&Functional::SettlementAt(req.t_max_f()));
    prob_not_compliant_of(&values, belief.weights(), req)
}

/// Probability of missing the requirement if `h_add` were placed at week `t`.
pub fn prob_not_compliant_with<T: Scalar>(belief: &Belief<T>, t: u32, h_add: T, req: &Requirements<T>) -> Result<T> {
    let schedule = ActionSchedule::with_increment(belief.schedule().h0, t, h_add);
    let values = belief.values_under(&schedule, &Functional::SettlementAt(req.t_max_f()))?;
    Ok(prob_not_compliant_of(&values, belief.weights(), req))
}

/// Value of the gate statistic for the current belief.
pub fn gate_statistic<T: Scalar>(belief: &Belief<T>, req: &Requirements<T>, gate: GateStatistic) -> Result<T> {
    let st = belief.posterior_stats(&Functional::SettlementAt(req.t_max_f()), &[])?;
    match gate {
        GateStatistic::Cov => st.cov(),
        GateStatistic::Std => Ok(st.std),
    }
}

/// Smallest grid height whose probability of non-compliance is at most `p_th`. Returns the
/// index into `grid` and that probability, or `None` with the last evaluated probability when
/// even the largest value fails.
///
/// With the achieved-settlement criterion every particle's S(t_max) grows with the increment,
/// so the probability is non-increasing along the grid and a bisection suffices. The residual
/// criterion is scanned linearly.
pub fn minimal_increment<T: Scalar, F: FnMut(T) -> Result<T>>(
    grid: &[T],
    p_th: T,
    criterion: SettlementCriterion,
    mut prob: F,
) -> Result<(Option<usize>, T)> {
    if grid.is_empty() {
        return Err(PdtError::Config("empty increment grid".into()));
    }
    if criterion == SettlementCriterion::Residual {
        let mut last = T::one();
        for (i, &h) in grid.iter().enumerate() {
            last = prob(h)?;
            if last <= p_th {
                return Ok((Some(i), last));
            }
        }
        return Ok((None, last));
    }
    let top = prob(grid[grid.len() - 1])?;
    if top > p_th {
        return Ok((None, top));
    }
    let (mut lo, mut hi, mut p_hi) = (0usize, grid.len() - 1, top);
    // invariant: grid[hi] passes; everything below lo fails
    while lo < hi {
        let mid = (lo + hi) / 2;
        let p = prob(grid[mid])?;
        if p <= p_th {
            hi = mid;
            p_hi = p;
        } else {
            lo = mid + 1;
        }
    }
    Ok((Some(hi), p_hi))
}

/// The Bayesian-updating heuristic at week `t`: gate on the posterior spread of S(t_max), then
/// hold if the requirement is on track, else pick the smallest sufficient increment.
pub fn heuristic_bu_decide<T: Scalar>(
    belief: &Belief<T>,
    t: u32,
    w: &HeuristicParams<T>,
    req: &Requirements<T>,
    grid: &IncrementGrid<T>,
    gate: GateStatistic,
) -> Result<BuDecision<T>> {
    if belief.schedule().has_increment() {
        return Err(PdtError::UnsupportedAction("decision requested after the increment".into()));
    }
    let stat = gate_statistic(belief, req, gate)?;
    let p_now = prob_not_compliant(belief, req);
    let mut d = BuDecision {
        t,
        action: Action::KeepMeasuring,
        gate_statistic: stat,
        gate_open: stat < w.cov_th,
        prob_not_compliant: p_now,
        prob_after: None,
        grid_exhausted: false,
    };
    if !d.gate_open {
        return Ok(d);
    }
    if p_now <= w.p_th {
        d.action = Action::Hold;
        return Ok(d);
    }
    if t < 1 {
        return Err(PdtError::Domain("an increment cannot be placed at week 0".into()));
    }
    let values = grid.values();
    let (idx, p) = minimal_increment(&values, w.p_th, req.criterion, |h| prob_not_compliant_with(belief, t, h, req))?;
    let chosen = idx.unwrap_or(values.len() - 1);
    d.grid_exhausted = idx.is_none();
    d.action = Action::Adjust { h_add: values[chosen] };
    d.prob_after = Some(p);
    Ok(d)
}

/// The static baseline never acts after placing `h0`.
pub fn heuristic_static_decide<T: Scalar>(_t: u32) -> Action<T> {
    Action::Hold
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consolidation::{simulate_trajectory, ConsolidationModel};
    use crate::priors::SoilSample;

    fn soil() -> SoilSample {
        SoilSample {
            sigma_l: 400.0,
            sigma_c: 55.0,
            gamma_cl: 16.0,
            gamma_emb: 20.8,
            m0: 4000.0,
            ml: 300.0,
            w_n: 0.75,
            cv: 0.2,
            ch: 0.5,
        }
    }

    fn costs() -> CostParams {
        CostParams {
            c_sur_initial: 4000.0,
            c_sur_increase: 5000.0,
            remobilization: 600.0,
            c_delay: 1e5,
            delay_cap: 52,
            c_ocr_penalty: 2e6,
        }
    }

    fn traj(schedule: &ActionSchedule) -> Trajectory {
        simulate_trajectory(&ConsolidationModel::highway73(), &soil(), schedule, 72 + 52).unwrap()
    }

    #[test]
    fn settlement_boundary_is_inclusive() {
        let req = Requirements::<f64>::default();
        assert!(req.settlement_ok(1.27));
        assert!(req.settlement_ok(1.30));
        assert!(!req.settlement_ok(1.2699));
        assert!(!req.ocr_ok(1.09));
        assert!(req.ocr_ok(1.10));
    }

    #[test]
    fn residual_criterion_flips_direction() {
        let req = Requirements {
            criterion: SettlementCriterion::Residual,
            ..Requirements::<f64>::default()
        };
        assert!(req.settlement_ok(1.0));
        assert!(!req.settlement_ok(1.3));
    }

    #[test]
    fn compliant_run_costs_only_the_surcharge() {
        let sch = ActionSchedule::initial(1.5);
        let t = traj(&sch);
        let req = Requirements {
            s_target: 0.5,
            ..Requirements::default()
        };
        let c = total_cost(&t, &sch, &req, &costs(), 550.0).unwrap();
        assert!(c.compliance.settlement_ok && c.compliance.ocr_ok);
        assert_eq!(c.total, 4000.0 * 1.5 * 550.0);
        assert_eq!(c.total, c.sur_initial);
    }

    #[test]
    fn increment_adds_its_cost() {
        let base = ActionSchedule::initial(1.0);
        let inc = ActionSchedule::with_increment(1.0, 20, 0.5);
        let req = Requirements {
            s_target: 0.3,
            ..Requirements::default()
        };
        let a = total_cost(&traj(&base), &base, &req, &costs(), 550.0).unwrap();
        let b = total_cost(&traj(&inc), &inc, &req, &costs(), 550.0).unwrap();
        assert_eq!(b.sur_initial, a.sur_initial);
        assert!(b.sur_increase >= 600.0 * 550.0);
        assert_eq!(b.total, b.sur_initial + b.sur_increase + b.delay + b.ocr);
    }

    #[test]
    fn delay_counts_weeks_past_t_max() {
        let sch = ActionSchedule::initial(1.0);
        let t = traj(&sch);
        let s72 = t.settlement_at(72).unwrap();
        let s80 = t.settlement_at(80).unwrap();
        let req = Requirements {
            s_target: (s72 + s80) / 2.0,
            ..Requirements::default()
        };
        let c = total_cost(&t, &sch, &req, &costs(), 550.0).unwrap();
        let expected = (73..=124).find(|&w| t.settlement_at(w).unwrap() >= req.s_target).unwrap() - 72;
        assert_eq!(c.delay_weeks, expected);
        assert!(c.delay_weeks > 0 && c.delay_weeks <= 8);
        assert_eq!(c.delay, 1e5 * expected as f64);
        assert!(!c.delay_capped);
    }

    #[test]
    fn unreachable_target_charged_at_cap() {
        let sch = ActionSchedule::initial(0.0);
        let req = Requirements {
            s_target: 50.0,
            ..Requirements::default()
        };
        let c = total_cost(&traj(&sch), &sch, &req, &costs(), 550.0).unwrap();
        assert!(c.delay_capped);
        assert_eq!(c.delay_weeks, 52);
    }

    #[test]
    fn short_trajectory_rejected() {
        let sch = ActionSchedule::initial(0.0);
        let t = simulate_trajectory(&ConsolidationModel::highway73(), &soil(), &sch, 60).unwrap();
        assert!(matches!(
            check_requirements(&t, &Requirements::default()),
            Err(PdtError::TrajectoryTooShort { .. })
        ));
    }

    #[test]
    fn model_and_table_costs_agree() {
        let sch = ActionSchedule::with_increment(0.8, 15, 0.7);
        let t = traj(&sch);
        let m = SettlementModel::new(&ConsolidationModel::highway73(), &soil(), &sch).unwrap();
        let req = Requirements::default();
        assert_eq!(
            total_cost(&t, &sch, &req, &costs(), 550.0).unwrap(),
            cost_of_model(&m, &sch, &req, &costs(), 550.0)
        );
    }

    #[test]
    fn grid_values() {
        let g = IncrementGrid::<f64>::default().values();
        assert_eq!(g.len(), 30);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[2], 0.3);
        assert_eq!(g[29], 3.0);
    }

    #[test]
    fn bisection_matches_scan() {
        let grid = IncrementGrid::<f64>::default().values();
        for cut in 0..=31usize {
            let prob = |h: f64| Ok(if h >= cut as f64 * 0.1 - 1e-9 { 0.1 } else { 0.9 });
            let (idx, _) = minimal_increment(&grid, 0.5, SettlementCriterion::Achieved, prob).unwrap();
            let scan = grid.iter().position(|&h| prob(h).unwrap() <= 0.5);
            assert_eq!(idx, scan, "cut {cut}");
        }
    }

    #[test]
    fn static_never_acts() {
        for t in [1, 10, 72] {
            assert_eq!(heuristic_static_decide::<f64>(t), Action::Hold);
        }
    }

    #[test]
    fn heuristic_parameter_ranges() {
        assert!(HeuristicParams::new(1.0, 0.05, 0.43).is_ok());
        assert!(HeuristicParams::new(-1.0, 0.05, 0.43).is_err());
        assert!(HeuristicParams::new(1.0, 0.0, 0.43).is_err());
        assert!(HeuristicParams::new(1.0, 0.05, 1.0).is_err());
    }
}
