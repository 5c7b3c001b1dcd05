use std::sync::Arc;

use pdt_core::consolidation::simulate_trajectory;
use pdt_core::filter::{init_belief, FilterOptions, Functional};
use pdt_core::policy::{
    gate_statistic, heuristic_bu_decide, minimal_increment, prob_not_compliant_with, total_cost, Action, GateStatistic,
    IncrementGrid, SettlementCriterion,
};
use pdt_core::priors::sample_soil;
use pdt_core::scenario::Scenario;
use pdt_core::{ActionSchedule, Belief, CostParams, HeuristicParams, Measurement, PdtError, Requirements};
use proptest::prelude::*;

fn measured_belief(seed: u64, weeks: u32) -> Belief {
    let sc = Scenario::bundled();
    let ctx = Arc::new(sc.model().unwrap());
    let mut b = init_belief(ctx, &sc.priors().unwrap(), ActionSchedule::initial(1.09), 200, seed, FilterOptions::default())
        .unwrap();
    for t in 1..=weeks {
        // a slow site: readings below the prior mean push the belief towards non-compliance
        b = b.update(&Measurement::new(t, 0.012 * t as f64, 0.1).unwrap()).unwrap();
    }
    b
}

fn costs() -> CostParams {
    Scenario::bundled().costs()
}

#[test]
fn bisection_agrees_with_exhaustive_grid() {
    let b = measured_belief(3, 8);
    let req = Requirements::default();
    let grid = IncrementGrid::default().values();
    let probs: Vec<f64> = grid.iter().map(|&h| prob_not_compliant_with(&b, 8, h, &req).unwrap()).collect();
    for w in probs.windows(2) {
        assert!(w[1] <= w[0]);
    }
    for p_th in [0.0, 0.01, 0.05, 0.1, 0.2, 0.43, 0.6, 0.9, 1.0] {
        let oracle = probs.iter().position(|&p| p <= p_th);
        let (idx, p) =
            minimal_increment(&grid, p_th, SettlementCriterion::Achieved, |h| prob_not_compliant_with(&b, 8, h, &req))
                .unwrap();
        assert_eq!(idx, oracle, "p_th {p_th}");
        if let Some(i) = idx {
            assert_eq!(p, probs[i]);
        }
    }
}

#[test]
fn decision_after_increment_is_rejected() {
    let b = measured_belief(4, 5).apply_action(5, 0.5).unwrap();
    let w = HeuristicParams::new(1.09, 1.0, 0.43).unwrap();
    let r = heuristic_bu_decide(&b, 6, &w, &Requirements::default(), &IncrementGrid::default(), GateStatistic::Cov);
    assert!(matches!(r, Err(PdtError::UnsupportedAction(_))));
    assert!(matches!(b.apply_action(7, 0.1), Err(PdtError::UnsupportedAction(_))));
}

#[test]
fn cost_components_add_up_on_tabulated_trajectories() {
    let sc = Scenario::bundled();
    let model = sc.model().unwrap();
    let req = sc.requirements();
    let c = costs();
    for (i, soil) in sample_soil(&sc.priors().unwrap(), 21, 40).unwrap().iter().enumerate() {
        let schedule = if i % 2 == 0 {
            ActionSchedule::initial(0.5 + 0.05 * i as f64)
        } else {
            ActionSchedule::with_increment(1.0, 10 + i as u32, 0.3)
        };
        let traj = simulate_trajectory(&model, soil, &schedule, req.t_max + c.delay_cap).unwrap();
        let b = total_cost(&traj, &schedule, &req, &c, 550.0).unwrap();
        let sum = b.sur_initial + b.sur_increase + b.delay + b.ocr;
        assert!((b.total - sum).abs() <= 1e-9 * b.total);
        assert_eq!(b.sur_initial, c.c_sur_initial * schedule.h0 * 550.0);
        assert_eq!(b.delay, c.c_delay * b.delay_weeks as f64);
        assert_eq!(b.ocr > 0.0, !b.compliance.ocr_ok);
        assert_eq!(b.delay_weeks == 0, b.compliance.settlement_ok);
        if schedule.has_increment() {
            let expect = (c.c_sur_increase * 0.3 + c.remobilization) * 550.0;
            assert!((b.sur_increase - expect).abs() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gate_opens_exactly_below_threshold(seed in 0u64..1000, weeks in 1u32..15, cov_th in 0.001f64..0.5) {
        let b = measured_belief(seed, weeks);
        let req = Requirements::default();
        let w = HeuristicParams::new(1.09, cov_th, 0.43).unwrap();
        let d = heuristic_bu_decide(&b, weeks, &w, &req, &IncrementGrid::default(), GateStatistic::Cov).unwrap();
        let stat = gate_statistic(&b, &req, GateStatistic::Cov).unwrap();
        let st = b.posterior_stats(&Functional::SettlementAt(72.0), &[]).unwrap();
        prop_assert_eq!(stat, st.std / st.mean);
        prop_assert_eq!(d.gate_open, stat < cov_th);
        prop_assert_eq!(d.action.is_final(), d.gate_open);
    }

    #[test]
    fn larger_p_th_never_asks_for_more(seed in 0u64..1000, weeks in 1u32..12, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let belief = measured_belief(seed, weeks);
        let req = Requirements::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let decide = |p_th| {
            let w = HeuristicParams::new(1.09, 1.0, p_th).unwrap();
            heuristic_bu_decide(&belief, weeks, &w, &req, &IncrementGrid::default(), GateStatistic::Cov).unwrap()
        };
        let h = |d: &pdt_core::policy::BuDecision| match d.action {
            Action::Adjust { h_add } => h_add,
            _ => 0.0,
        };
        let (d_lo, d_hi) = (decide(lo), decide(hi));
        prop_assert!(h(&d_hi) <= h(&d_lo));
        if let Action::Adjust { .. } = d_hi.action {
            prop_assert!(d_hi.prob_not_compliant > hi);
        }
    }

    #[test]
    fn cost_is_additive_and_non_negative(h0 in 0.0f64..3.0, seed in any::<u64>()) {
        let sc = Scenario::bundled();
        let model = sc.model().unwrap();
        let soil = sample_soil(&sc.priors().unwrap(), seed, 1).unwrap()[0];
        let req = sc.requirements();
        let c = costs();
        let schedule = ActionSchedule::initial(h0);
        let traj = simulate_trajectory(&model, &soil, &schedule, req.t_max + c.delay_cap).unwrap();
        let b = total_cost(&traj, &schedule, &req, &c, 550.0).unwrap();
        prop_assert!(b.total >= 0.0);
        prop_assert!((b.total - (b.sur_initial + b.sur_increase + b.delay + b.ocr)).abs() <= 1e-9 * b.total.max(1.0));
        prop_assert!(b.delay_weeks <= c.delay_cap);
    }
}
