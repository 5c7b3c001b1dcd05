use pdt_core::optimizer::{noise_for, rollout, synthetic_measurements, truth_for, Policy};
use pdt_core::policy::{Action, IncrementGrid};
use pdt_core::rng::{self, tags};
use pdt_core::scenario::Scenario;
use pdt_core::session::{replay, SessionEvent, SessionStatus};
use pdt_core::{HeuristicParams, PdtError, SessionLog, TwinSession};

fn fig_w() -> HeuristicParams {
    HeuristicParams::new(1.09, 0.05, 0.43).unwrap()
}

// Synthetic site: measurements of the ground truth for rollout (seed, k) at σ_ε = 0.05.
fn site(sc: &Scenario, seed: u64, k: usize) -> Vec<(u32, f64)> {
    let p = sc.problem::<f64>().unwrap();
    let truth = truth_for(&p.priors, seed, k).unwrap();
    synthetic_measurements(&p.model, &truth, 1.09, 0.05, &noise_for(seed, k, 72))
        .unwrap()
        .into_iter()
        .map(|z| (z.t, z.z_s))
        .collect()
}

/// Drives a session until the heuristic commits, accepting each recommendation.
fn drive(s: &mut TwinSession, zs: &[(u32, f64)]) -> Option<(u32, Action)> {
    for &(t, z) in zs {
        let out = s.measure(t, z).unwrap();
        if out.status == SessionStatus::DecisionPending {
            let rec = out.recommendation.unwrap();
            let h = match rec.action {
                Action::Adjust { h_add } => h_add,
                _ => 0.0,
            };
            s.commit(h).unwrap();
            return Some((t, rec.action));
        }
    }
    None
}

#[test]
fn informative_measurement_shrinks_cov() {
    let sc = Scenario::bundled();
    let mut shrunk = 0;
    for k in 0..100 {
        let zs = site(&sc, 500, k);
        let mut s = TwinSession::new(&sc, 1000 + k as u64, fig_w(), Some(200)).unwrap();
        let before = s.summary().unwrap().settlement_t_max_m.cov.unwrap();
        let (t, z) = zs[9];
        let after = s.measure(t, z).unwrap().summary.settlement_t_max_m.cov.unwrap();
        if after <= before {
            shrunk += 1;
        }
    }
    assert!(shrunk >= 95, "{shrunk}/100");
}

#[test]
fn session_matches_offline_rollout() {
    let sc = Scenario::bundled();
    let p = sc.problem::<f64>().unwrap();
    let mut adjusted = 0;
    for k in 0..6 {
        let rec = rollout(&p, &Policy::Bu(fig_w()), 0.05, 100, 77, k).unwrap();
        let filter_seed = rng::child_seed(77, tags::FILTER, k as u64);
        let mut s = TwinSession::new(&sc, filter_seed, fig_w(), Some(100)).unwrap();
        let decided = drive(&mut s, &site(&sc, 77, k));
        assert_eq!(decided.map(|d| d.0), rec.decision_week, "rollout {k}");
        if let Some((_, action)) = decided {
            assert_eq!(action, rec.action);
            adjusted += matches!(action, Action::Adjust { .. }) as usize;
        }
    }
    assert!(adjusted > 0);
}

fn pending_session() -> TwinSession {
    let sc = Scenario::bundled();
    for k in 0..50 {
        let mut s = TwinSession::new(&sc, 3, fig_w(), Some(150)).unwrap();
        for (t, z) in site(&sc, 901, k) {
            let out = s.measure(t, z).unwrap();
            if let Some(rec) = out.recommendation {
                if matches!(rec.action, Action::Adjust { .. }) {
                    return s;
                }
                break;
            }
        }
    }
    panic!("no adjust recommendation in 50 sites");
}

#[test]
fn whatif_sweep_reproduces_the_recommendation() {
    let s = pending_session();
    let rec = s.recommendation().unwrap();
    let Action::Adjust { h_add } = rec.action else { unreachable!() };
    let zero = s.whatif(0.0, false).unwrap();
    let now = s.summary().unwrap();
    assert_eq!(zero.prob_below_target, now.prob_below_target);
    assert_eq!(zero.settlement_t_max_m, now.settlement_t_max_m);
    assert_eq!(zero.ocr_t_max, now.ocr_t_max);
    assert_eq!(zero.increment_cost_sek, 0.0);

    let mut last = 1.0;
    let mut minimal = None;
    for h in IncrementGrid::<f64>::default().values() {
        let w = s.whatif(h, false).unwrap();
        assert!(w.prob_below_target <= last);
        last = w.prob_below_target;
        if minimal.is_none() && w.prob_below_target <= s.heuristic().p_th {
            minimal = Some(h);
        }
    }
    if rec.grid_exhausted {
        assert_eq!(minimal, None);
    } else {
        assert_eq!(minimal, Some(h_add));
    }
}

#[test]
fn reads_do_not_mutate() {
    let s = pending_session();
    let h = s.belief_hash();
    let n = s.log().len();
    s.recommendation().unwrap();
    s.whatif(0.7, false).unwrap();
    s.whatif(0.7, true).unwrap();
    assert_eq!(h, s.belief_hash());
    assert_eq!(n, s.log().len());
}

#[test]
fn override_is_logged_and_measuring_resumes() {
    let mut s = pending_session();
    s.commit(0.0).unwrap();
    assert_eq!(s.status(), SessionStatus::Measuring);
    let last_decision = s.log().events().iter().rev().find_map(|e| match e {
        SessionEvent::Decision { overridden, committed_h_add_m, .. } => Some((*overridden, *committed_h_add_m)),
        _ => None,
    });
    assert_eq!(last_decision, Some((true, 0.0)));
}

#[test]
fn second_increment_is_refused() {
    let mut s = pending_session();
    s.commit(0.4).unwrap();
    assert_eq!(s.status(), SessionStatus::Adjusted);
    assert!(matches!(s.commit(0.4), Err(PdtError::UnsupportedAction(_))));
}

#[test]
fn closed_gate_keeps_measuring() {
    let sc = Scenario::bundled();
    let s = TwinSession::new(&sc, 1, fig_w(), Some(100)).unwrap();
    let rec = s.recommendation().unwrap();
    assert!(!rec.gate_open);
    assert_eq!(rec.action, Action::KeepMeasuring);
}

#[test]
fn whole_session_replays_from_its_log() {
    let sc = Scenario::bundled();
    let mut s = TwinSession::new(&sc, 12, fig_w(), None).unwrap();
    let zs = site(&sc, 2024, 3);
    drive(&mut s, &zs);
    let next = s.log().events().last().unwrap().t() + 1;
    for &(t, z) in zs.iter().filter(|(t, _)| *t >= next).take(5) {
        s.measure(t, z).unwrap();
    }
    s.close().unwrap();
    let text = s.log().to_jsonl();
    let back = SessionLog::from_jsonl(&text).unwrap();
    let r = replay(&back, &sc).unwrap();
    assert_eq!(r.belief_hash(), s.belief_hash());
    assert_eq!(r.log().to_jsonl(), text);
}
