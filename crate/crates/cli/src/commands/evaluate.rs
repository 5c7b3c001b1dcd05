use pdt_core::optimizer::{evaluate_policy, EvaluationSummary, Policy};
use pdt_core::policy::Action;
use serde::Serialize;

use crate::args::{EvaluateArgs, EvaluatedPolicy};
use crate::error::CliResult;
use crate::output::{num, opt, OutDir, Provenance};

#[derive(Serialize)]
struct Evaluation<'a> {
    n_bu: usize,
    summary: &'a EvaluationSummary,
}

pub fn action_columns(a: &Action) -> [String; 2] {
    match a {
        Action::KeepMeasuring => ["keep-measuring".into(), "0".into()],
        Action::Hold => ["hold".into(), "0".into()],
        Action::Adjust { h_add } => ["adjust".into(), num(*h_add)],
    }
}

pub fn run(a: EvaluateArgs) -> CliResult {
    let sc = super::load(&a.common)?;
    let seed = a.common.seed.unwrap_or(0);
    let out = OutDir::create(&a.common.out, Provenance::new("evaluate", &sc, seed))?;
    let p = sc.problem::<f64>()?;
    let w = super::heuristic(&a.heuristic, &sc)?;
    let policy = match a.policy {
        EvaluatedPolicy::Bu => Policy::Bu(w),
        EvaluatedPolicy::Static => Policy::Static { h0: w.h0 },
        EvaluatedPolicy::Clairvoyant => Policy::Clairvoyant(w),
    };
    let sigma = a.sigma_eps.unwrap_or(sc.sigma_eps());
    let n_bu = a.n_bu.unwrap_or(sc.file.study.ce.n_bu);
    let res = evaluate_policy(&p, &policy, sigma, a.n_mc, n_bu, seed)?;

    let rows = res.records.iter().map(|r| {
        let [action, h_add] = action_columns(&r.action);
        vec![
            r.k.to_string(),
            opt(r.decision_week),
            action,
            h_add,
            r.grid_exhausted.to_string(),
            num(r.s_t_max),
            num(r.ocr_t_max),
            r.cost.compliance.settlement_ok.to_string(),
            r.cost.compliance.ocr_ok.to_string(),
            num(r.cost.sur_initial),
            num(r.cost.sur_increase),
            num(r.cost.delay),
            num(r.cost.ocr),
            num(r.cost.total),
            r.cost.delay_weeks.to_string(),
        ]
    });
    out.csv(
        "rollouts.csv",
        &[
            "k",
            "decision_week",
            "action",
            "h_add_m",
            "grid_exhausted",
            "settlement_t_max_m",
            "ocr_t_max",
            "settlement_ok",
            "ocr_ok",
            "sur_initial_sek",
            "sur_increase_sek",
            "delay_sek",
            "ocr_penalty_sek",
            "total_sek",
            "delay_weeks",
        ],
        rows,
    )?;
    out.json(
        "evaluation.json",
        &Evaluation {
            n_bu,
            summary: &res.summary,
        },
    )?;
    let s = &res.summary;
    println!(
        "evaluate {}: expected cost {:.0} SEK (se {:.0}) over {} rollouts",
        policy.name(),
        s.mean_cost,
        s.std_error,
        s.n_mc
    );
    Ok(())
}
