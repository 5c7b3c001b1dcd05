use pdt_core::optimizer::{run_study, StudyConfig, StudyResult, StudyRow};
use serde::{Deserialize, Serialize};

use crate::args::StudyArgs;
use crate::error::CliResult;
use crate::output::{num, opt, OutDir, Provenance};

/// Contents of `study.json` besides the provenance.
#[derive(Debug, Serialize, Deserialize)]
pub struct StudyFile {
    pub sigma_eps_m: Vec<f64>,
    pub config: StudyConfig,
    pub result: StudyResult,
}

fn sigma_label(row: &StudyRow) -> String {
    row.sigma_eps.map(num).unwrap_or_default()
}

/// Writes `table2.csv` (BU optimum per noise level), `table3.csv` (best BU row against the
/// static baseline, plus every row) and `cost_breakdown.csv`.
pub fn write_tables(out: &OutDir, res: &StudyResult) -> CliResult {
    let table2 = res.bu_rows.iter().map(|r| {
        let e = &r.evaluation;
        vec![
            sigma_label(r),
            num(r.w_opt[0]),
            num(r.w_opt[1]),
            num(r.w_opt[2]),
            num(e.mean_cost),
            num(e.std_cost),
            num(e.std_error),
            num(e.settlement_compliance_rate),
            num(e.ocr_compliance_rate),
            num(e.increment_rate),
            r.selected_restart.to_string(),
        ]
    });
    out.csv(
        "table2.csv",
        &[
            "sigma_eps_m",
            "h0_m",
            "cov_th",
            "p_th",
            "expected_cost_sek",
            "std_cost_sek",
            "std_error_sek",
            "settlement_compliance",
            "ocr_compliance",
            "increment_rate",
            "selected_restart",
        ],
        table2,
    )?;

    let table3 = res.rows().map(|r| {
        let e = &r.evaluation;
        let w: Vec<String> = r.w_opt.iter().map(|&x| num(x)).collect();
        vec![
            r.policy.clone(),
            sigma_label(r),
            w.join(";"),
            num(e.mean_cost),
            num(e.std_error),
            num(e.settlement_compliance_rate),
            num(e.ocr_compliance_rate),
        ]
    });
    out.csv(
        "table3.csv",
        &[
            "policy",
            "sigma_eps_m",
            "parameters",
            "expected_cost_sek",
            "std_error_sek",
            "settlement_compliance",
            "ocr_compliance",
        ],
        table3,
    )?;

    let breakdown = res.rows().map(|r| {
        let e = &r.evaluation;
        let c = &e.components;
        vec![
            r.policy.clone(),
            sigma_label(r),
            num(c.sur_initial),
            num(c.sur_increase),
            num(c.delay),
            num(c.ocr),
            num(c.sum()),
            num(e.mean_cost),
        ]
    });
    out.csv(
        "cost_breakdown.csv",
        &[
            "policy",
            "sigma_eps_m",
            "sur_initial_sek",
            "sur_increase_sek",
            "delay_sek",
            "ocr_penalty_sek",
            "component_sum_sek",
            "expected_cost_sek",
        ],
        breakdown,
    )?;
    Ok(())
}

pub fn run(a: StudyArgs) -> CliResult {
    let sc = super::load(&a.common)?;
    let cfg = super::optimize::study_config(&sc, a.common.seed);
    let out = OutDir::create(&a.common.out, Provenance::new("study", &sc, cfg.ce.master_seed))?;
    let p = sc.problem::<f64>()?;
    let sigmas: Vec<f64> = sc.study_sigma_eps();
    let res = run_study(&p, &sigmas, &cfg)?;

    write_tables(&out, &res)?;
    if !a.no_traces {
        for row in res.rows() {
            for r in &row.restarts {
                let name = match row.sigma_eps {
                    Some(s) => format!("traces/ce_{}_sigma{}_r{}.jsonl", row.policy, num(s), r.restart),
                    None => format!("traces/ce_{}_r{}.jsonl", row.policy, r.restart),
                };
                out.jsonl(&name, &r.ce.trace)?;
            }
        }
    }
    out.json(
        "study.json",
        &StudyFile {
            sigma_eps_m: sigmas,
            config: cfg,
            result: res.clone(),
        },
    )?;
    for r in res.rows() {
        println!(
            "{:>6} sigma_eps={:<5} expected cost {:.0} SEK (se {:.0})",
            r.policy,
            opt(r.sigma_eps),
            r.evaluation.mean_cost,
            r.evaluation.std_error
        );
    }
    println!("study: {} rows written to {}", res.rows().count(), a.common.out.display());
    Ok(())
}
