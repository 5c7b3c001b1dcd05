use pdt_core::optimizer::{final_eval_seed, optimize_policy_kind, PolicyKind, StudyConfig, StudyRow};
use serde::Serialize;

use crate::args::{OptimizeArgs, OptimizedPolicy};
use crate::error::CliResult;
use crate::output::{OutDir, Provenance};

#[derive(Serialize)]
struct Optimized<'a> {
    sigma_eps_m: f64,
    config: &'a StudyConfig,
    final_seed: u64,
    row: &'a StudyRow,
}

/// Study configuration of the scenario with the master seed taken from `--seed` if given.
pub fn study_config(sc: &pdt_core::Scenario, seed: Option<u64>) -> StudyConfig {
    let mut cfg = sc.study_config();
    if let Some(s) = seed {
        cfg.ce.master_seed = s;
    }
    cfg
}

pub fn run(a: OptimizeArgs) -> CliResult {
    let sc = super::load(&a.common)?;
    let cfg = study_config(&sc, a.common.seed);
    let out = OutDir::create(&a.common.out, Provenance::new("optimize", &sc, cfg.ce.master_seed))?;
    let p = sc.problem::<f64>()?;
    let kind = match a.policy {
        OptimizedPolicy::Bu => PolicyKind::Bu,
        OptimizedPolicy::Static => PolicyKind::Static,
    };
    let sigma = a.sigma_eps.unwrap_or(sc.sigma_eps());
    let final_seed = final_eval_seed(cfg.ce.master_seed);
    let row = optimize_policy_kind(&p, kind, sigma, &cfg, final_seed)?;
    for r in &row.restarts {
        out.jsonl(&format!("ce_trace_r{}.jsonl", r.restart), &r.ce.trace)?;
    }
    out.json(
        "optimize.json",
        &Optimized {
            sigma_eps_m: sigma,
            config: &cfg,
            final_seed,
            row: &row,
        },
    )?;
    println!(
        "optimize {}: w = {:?}, expected cost {:.0} SEK (se {:.0})",
        kind.name(),
        row.w_opt,
        row.evaluation.mean_cost,
        row.evaluation.std_error
    );
    Ok(())
}
