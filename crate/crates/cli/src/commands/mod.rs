use pdt_core::{load_scenario, HeuristicParams, Scenario};

use crate::args::{Common, HeuristicArgs};
use crate::error::CliResult;

pub mod evaluate;
pub mod optimize;
pub mod report;
pub mod serve;
pub mod simulate;
pub mod study;
pub mod update;

pub fn load(common: &Common) -> CliResult<Scenario> {
    let sc = load_scenario(&common.scenario, &common.overrides)?;
    log::info!("scenario {} ({})", sc.file.name, sc.hash());
    Ok(sc)
}

/// Scenario heuristic with any parameter replaced from the command line.
pub fn heuristic(args: &HeuristicArgs, sc: &Scenario) -> CliResult<HeuristicParams> {
    let d: HeuristicParams = sc.heuristic()?;
    Ok(HeuristicParams::new(
        args.h0.unwrap_or(d.h0),
        args.cov_th.unwrap_or(d.cov_th),
        args.p_th.unwrap_or(d.p_th),
    )?)
}
