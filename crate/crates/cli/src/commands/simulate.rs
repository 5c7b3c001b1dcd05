use pdt_core::consolidation::simulate_trajectory;
use pdt_core::policy::{cost_of_model, CostBreakdown};
use pdt_core::priors::sample_soil;
use pdt_core::{ActionSchedule, SettlementModel, SoilSample};
use serde::Serialize;

use crate::args::SimulateArgs;
use crate::error::CliResult;
use crate::output::{num, OutDir, Provenance};

#[derive(Serialize)]
struct SampleSummary {
    index: usize,
    soil: SoilSample,
    file: String,
    settlement_t_max_m: f64,
    ocr_t_max: f64,
    /// First tabulated week meeting the settlement requirement.
    target_week: Option<u32>,
    cost: CostBreakdown,
}

#[derive(Serialize)]
struct Summary {
    schedule: ActionSchedule,
    t_max_week: u32,
    s_target_m: f64,
    ocr_target: f64,
    weeks: u32,
    samples: Vec<SampleSummary>,
}

pub fn run(a: SimulateArgs) -> CliResult {
    let sc = super::load(&a.common)?;
    let seed = a.common.seed.unwrap_or(0);
    let out = OutDir::create(&a.common.out, Provenance::new("simulate", &sc, seed))?;
    let p = sc.problem::<f64>()?;
    let req = &p.requirements;
    let h0 = match a.h0 {
        Some(h) => h,
        None => sc.heuristic::<f64>()?.h0,
    };
    let schedule = match (a.t_add, a.h_add) {
        (Some(t), Some(h)) => ActionSchedule::with_increment(h0, t, h),
        _ => ActionSchedule::initial(h0),
    };
    let weeks = a.weeks.unwrap_or(req.t_max + p.costs.delay_cap);
    let soils = sample_soil(&p.priors, seed, a.samples)?;

    let mut samples = Vec::with_capacity(soils.len());
    for (i, soil) in soils.iter().enumerate() {
        let traj = simulate_trajectory(&p.model, soil, &schedule, weeks)?;
        let m = SettlementModel::new(&p.model, soil, &schedule)?;
        let t_max = req.t_max_f();
        let file = format!("trajectory_{i:03}.csv");
        let rows = (0..traj.len()).map(|j| {
            vec![
                traj.weeks[j].to_string(),
                num(traj.settlement[j]),
                num(traj.ocr[j]),
                num(traj.degree[j]),
                num(traj.s_inf[j]),
                num(traj.load[j]),
            ]
        });
        out.csv(&file, &["week", "settlement_m", "ocr", "degree", "s_inf_m", "load_kpa"], rows)?;
        samples.push(SampleSummary {
            index: i,
            soil: *soil,
            file,
            settlement_t_max_m: m.settlement(t_max),
            ocr_t_max: m.ocr(t_max),
            target_week: traj
                .weeks
                .iter()
                .zip(&traj.settlement)
                .find(|(_, &s)| req.settlement_ok(s))
                .map(|(&w, _)| w),
            cost: cost_of_model(&m, &schedule, req, &p.costs, p.road_length()),
        });
    }
    let ok = samples.iter().filter(|s| s.cost.compliance.settlement_ok).count();
    out.json(
        "simulate.json",
        &Summary {
            schedule,
            t_max_week: req.t_max,
            s_target_m: req.s_target,
            ocr_target: req.ocr_target,
            weeks,
            samples,
        },
    )?;
    println!("simulate: {} trajectories, {ok} meet the settlement target at t_max", soils.len());
    Ok(())
}
