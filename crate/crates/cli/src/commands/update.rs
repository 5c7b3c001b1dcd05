use std::path::Path;

use pdt_core::optimizer::{noise_for, truth_for};
use pdt_core::policy::{cost_of_model, Action, BuDecision, Compliance};
use pdt_core::session::{SessionEvent, SessionStatus};
use pdt_core::{ActionSchedule, HeuristicParams, SettlementModel, SoilSample, TwinSession};
use serde::{Deserialize, Serialize};

use crate::args::UpdateArgs;
use crate::error::{CliError, CliResult};
use crate::output::{num, opt, OutDir, Provenance};

#[derive(Debug, Deserialize)]
struct Reading {
    week: u32,
    settlement_m: f64,
}

fn read_measurements(path: &Path) -> CliResult<Vec<(u32, f64)>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    r.deserialize::<Reading>()
        .map(|row| {
            row.map(|m| (m.week, m.settlement_m))
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
        })
        .collect()
}

#[derive(Serialize)]
struct Decision {
    week: u32,
    recommendation: BuDecision,
    committed_h_add_m: f64,
}

#[derive(Serialize)]
struct TruthOutcome {
    truth_seed: u64,
    truth_index: usize,
    soil: SoilSample,
    settlement_t_max_m: f64,
    ocr_t_max: f64,
    compliance: Compliance,
    cost_sek: f64,
}

#[derive(Serialize)]
struct Summary {
    heuristic: HeuristicParams,
    n_particles: usize,
    n_measurements: usize,
    status: SessionStatus,
    event_index: usize,
    belief_hash: String,
    decision: Option<Decision>,
    final_event: Option<SessionEvent>,
    truth: Option<TruthOutcome>,
}

/// Source of readings: a fixed list, or the ground truth responding to the committed schedule.
enum Readings {
    Fixed(Vec<(u32, f64)>),
    Truth {
        soil: SoilSample,
        xi: Vec<f64>,
        sigma_eps: f64,
    },
}

pub fn run(a: UpdateArgs) -> CliResult {
    let sc = super::load(&a.common)?;
    let seed = a.common.seed.unwrap_or(0);
    let w = super::heuristic(&a.heuristic, &sc)?;
    let p = sc.problem::<f64>()?;
    let t_max = p.requirements.t_max;
    let out = OutDir::create(&a.common.out, Provenance::new("update", &sc, seed))?;

    let readings = match (&a.measurements, a.truth_seed) {
        (Some(path), _) => Readings::Fixed(read_measurements(path)?),
        (None, Some(ts)) => {
            let weeks = a.weeks.unwrap_or(t_max);
            Readings::Truth {
                soil: truth_for(&p.priors, ts, a.truth_index)?,
                xi: noise_for(ts, a.truth_index, weeks),
                sigma_eps: sc.sigma_eps(),
            }
        }
        (None, None) => return Err(CliError::config("either --measurements or --truth-seed is required")),
    };

    let mut s = TwinSession::new(&sc, seed, w, a.n_particles)?;
    let mut schedule = ActionSchedule::initial(w.h0);
    let mut truth_model = match &readings {
        Readings::Truth { soil, .. } => Some(SettlementModel::new(&p.model, soil, &schedule)?),
        Readings::Fixed(_) => None,
    };
    let n = match &readings {
        Readings::Fixed(v) => v.len(),
        Readings::Truth { xi, .. } => xi.len(),
    };
    let mut decision = None;
    let mut beliefs = Vec::new();
    for i in 0..n {
        let (t, z) = match &readings {
            Readings::Fixed(v) => v[i],
            Readings::Truth { xi, sigma_eps, .. } => {
                let t = (i + 1) as u32;
                let m = truth_model.as_ref().expect("truth mode");
                (t, m.settlement(f64::from(t)) + sigma_eps * xi[i])
            }
        };
        let outcome = s.measure(t, z)?;
        if let Some(msg) = &outcome.warning {
            log::warn!("week {t}: {msg}");
        }
        beliefs.push((s.event_index(), outcome.summary.clone(), outcome.gate_statistic));
        if outcome.status == SessionStatus::DecisionPending {
            let rec = outcome.recommendation.clone().expect("pending decision");
            let h = a.commit_h_add.unwrap_or(match rec.action {
                Action::Adjust { h_add } => h_add,
                _ => 0.0,
            });
            s.commit(h)?;
            if h > 0.0 {
                schedule = ActionSchedule::with_increment(w.h0, t, h);
                if let Readings::Truth { soil, .. } = &readings {
                    truth_model = Some(SettlementModel::new(&p.model, soil, &schedule)?);
                }
            }
            decision = Some(Decision {
                week: t,
                recommendation: rec,
                committed_h_add_m: h,
            });
        }
    }
    let final_event = if a.no_close { None } else { Some(s.close()?) };

    let truth = match &readings {
        Readings::Truth { soil, .. } => {
            let m = truth_model.as_ref().expect("truth mode");
            let c = cost_of_model(m, &schedule, &p.requirements, &p.costs, p.road_length());
            Some(TruthOutcome {
                truth_seed: a.truth_seed.expect("truth mode"),
                truth_index: a.truth_index,
                soil: *soil,
                settlement_t_max_m: m.settlement(p.requirements.t_max_f()),
                ocr_t_max: m.ocr(p.requirements.t_max_f()),
                compliance: c.compliance,
                cost_sek: c.total,
            })
        }
        Readings::Fixed(_) => None,
    };

    out.text("session.jsonl", &s.log().to_jsonl())?;
    let rows = beliefs.iter().map(|(idx, b, gate)| {
        let st = &b.settlement_t_max_m;
        vec![
            idx.to_string(),
            b.t_week.to_string(),
            num(st.mean),
            num(st.std),
            opt(st.cov),
            num(st.q025),
            num(st.q975),
            num(b.ocr_t_max.q025),
            num(b.ocr_t_max.q50),
            num(b.ocr_t_max.q975),
            num(b.prob_below_target),
            opt(*gate),
            b.unique_particles.to_string(),
        ]
    });
    out.csv(
        "beliefs.csv",
        &[
            "event_index",
            "week",
            "settlement_t_max_mean_m",
            "settlement_t_max_std_m",
            "settlement_t_max_cov",
            "settlement_t_max_q025_m",
            "settlement_t_max_q975_m",
            "ocr_t_max_q025",
            "ocr_t_max_q50",
            "ocr_t_max_q975",
            "prob_below_target",
            "gate_statistic",
            "unique_particles",
        ],
        rows,
    )?;
    let msg = match &decision {
        Some(d) => format!("decision at week {}: h_add = {} m", d.week, d.committed_h_add_m),
        None => "no decision".to_string(),
    };
    out.json(
        "update.json",
        &Summary {
            heuristic: w,
            n_particles: s.belief().n_s(),
            n_measurements: n,
            status: s.status(),
            event_index: s.event_index(),
            belief_hash: s.belief_hash(),
            decision,
            final_event,
            truth,
        },
    )?;
    println!("update: {n} measurements, {msg}, belief {}", s.belief_hash());
    Ok(())
}
