use pdt_core::session::{replay, SessionEvent};
use pdt_core::SessionLog;
use serde::{Deserialize, Serialize};

use super::study::{write_tables, StudyFile};
use crate::args::ReportArgs;
use crate::error::{CliError, CliResult};
use crate::output::{num, opt, OutDir, Provenance};

#[derive(Deserialize)]
struct SavedStudy {
    provenance: Provenance,
    #[serde(flatten)]
    study: StudyFile,
}

#[derive(Serialize)]
struct Replayed {
    verified: bool,
    events: usize,
    belief_hash: String,
    final_event: Option<SessionEvent>,
}

pub fn run(a: ReportArgs) -> CliResult {
    let sc = super::load(&a.common)?;
    let seed = a.common.seed.unwrap_or(0);
    let out = OutDir::create(&a.common.out, Provenance::new("report", &sc, seed))?;
    out.text("scenario.toml", &sc.to_toml_string()?)?;
    out.json(
        "scenario.json",
        &serde_json::json!({ "name": sc.file.name, "scenario_hash": sc.hash() }),
    )?;

    if let Some(path) = &a.study {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let saved: SavedStudy =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        // tables keep the provenance of the study that produced them
        let tables = OutDir::create(&a.common.out, saved.provenance)?;
        write_tables(&tables, &saved.study.result)?;
        println!("report: {} study rows", saved.study.result.rows().count());
    }

    if let Some(path) = &a.log {
        let log = SessionLog::load(path)?;
        let s = replay(&log, &sc)?;
        let rows = s.log().events().iter().enumerate().filter_map(|(i, e)| match e {
            SessionEvent::BeliefSummary { t, belief_hash, summary } => {
                let st = &summary.settlement_t_max_m;
                Some(vec![
                    i.to_string(),
                    t.to_string(),
                    num(st.mean),
                    num(st.std),
                    opt(st.cov),
                    num(st.q025),
                    num(st.q975),
                    num(summary.prob_below_target),
                    belief_hash.clone(),
                ])
            }
            _ => None,
        });
        out.csv(
            "replay_beliefs.csv",
            &[
                "event_index",
                "week",
                "settlement_t_max_mean_m",
                "settlement_t_max_std_m",
                "settlement_t_max_cov",
                "settlement_t_max_q025_m",
                "settlement_t_max_q975_m",
                "prob_below_target",
                "belief_hash",
            ],
            rows,
        )?;
        let final_event = s
            .log()
            .events()
            .iter()
            .find(|e| matches!(e, SessionEvent::Final { .. }))
            .cloned();
        out.json(
            "replay.json",
            &Replayed {
                verified: true,
                events: s.log().len(),
                belief_hash: s.belief_hash(),
                final_event,
            },
        )?;
        println!("report: log verified, {} events, belief {}", s.log().len(), s.belief_hash());
    }
    Ok(())
}
