//! Interactive twin sessions and their append-only event log.
//!
//! A session owns one belief and records every state transition. Replaying the log against the
//! same scenario regenerates the identical event sequence, belief hashes included.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::consolidation::ActionSchedule;
use crate::error::{PdtError, Result};
use crate::filter::{init_belief, Belief, Functional, PosteriorStats};
use crate::optimizer::DecisionProblem;
use crate::policy::{
    cost_of_model, gate_statistic, heuristic_bu_decide, prob_not_compliant, Action, BuDecision, HeuristicParams,
};
use crate::scenario::Scenario;
use crate::stats;

pub const LOG_FORMAT: &str = "pdt-session-log";
pub const LOG_VERSION: u32 = 1;

/// Quantile levels reported for every posterior quantity.
pub const SUMMARY_PROBS: [f64; 5] = [0.025, 0.05, 0.5, 0.95, 0.975];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityStats {
    pub mean: f64,
    pub std: f64,
    /// Absent when the mean is too close to zero.
    pub cov: Option<f64>,
    pub q025: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub q975: f64,
}

impl QuantityStats {
    fn from_stats(s: &PosteriorStats<f64>) -> Self {
        let q = &s.quantiles;
        Self {
            mean: s.mean,
            std: s.std,
            cov: s.cov().ok(),
            q025: q[0],
            q05: q[1],
            q50: q[2],
            q95: q[3],
            q975: q[4],
        }
    }
}

/// Posterior quantiles of S at one week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanPoint {
    pub week: u32,
    pub mean_m: f64,
    pub q025_m: f64,
    pub q05_m: f64,
    pub q50_m: f64,
    pub q95_m: f64,
    pub q975_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSummary {
    pub t_week: u32,
    pub n_particles: usize,
    pub unique_particles: usize,
    pub h0_m: f64,
    pub t_add_week: Option<u32>,
    pub h_add_m: f64,
    pub settlement_t_max_m: QuantityStats,
    pub ocr_t_max: QuantityStats,
    pub s_inf_m: QuantityStats,
    /// Probability of missing the settlement requirement at t_max.
    pub prob_below_target: f64,
    /// Settlement fan for weeks `0..=t_max`.
    pub settlement_fan_m: Vec<FanPoint>,
}

pub fn summarize_belief(belief: &Belief, problem: &DecisionProblem) -> Result<BeliefSummary> {
    let req = &problem.requirements;
    let t_max = req.t_max_f();
    let stats_for = |f: Functional| belief.posterior_stats(&f, &SUMMARY_PROBS).map(|s| QuantityStats::from_stats(&s));
    let fan = (0..=req.t_max)
        .map(|week| {
            let s = belief.posterior_stats(&Functional::SettlementAt(f64::from(week)), &SUMMARY_PROBS)?;
            let q = &s.quantiles;
            Ok(FanPoint {
                week,
                mean_m: s.mean,
                q025_m: q[0],
                q05_m: q[1],
                q50_m: q[2],
                q95_m: q[3],
                q975_m: q[4],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sch = belief.schedule();
    Ok(BeliefSummary {
        t_week: belief.t_current(),
        n_particles: belief.n_s(),
        unique_particles: belief.unique_count(),
        h0_m: sch.h0,
        t_add_week: sch.t_add,
        h_add_m: sch.h_add,
        settlement_t_max_m: stats_for(Functional::SettlementAt(t_max))?,
        ocr_t_max: stats_for(Functional::OcrAt(t_max))?,
        s_inf_m: stats_for(Functional::SInf)?,
        prob_below_target: prob_not_compliant(belief, req),
        settlement_fan_m: fan,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Init {
        t: u32,
        seed: u64,
        scenario_hash: String,
        n_particles: usize,
        heuristic: HeuristicParams,
    },
    Measurement {
        t: u32,
        z_s_m: f64,
        sigma_eps_m: f64,
    },
    BeliefSummary {
        t: u32,
        belief_hash: String,
        summary: BeliefSummary,
    },
    Decision {
        t: u32,
        recommendation: BuDecision,
        committed_h_add_m: f64,
        overridden: bool,
        posterior: BeliefSummary,
    },
    Final {
        t: u32,
        expected_cost_sek: f64,
        prob_settlement_ok: f64,
        prob_ocr_ok: f64,
        /// Requirement checks on the posterior medians.
        settlement_ok: bool,
        ocr_ok: bool,
    },
}

impl SessionEvent {
    pub fn t(&self) -> u32 {
        match self {
            SessionEvent::Init { t, .. }
            | SessionEvent::Measurement { t, .. }
            | SessionEvent::BeliefSummary { t, .. }
            | SessionEvent::Decision { t, .. }
            | SessionEvent::Final { t, .. } => *t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LogHeader {
    format: String,
    version: u32,
}

/// Ordered event record. The first event is always `init`; nothing follows `final`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionLog {
    events: Vec<SessionEvent>,
}

impl SessionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Appends an event, rejecting decreasing weeks and events out of place.
    pub fn append_event(&mut self, event: SessionEvent) -> Result<()> {
        let is_init = matches!(event, SessionEvent::Init { .. });
        match self.events.last() {
            None if !is_init => return Err(PdtError::Log("the first event must be init".into())),
            Some(_) if is_init => return Err(PdtError::Log("init may only appear once".into())),
            Some(SessionEvent::Final { .. }) => return Err(PdtError::Log("log is finalized".into())),
            Some(last) if event.t() < last.t() => {
                return Err(PdtError::OutOfOrder {
                    got: event.t(),
                    current: last.t(),
                })
            }
            _ => {}
        }
        self.events.push(event);
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = LogHeader {
            format: LOG_FORMAT.into(),
            version: LOG_VERSION,
        };
        writeln!(out, "{}", serde_json::to_string(&header).map_err(|e| PdtError::Log(e.to_string()))?)?;
        for e in &self.events {
            writeln!(out, "{}", serde_json::to_string(e).map_err(|e| PdtError::Log(e.to_string()))?)?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header: LogHeader = match lines.next() {
            Some(line) => serde_json::from_str(&line?).map_err(|e| PdtError::Log(format!("header: {e}")))?,
            None => return Err(PdtError::Log("empty log".into())),
        };
        if header.format != LOG_FORMAT || header.version != LOG_VERSION {
            return Err(PdtError::Log(format!(
                "unsupported log format {} version {}",
                header.format, header.version
            )));
        }
        let mut log = Self::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: SessionEvent =
                serde_json::from_str(&line).map_err(|err| PdtError::Log(format!("line {}: {err}", i + 2)))?;
            log.append_event(e)?;
        }
        Ok(log)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        Self::read_jsonl(text.as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionStatus {
    Measuring,
    DecisionPending,
    Adjusted,
    Closed,
}

impl SessionStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SessionStatus::Measuring => "measuring",
            SessionStatus::DecisionPending => "decision-pending",
            SessionStatus::Adjusted => "adjusted",
            SessionStatus::Closed => "closed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementOutcome {
    pub event_index: usize,
    pub summary: BeliefSummary,
    pub gate_statistic: Option<f64>,
    pub gate_open: bool,
    pub recommendation: Option<BuDecision>,
    pub status: SessionStatus,
    /// Set when the observation lies more than 8 σ_ε from every particle's prediction.
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub h_add_m: f64,
    pub t_add_week: u32,
    pub n_particles: usize,
    pub prob_below_target: f64,
    pub settlement_t_max_m: QuantityStats,
    pub ocr_t_max: QuantityStats,
    /// Cost of placing the increment.
    pub increment_cost_sek: f64,
    /// Posterior expected total cost with the increment.
    pub expected_cost_sek: f64,
}

/// Standardized residual beyond which a measurement is reported as implausible.
pub const TAIL_WARNING_SIGMAS: f64 = 8.0;

/// One interactive decision session.
#[derive(Debug, Clone)]
pub struct TwinSession {
    scenario_hash: String,
    problem: DecisionProblem,
    heuristic: HeuristicParams,
    sigma_eps: f64,
    belief: Belief,
    log: SessionLog,
    status: SessionStatus,
    pending: Option<BuDecision>,
    held: bool,
    last_measurement: Option<u32>,
}

impl TwinSession {
    pub fn new(scenario: &Scenario, seed: u64, heuristic: HeuristicParams, n_particles: Option<usize>) -> Result<Self> {
        heuristic.validate()?;
        let problem = scenario.problem::<f64>()?;
        let n = n_particles.unwrap_or(scenario.file.filter.n_particles);
        let belief = init_belief(
            problem.model.clone(),
            &problem.priors,
            ActionSchedule::initial(heuristic.h0),
            n,
            seed,
            problem.filter.clone(),
        )?;
        let mut s = Self {
            scenario_hash: scenario.hash().to_string(),
            problem,
            heuristic,
            sigma_eps: scenario.sigma_eps(),
            belief,
            log: SessionLog::new(),
            status: SessionStatus::Measuring,
            pending: None,
            held: false,
            last_measurement: None,
        };
        s.log.append_event(SessionEvent::Init {
            t: 0,
            seed,
            scenario_hash: s.scenario_hash.clone(),
            n_particles: n,
            heuristic,
        })?;
        s.log_summary()?;
        Ok(s)
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn scenario_hash(&self) -> &str {
        &self.scenario_hash
    }

    pub fn heuristic(&self) -> &HeuristicParams {
        &self.heuristic
    }

    pub fn problem(&self) -> &DecisionProblem {
        &self.problem
    }

    pub fn sigma_eps(&self) -> f64 {
        self.sigma_eps
    }

    /// Index of the most recent log event.
    pub fn event_index(&self) -> usize {
        self.log.len() - 1
    }

    pub fn belief_hash(&self) -> String {
        self.belief.state_hash()
    }

    pub fn summary(&self) -> Result<BeliefSummary> {
        summarize_belief(&self.belief, &self.problem)
    }

    fn log_summary(&mut self) -> Result<BeliefSummary> {
        let summary = self.summary()?;
        self.log.append_event(SessionEvent::BeliefSummary {
            t: self.belief.t_current(),
            belief_hash: self.belief_hash(),
            summary: summary.clone(),
        })?;
        Ok(summary)
    }

    fn ensure_open(&self) -> Result<()> {
        if self.status == SessionStatus::Closed {
            return Err(PdtError::Closed);
        }
        Ok(())
    }

    fn state_error(&self, message: &str) -> PdtError {
        PdtError::InvalidState {
            status: self.status.as_str().into(),
            message: message.into(),
        }
    }

    /// Whether the heuristic still has a decision to take.
    fn deciding(&self) -> bool {
        !self.held && !self.belief.schedule().has_increment()
    }

    /// Assimilates a settlement reading at week `t` and re-evaluates the heuristic.
    pub fn measure(&mut self, t: u32, z_s: f64) -> Result<MeasurementOutcome> {
        self.ensure_open()?;
        if let Some(last) = self.last_measurement {
            if t <= last {
                return Err(PdtError::OutOfOrder { got: t, current: last });
            }
        }
        let z = crate::filter::Measurement::new(t, z_s, self.sigma_eps)?;
        let (belief, report) = self.belief.update_with_report(&z, None)?;
        self.belief = belief;
        self.last_measurement = Some(t);
        self.log.append_event(SessionEvent::Measurement {
            t,
            z_s_m: z_s,
            sigma_eps_m: self.sigma_eps,
        })?;
        let summary = self.log_summary()?;
        let warning = (report.min_standardized_residual > TAIL_WARNING_SIGMAS).then(|| {
            format!(
                "degenerate update: measurement is {:.1} sigma from the closest particle",
                report.min_standardized_residual
            )
        });
        let mut gate = None;
        let mut gate_open = false;
        if self.deciding() {
            let d = heuristic_bu_decide(&self.belief, t, &self.heuristic, &self.problem.requirements, &self.problem.grid, self.problem.gate)?;
            gate = Some(d.gate_statistic);
            gate_open = d.gate_open;
            if d.action.is_final() {
                self.status = SessionStatus::DecisionPending;
                self.pending = Some(d);
            } else {
                self.status = SessionStatus::Measuring;
                self.pending = None;
            }
        }
        Ok(MeasurementOutcome {
            event_index: self.event_index(),
            summary,
            gate_statistic: gate,
            gate_open,
            recommendation: self.pending.clone(),
            status: self.status,
            warning,
        })
    }

    /// The heuristic's current suggestion. Read-only.
    pub fn recommendation(&self) -> Result<BuDecision> {
        self.ensure_open()?;
        if let Some(d) = &self.pending {
            return Ok(d.clone());
        }
        let t = self.belief.t_current();
        let req = &self.problem.requirements;
        if self.deciding() {
            return heuristic_bu_decide(&self.belief, t, &self.heuristic, req, &self.problem.grid, self.problem.gate);
        }
        let stat = gate_statistic(&self.belief, req, self.problem.gate)?;
        Ok(BuDecision {
            t,
            action: Action::Hold,
            gate_statistic: stat,
            gate_open: stat < self.heuristic.cov_th,
            prob_not_compliant: prob_not_compliant(&self.belief, req),
            prob_after: None,
            grid_exhausted: false,
        })
    }

    /// Consequences of placing `h_add` now, evaluated on a copy of the belief. With `fast`, at
    /// most 100 particles are used.
    pub fn whatif(&self, h_add: f64, fast: bool) -> Result<WhatIf> {
        self.ensure_open()?;
        if self.status != SessionStatus::DecisionPending {
            return Err(self.state_error("what-if queries need a pending decision"));
        }
        if !(h_add >= 0.0) || !h_add.is_finite() {
            return Err(PdtError::Domain(format!("h_add {h_add} must be non-negative")));
        }
        let base = if fast { self.belief.thinned(100) } else { self.belief.clone() };
        let t = base.t_current();
        let b = if h_add > 0.0 { base.apply_action(t, h_add)? } else { base };
        let req = &self.problem.requirements;
        let t_max = req.t_max_f();
        let sch = *b.schedule();
        let costs = b.member_values(|p| {
            cost_of_model(&p.model, &sch, req, &self.problem.costs, self.problem.road_length()).total
        });
        let wc: Vec<f64> = costs.iter().zip(b.weights()).map(|(c, w)| c * w).collect();
        let inc = if h_add > 0.0 {
            (self.problem.costs.remobilization + self.problem.costs.c_sur_increase * h_add) * self.problem.road_length()
        } else {
            0.0
        };
        Ok(WhatIf {
            h_add_m: h_add,
            t_add_week: t,
            n_particles: b.n_s(),
            prob_below_target: prob_not_compliant(&b, req),
            settlement_t_max_m: QuantityStats::from_stats(&b.posterior_stats(&Functional::SettlementAt(t_max), &SUMMARY_PROBS)?),
            ocr_t_max: QuantityStats::from_stats(&b.posterior_stats(&Functional::OcrAt(t_max), &SUMMARY_PROBS)?),
            increment_cost_sek: inc,
            expected_cost_sek: stats::pairwise_sum(&wc),
        })
    }

    /// Commits the engineer's choice for the pending decision. Zero keeps the current schedule
    /// and returns the session to measuring.
    pub fn commit(&mut self, h_add: f64) -> Result<BuDecision> {
        self.ensure_open()?;
        if self.belief.schedule().has_increment() {
            return Err(PdtError::UnsupportedAction("a surcharge increment was already applied".into()));
        }
        let Some(rec) = self.pending.clone() else {
            return Err(self.state_error("no decision is pending"));
        };
        if !(h_add >= 0.0) || !h_add.is_finite() {
            return Err(PdtError::Domain(format!("h_add {h_add} must be non-negative")));
        }
        let recommended = match rec.action {
            Action::Adjust { h_add } => h_add,
            _ => 0.0,
        };
        let t = self.belief.t_current();
        if h_add > 0.0 {
            self.belief = self.belief.apply_action(t, h_add)?;
            self.status = SessionStatus::Adjusted;
        } else {
            self.held = rec.action == Action::Hold;
            self.status = SessionStatus::Measuring;
        }
        self.pending = None;
        let posterior = self.summary()?;
        self.log.append_event(SessionEvent::Decision {
            t,
            recommendation: rec.clone(),
            committed_h_add_m: h_add,
            overridden: h_add != recommended,
            posterior,
        })?;
        self.log_summary()?;
        Ok(rec)
    }

    /// Closes the session with the posterior cost and compliance outlook.
    pub fn close(&mut self) -> Result<SessionEvent> {
        self.ensure_open()?;
        let req = &self.problem.requirements;
        let t_max = req.t_max_f();
        let sch = *self.belief.schedule();
        let costs = self.belief.member_values(|p| {
            cost_of_model(&p.model, &sch, req, &self.problem.costs, self.problem.road_length()).total
        });
        let ocr = self.belief.values(&Functional::OcrAt(t_max));
        let w = self.belief.weights();
        let wc: Vec<f64> = costs.iter().zip(w).map(|(c, w)| c * w).collect();
        let wo: Vec<f64> = ocr.iter().zip(w).map(|(&o, &w)| if req.ocr_ok(o) { w } else { 0.0 }).collect();
        let s_med = stats::weighted_quantiles(&self.belief.values(&Functional::SettlementAt(t_max)), w, &[0.5])[0];
        let o_med = stats::weighted_quantiles(&ocr, w, &[0.5])[0];
        let event = SessionEvent::Final {
            t: self.log.events().last().map_or(0, SessionEvent::t),
            expected_cost_sek: stats::pairwise_sum(&wc),
            prob_settlement_ok: 1.0 - prob_not_compliant(&self.belief, req),
            prob_ocr_ok: stats::pairwise_sum(&wo),
            settlement_ok: req.settlement_ok(s_med),
            ocr_ok: req.ocr_ok(o_med),
        };
        self.log.append_event(event.clone())?;
        self.status = SessionStatus::Closed;
        self.pending = None;
        Ok(event)
    }
}

/// Rebuilds a session from its log by re-running every input event, then checks that the
/// regenerated log matches the recorded one event for event.
pub fn replay(log: &SessionLog, scenario: &Scenario) -> Result<TwinSession> {
    let Some(SessionEvent::Init {
        seed,
        scenario_hash,
        n_particles,
        heuristic,
        ..
    }) = log.events().first()
    else {
        return Err(PdtError::Log("log does not start with init".into()));
    };
    if scenario_hash != scenario.hash() {
        return Err(PdtError::Tamper {
            log: scenario_hash.clone(),
            scenario: scenario.hash().to_string(),
        });
    }
    let mut s = TwinSession::new(scenario, *seed, *heuristic, Some(*n_particles))?;
    for (i, e) in log.events().iter().enumerate().skip(1) {
        let res = match e {
            SessionEvent::Measurement { t, z_s_m, sigma_eps_m } => {
                if *sigma_eps_m != s.sigma_eps {
                    return Err(PdtError::ReplayMismatch { index: i });
                }
                s.measure(*t, *z_s_m).map(|_| ())
            }
            SessionEvent::Decision { committed_h_add_m, .. } => s.commit(*committed_h_add_m).map(|_| ()),
            SessionEvent::Final { .. } => s.close().map(|_| ()),
            SessionEvent::BeliefSummary { .. } => Ok(()),
            SessionEvent::Init { .. } => Err(PdtError::Log("duplicate init".into())),
        };
        res.map_err(|_| PdtError::ReplayMismatch { index: i })?;
    }
    let ours = s.log.events();
    let theirs = log.events();
    for i in 0..ours.len().max(theirs.len()) {
        let same = match (ours.get(i), theirs.get(i)) {
            (Some(a), Some(b)) => serde_json::to_string(a).ok() == serde_json::to_string(b).ok(),
            _ => false,
        };
        if !same {
            return Err(PdtError::ReplayMismatch { index: i });
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session() -> TwinSession {
        let sc = Scenario::bundled();
        TwinSession::new(&sc, 11, sc.heuristic().unwrap(), Some(60)).unwrap()
    }

    #[test]
    fn empty_log_replays_to_init_belief() {
        let sc = Scenario::bundled();
        let s = session();
        let r = replay(s.log(), &sc).unwrap();
        let b = init_belief(
            s.problem().model.clone(),
            &s.problem().priors,
            ActionSchedule::initial(1.09),
            60,
            11,
            Default::default(),
        )
        .unwrap();
        assert_eq!(r.belief_hash(), b.state_hash());
    }

    #[test]
    fn out_of_order_append_rejected() {
        let mut s = session();
        s.measure(3, 0.1).unwrap();
        let mut log = s.log().clone();
        let e = SessionEvent::Measurement {
            t: 2,
            z_s_m: 0.1,
            sigma_eps_m: 0.05,
        };
        assert!(matches!(log.append_event(e), Err(PdtError::OutOfOrder { .. })));
        assert!(matches!(s.measure(3, 0.1), Err(PdtError::OutOfOrder { .. })));
    }

    #[test]
    fn jsonl_round_trip_and_replay() {
        let sc = Scenario::bundled();
        let mut s = session();
        for t in 1..=6 {
            s.measure(t, 0.04 * t as f64).unwrap();
        }
        s.close().unwrap();
        let text = s.log().to_jsonl();
        assert!(text.starts_with("{\"format\":\"pdt-session-log\",\"version\":1}"));
        let log = SessionLog::from_jsonl(&text).unwrap();
        assert_eq!(&log, s.log());
        let r = replay(&log, &sc).unwrap();
        assert_eq!(r.belief_hash(), s.belief_hash());
        assert_eq!(r.status(), SessionStatus::Closed);
    }

    #[test]
    fn tampered_scenario_detected() {
        let s = session();
        let other = Scenario::from_toml_str(crate::scenario::BUNDLED_SCENARIO, &["requirements.s_target_m=1.2".into()]).unwrap();
        assert!(matches!(replay(s.log(), &other), Err(PdtError::Tamper { .. })));
    }

    #[test]
    fn edited_measurement_detected() {
        let sc = Scenario::bundled();
        let mut s = session();
        s.measure(1, 0.05).unwrap();
        s.measure(2, 0.09).unwrap();
        let text = s.log().to_jsonl().replace("\"z_s_m\":0.09", "\"z_s_m\":0.1");
        let log = SessionLog::from_jsonl(&text).unwrap();
        assert!(matches!(replay(&log, &sc), Err(PdtError::ReplayMismatch { .. })));
    }

    #[test]
    fn closed_session_rejects_everything() {
        let mut s = session();
        s.close().unwrap();
        assert!(matches!(s.measure(1, 0.1), Err(PdtError::Closed)));
        assert!(matches!(s.recommendation(), Err(PdtError::Closed)));
    }

    #[test]
    fn commit_without_pending_decision() {
        let mut s = session();
        assert!(matches!(s.commit(0.5), Err(PdtError::InvalidState { .. })));
        assert!(matches!(s.whatif(0.5, false), Err(PdtError::InvalidState { .. })));
    }
}
