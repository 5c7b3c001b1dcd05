use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PdtError, Result};
use crate::rng::{self, tags, StreamRng};

/// Box and initial sampling distribution of the optimized parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpace {
    pub names: Vec<String>,
    pub init_mean: Vec<f64>,
    pub init_std: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParamSpace {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// `[h0, cov_th, p_th]` of the Bayesian-updating heuristic.
    pub fn bu_default() -> Self {
        Self {
            names: vec!["h0".into(), "cov_th".into(), "p_th".into()],
            init_mean: vec![1.0, 0.15, 0.4],
            init_std: vec![0.5, 0.1, 0.2],
            lower: vec![0.0, 0.005, 0.01],
            upper: vec![3.0, 0.5, 0.99],
        }
    }

    /// `[h0]` of the static baseline.
    pub fn static_default() -> Self {
        Self {
            names: vec!["h0".into()],
            init_mean: vec![1.5],
            init_std: vec![0.75],
            lower: vec![0.0],
            upper: vec![3.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || [self.init_mean.len(), self.init_std.len(), self.lower.len(), self.upper.len()] != [d; 4] {
            return Err(PdtError::Config("parameter space vectors must share a non-zero length".into()));
        }
        for i in 0..d {
            if !(self.lower[i] < self.upper[i]) {
                return Err(PdtError::Config(format!("{}: lower bound must be below upper bound", self.names[i])));
            }
            if !(self.init_mean[i] >= self.lower[i] && self.init_mean[i] <= self.upper[i]) {
                return Err(PdtError::Config(format!("{}: initial mean outside bounds", self.names[i])));
            }
            if !(self.init_std[i] > 0.0) {
                return Err(PdtError::Config(format!("{}: initial std must be positive", self.names[i])));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeConfig {
    pub n_ce: usize,
    pub n_iter_max: usize,
    pub n_mc: usize,
    pub n_bu: usize,
    pub elite_fraction: f64,
    pub smoothing_alpha: f64,
    /// Stop once every parameter's std is below this fraction of its bound width.
    pub convergence_std_tol: f64,
    pub master_seed: u64,
}

impl Default for CeConfig {
    fn default() -> Self {
        Self {
            n_ce: 100,
            n_iter_max: 50,
            n_mc: 100,
            n_bu: 100,
            elite_fraction: 0.1,
            smoothing_alpha: 0.7,
            convergence_std_tol: 1e-3,
            master_seed: 0,
        }
    }
}

impl CeConfig {
    pub fn n_elite(&self) -> usize {
        (self.n_ce as f64 * self.elite_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(PdtError::Config("elite_fraction must lie in (0, 1)".into()));
        }
        if !(self.smoothing_alpha > 0.0 && self.smoothing_alpha <= 1.0) {
            return Err(PdtError::Config("smoothing_alpha must lie in (0, 1]".into()));
        }
        if (self.n_ce as f64) * self.elite_fraction < 2.0 {
            return Err(PdtError::Config("n_ce · elite_fraction must be at least 2".into()));
        }
        if self.n_iter_max == 0 || self.n_mc < 2 || self.n_bu < 2 {
            return Err(PdtError::Config("n_iter_max ≥ 1, n_mc ≥ 2 and n_bu ≥ 2 required".into()));
        }
        if !(self.convergence_std_tol >= 0.0) {
            return Err(PdtError::Config("convergence_std_tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// One line of the optimization trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeIteration {
    pub iteration: usize,
    /// Seed shared by every candidate of this iteration.
    pub crn_seed: u64,
    /// Sampling distribution used for this iteration's candidates.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub elite_mean_cost: f64,
    pub best_cost: f64,
    pub best_candidate: Vec<f64>,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeResult {
    pub w_opt: Vec<f64>,
    pub final_std: Vec<f64>,
    pub converged: bool,
    pub trace: Vec<CeIteration>,
}

/// Writes the trace as one JSON object per line.
pub fn write_trace_jsonl<W: Write>(trace: &[CeIteration], mut out: W) -> Result<()> {
    for it in trace {
        let line = serde_json::to_string(it).map_err(|e| PdtError::Io(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Draw from `N(mean, std)` restricted to `[lo, hi]` by rejection, clamping after many misses.
pub fn truncated_normal(rng: &mut StreamRng, mean: f64, std: f64, lo: f64, hi: f64) -> f64 {
    if !(std > 0.0) {
        return mean.clamp(lo, hi);
    }
    let n = Normal::new(mean, std).expect("finite std");
    for _ in 0..1000 {
        let x = n.sample(rng);
        if x >= lo && x <= hi {
            return x;
        }
    }
    rng.random_range(lo..=hi)
}

/// Population mean and std of the rows in `elite`, per coordinate.
pub fn elite_statistics(elite: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let d = elite[0].len();
    let n = elite.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| elite.iter().map(|x| x[j]).sum::<f64>() / n).collect();
    let std = (0..d)
        .map(|j| (elite.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    (mean, std)
}

/// Cross-entropy minimization of a noisy objective over a box.
///
/// `objective(w, crn_seed)` is called for every candidate; all candidates of one iteration
/// receive the same `crn_seed`. Candidates whose evaluation fails are excluded from selection.
pub fn cross_entropy_optimize<F>(objective: F, space: &ParamSpace, cfg: &CeConfig) -> Result<CeResult>
where
    F: Fn(&[f64], u64) -> Result<f64> + Sync,
{
    cfg.validate()?;
    space.validate()?;
    let d = space.dim();
    let n_elite = cfg.n_elite();
    let mut mean = space.init_mean.clone();
    let mut std = space.init_std.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    for iteration in 0..cfg.n_iter_max {
        let mut sampler = rng::stream(cfg.master_seed, tags::CE_SAMPLE, iteration as u64);
        let crn_seed = rng::child_seed(cfg.master_seed, tags::CE_ITERATION, iteration as u64);
        let candidates: Vec<Vec<f64>> = (0..cfg.n_ce)
            .map(|_| {
                (0..d)
                    .map(|j| truncated_normal(&mut sampler, mean[j], std[j], space.lower[j], space.upper[j]))
                    .collect()
            })
            .collect();
        let costs: Vec<Option<f64>> = candidates
            .par_iter()
            .map(|w| objective(w, crn_seed).ok().filter(|c| c.is_finite()))
            .collect();
        let mut ranked: Vec<(usize, f64)> = costs.iter().enumerate().filter_map(|(i, c)| c.map(|c| (i, c))).collect();
        let n_failed = cfg.n_ce - ranked.len();
        if ranked.is_empty() {
            trace.push(CeIteration {
                iteration,
                crn_seed,
                mean: mean.clone(),
                std: std.clone(),
                elite_mean_cost: f64::NAN,
                best_cost: f64::NAN,
                best_candidate: vec![],
                n_failed,
            });
            return Err(PdtError::OptimizationFailed(format!(
                "every candidate failed in iteration {iteration}; trace: {}",
                serde_json::to_string(&trace).unwrap_or_default()
            )));
        }
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let elite: Vec<&[f64]> = ranked.iter().take(n_elite).map(|&(i, _)| candidates[i].as_slice()).collect();
        let elite_cost = ranked.iter().take(n_elite).map(|r| r.1).sum::<f64>() / elite.len() as f64;
        trace.push(CeIteration {
            iteration,
            crn_seed,
            mean: mean.clone(),
            std: std.clone(),
            elite_mean_cost: elite_cost,
            best_cost: ranked[0].1,
            best_candidate: candidates[ranked[0].0].clone(),
            n_failed,
        });
        let (em, es) = elite_statistics(&elite);
        let a = cfg.smoothing_alpha;
        for j in 0..d {
            mean[j] = a * em[j] + (1.0 - a) * mean[j];
            std[j] = a * es[j] + (1.0 - a) * std[j];
        }
        if (0..d).all(|j| std[j] < cfg.convergence_std_tol * (space.upper[j] - space.lower[j])) {
            converged = true;
            break;
        }
    }
    Ok(CeResult {
        w_opt: mean,
        final_std: std,
        converged,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space3() -> ParamSpace {
        ParamSpace {
            names: vec!["a".into(), "b".into(), "c".into()],
            init_mean: vec![1.0; 3],
            init_std: vec![0.5; 3],
            lower: vec![0.0; 3],
            upper: vec![2.0; 3],
        }
    }

    #[test]
    fn truncated_samples_stay_in_bounds() {
        let mut r = rng::stream(1, "t", 0);
        for _ in 0..1000 {
            let x = truncated_normal(&mut r, 0.0, 5.0, 0.2, 0.3);
            assert!((0.2..=0.3).contains(&x));
        }
        assert_eq!(truncated_normal(&mut r, 4.0, 0.0, 0.0, 3.0), 3.0);
    }

    #[test]
    fn config_invariants() {
        let mut c = CeConfig::default();
        assert!(c.validate().is_ok());
        c.n_ce = 10;
        assert!(c.validate().is_err());
        c = CeConfig {
            smoothing_alpha: 0.0,
            ..CeConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn all_failures_reported() {
        let r = cross_entropy_optimize(|_, _| Err(PdtError::DegenerateData), &space3(), &CeConfig::default());
        assert!(matches!(r, Err(PdtError::OptimizationFailed(_))));
    }

    #[test]
    fn full_smoothing_takes_elite_mean() {
        let target = [0.3, 1.2, 1.7];
        let cfg = CeConfig {
            smoothing_alpha: 1.0,
            n_iter_max: 2,
            ..CeConfig::default()
        };
        let f = |w: &[f64], _: u64| Ok(w.iter().zip(target).map(|(x, t)| (x - t).powi(2)).sum::<f64>());
        let res = cross_entropy_optimize(f, &space3(), &cfg).unwrap();
        // regenerate the first iteration's candidates and sort them independently
        let mut s = rng::stream(cfg.master_seed, tags::CE_SAMPLE, 0);
        let sp = space3();
        let mut cands: Vec<(f64, Vec<f64>)> = (0..cfg.n_ce)
            .map(|_| {
                let w: Vec<f64> = (0..3).map(|j| truncated_normal(&mut s, 1.0, 0.5, sp.lower[j], sp.upper[j])).collect();
                (f(&w, 0).unwrap(), w)
            })
            .collect();
        cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for j in 0..3 {
            let m = cands[..10].iter().map(|c| c.1[j]).sum::<f64>() / 10.0;
            assert!((res.trace[1].mean[j] - m).abs() < 1e-12);
        }
    }
}
