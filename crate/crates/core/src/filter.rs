//! Particle representation of the digital state and its Bayesian update from settlement
//! measurements.
//!
//! The soil parameters are static, so the only transition input is the surcharge schedule.
//! Particles live in a shared pool; the belief itself is a list of pool indices with weights.
//! Resampling copies indices, never settlement models, so every duplicate shares one cached
//! model and the cache is rebuilt only when an action changes the load history.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::consolidation::{ActionSchedule, ConsolidationModel, SettlementModel};
use crate::error::{PdtError, Result};
use crate::priors::{sample_soil_with, SoilParam, SoilPriorSet, SoilSample};
use crate::rng::{self, StreamRng};
use crate::scalar::{lit, Scalar};
use crate::stats;

/// One weekly settlement observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement<T: Scalar = f64> {
    pub t: u32,
    /// Observed settlement, m.
    pub z_s: T,
    /// Standard deviation of the measurement error, m.
    pub sigma_eps: T,
}

impl<T: Scalar> Measurement<T> {
    pub fn new(t: u32, z_s: T, sigma_eps: T) -> Result<Self> {
        if !(sigma_eps > T::zero()) || !z_s.is_finite() {
            return Err(PdtError::Domain(format!(
                "measurement needs finite z_s and sigma_eps > 0 (got {z_s}, {sigma_eps})"
            )));
        }
        Ok(Self { t, z_s, sigma_eps })
    }
}

/// Gaussian measurement error density of `z_s − s_pred`.
pub fn likelihood<T: Scalar>(z: &Measurement<T>, s_pred: T) -> T {
    log_likelihood(z, s_pred).exp()
}

pub fn log_likelihood<T: Scalar>(z: &Measurement<T>, s_pred: T) -> T {
    let r = (z.z_s - s_pred) / z.sigma_eps;
    -(r * r) / lit(2.0) - (z.sigma_eps * T::TAU().sqrt()).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    #[default]
    Multinomial,
    Systematic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterOptions<T: Scalar = f64> {
    #[serde(default)]
    pub resampling: Resampling,
    /// Standard deviation of the multiplicative log-space jitter applied after resampling.
    /// Zero disables rejuvenation.
    #[serde(default)]
    pub jitter: T,
}

impl<T: Scalar> Default for FilterOptions<T> {
    fn default() -> Self {
        Self {
            resampling: Resampling::Multinomial,
            jitter: T::zero(),
        }
    }
}

impl<T: Scalar> FilterOptions<T> {
    pub fn cast<U: Scalar>(&self) -> FilterOptions<U> {
        FilterOptions {
            resampling: self.resampling,
            jitter: U::lit(self.jitter.to_f64_lossy()),
        }
    }
}

/// A soil realization with its settlement model under the belief's schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle<T: Scalar = f64> {
    pub soil: SoilSample<T>,
    pub model: SettlementModel<T>,
}

/// Quantity evaluated per particle for posterior summaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "t")]
pub enum Functional<T: Scalar = f64> {
    SettlementAt(T),
    OcrAt(T),
    SInf,
}

impl<T: Scalar> Functional<T> {
    pub fn eval(&self, m: &SettlementModel<T>) -> T {
        match *self {
            Functional::SettlementAt(t) => m.settlement(t),
            Functional::OcrAt(t) => m.ocr(t),
            Functional::SInf => m.final_s_inf(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorStats<T: Scalar = f64> {
    pub mean: T,
    /// Population standard deviation.
    pub std: T,
    pub probs: Vec<T>,
    pub quantiles: Vec<T>,
}

impl<T: Scalar> PosteriorStats<T> {
    /// `std / mean`, undefined when |mean| < 1e-9.
    pub fn cov(&self) -> Result<T> {
        if self.mean.abs() < lit(1e-9) {
            return Err(PdtError::UndefinedCov {
                mean: self.mean.to_f64_lossy(),
            });
        }
        Ok(self.std / self.mean)
    }

    pub fn quantile(&self, p: T) -> Option<T> {
        self.probs.iter().position(|&q| q == p).map(|i| self.quantiles[i])
    }
}

/// Diagnostics of one update, before resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateReport<T: Scalar = f64> {
    /// Normalized weights per member before resampling.
    pub weights: Vec<T>,
    pub log_likelihoods: Vec<T>,
    pub max_log_likelihood: T,
    pub effective_sample_size: T,
    /// Smallest |z_s − s_pred| / σ_ε over the members.
    pub min_standardized_residual: T,
}

/// Weighted particle set representing the digital state.
#[derive(Debug, Clone)]
pub struct Belief<T: Scalar = f64> {
    context: Arc<ConsolidationModel<T>>,
    pool: Arc<Vec<Particle<T>>>,
    members: Vec<u32>,
    weights: Vec<T>,
    t_current: u32,
    schedule: ActionSchedule<T>,
    rng: StreamRng,
    options: FilterOptions<T>,
}

/// Equal-weight belief of `n_s` prior draws. Particles come from stream `(seed, "particles")`
/// and resampling from `(seed, "filter")`.
pub fn init_belief<T: Scalar>(
    context: Arc<ConsolidationModel<T>>,
    priors: &SoilPriorSet<T>,
    schedule: ActionSchedule<T>,
    n_s: usize,
    seed: u64,
    options: FilterOptions<T>,
) -> Result<Belief<T>> {
    if n_s < 2 {
        return Err(PdtError::InvalidBelief(format!("n_s = {n_s}, at least 2 particles required")));
    }
    let mut draw_rng = rng::stream(seed, rng::tags::PARTICLES, 0);
    let soils = sample_soil_with(priors, &mut draw_rng, n_s)?;
    Belief::from_soils(context, soils, schedule, rng::stream(seed, rng::tags::FILTER, 0), options)
}

impl<T: Scalar> Belief<T> {
    /// Equal-weight belief over the given realizations.
    pub fn from_soils(
        context: Arc<ConsolidationModel<T>>,
        soils: Vec<SoilSample<T>>,
        schedule: ActionSchedule<T>,
        rng: StreamRng,
        options: FilterOptions<T>,
    ) -> Result<Self> {
        if soils.len() < 2 {
            return Err(PdtError::InvalidBelief(format!(
                "n_s = {}, at least 2 particles required",
                soils.len()
            )));
        }
        let pool = soils
            .into_iter()
            .map(|soil| {
                Ok(Particle {
                    model: SettlementModel::new(&context, &soil, &schedule)?,
                    soil,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = pool.len();
        Ok(Self {
            context,
            members: (0..n as u32).collect(),
            weights: vec![T::one() / T::from_usize(n).unwrap(); n],
            pool: Arc::new(pool),
            t_current: 0,
            schedule,
            rng,
            options,
        })
    }

    pub fn n_s(&self) -> usize {
        self.members.len()
    }

    pub fn t_current(&self) -> u32 {
        self.t_current
    }

    pub fn schedule(&self) -> &ActionSchedule<T> {
        &self.schedule
    }

    pub fn context(&self) -> &Arc<ConsolidationModel<T>> {
        &self.context
    }

    pub fn options(&self) -> &FilterOptions<T> {
        &self.options
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Particles in member order, duplicates included.
    pub fn particles(&self) -> impl Iterator<Item = &Particle<T>> + '_ {
        self.members.iter().map(|&i| &self.pool[i as usize])
    }

    /// Number of distinct particles among the members.
    pub fn unique_count(&self) -> usize {
        let mut seen = vec![false; self.pool.len()];
        self.members.iter().filter(|&&i| !std::mem::replace(&mut seen[i as usize], true)).count()
    }

    pub fn effective_sample_size(&self) -> T {
        let sq: Vec<T> = self.weights.iter().map(|&w| w * w).collect();
        T::one() / stats::pairwise_sum(&sq)
    }

    /// SHA-256 over the members' soil values, weights, current week, schedule and random
    /// stream position. Equal hashes mean the beliefs evolve identically from here on.
    pub fn state_hash(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |x: T| h.update(x.to_f64_lossy().to_bits().to_le_bytes());
        for (p, &w) in self.particles().zip(&self.weights) {
            for param in SoilParam::ALL {
                put(p.soil.get(param));
            }
            put(w);
        }
        put(self.schedule.h0);
        put(self.schedule.h_add);
        h.update(self.t_current.to_le_bytes());
        h.update(self.schedule.t_add.map_or(-1i64, i64::from).to_le_bytes());
        h.update(self.rng.get_word_pos().to_le_bytes());
        hex::encode(h.finalize())
    }

    /// Per-member values of a pool-level quantity, evaluated once per distinct particle.
    pub fn member_values<F: Fn(&Particle<T>) -> T>(&self, f: F) -> Vec<T> {
        let mut cache: Vec<Option<T>> = vec![None; self.pool.len()];
        self.members
            .iter()
            .map(|&i| *cache[i as usize].get_or_insert_with(|| f(&self.pool[i as usize])))
            .collect()
    }

    pub fn values(&self, functional: &Functional<T>) -> Vec<T> {
        self.member_values(|p| functional.eval(&p.model))
    }

    /// Weighted mean, population std and inverse-CDF quantiles of a functional.
    pub fn posterior_stats(&self, functional: &Functional<T>, probs: &[T]) -> Result<PosteriorStats<T>> {
        if self.members.is_empty() {
            return Err(PdtError::InvalidBelief("empty belief".into()));
        }
        let values = self.values(functional);
        Ok(stats_of(&values, &self.weights, probs))
    }

    /// Weighted fraction of particles with `S(t_max) < s_target`.
    pub fn prob_below_target(&self, s_target: T, t_max: u32) -> T {
        let t = T::from_u32(t_max).unwrap();
        let below = self.member_values(|p| {
            if p.model.settlement(t) < s_target {
                T::one()
            } else {
                T::zero()
            }
        });
        let w: Vec<T> = below.iter().zip(&self.weights).map(|(&b, &w)| b * w).collect();
        stats::pairwise_sum(&w)
    }

    /// Bayesian update with a settlement measurement followed by resampling.
    pub fn update(&self, z: &Measurement<T>) -> Result<Self> {
        self.update_with_report(z, None).map(|(b, _)| b)
    }

    /// Update with an optional property-data likelihood factor per particle.
    pub fn update_with_report(
        &self,
        z: &Measurement<T>,
        property_likelihood: Option<&dyn Fn(&SoilSample<T>) -> T>,
    ) -> Result<(Self, UpdateReport<T>)> {
        if z.t < self.t_current {
            return Err(PdtError::OutOfOrder {
                got: z.t,
                current: self.t_current,
            });
        }
        if !(z.sigma_eps > T::zero()) {
            return Err(PdtError::Domain("sigma_eps must be positive".into()));
        }
        let t = T::from_u32(z.t).unwrap();
        let log_lik = self.member_values(|p| {
            let mut ll = log_likelihood(z, p.model.settlement(t));
            if let Some(prop) = property_likelihood {
                ll = ll + prop(&p.soil).ln();
            }
            ll
        });
        let max_ll = log_lik.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        if !(max_ll >= T::min_positive_value().ln()) {
            return Err(PdtError::DegenerateUpdate {
                max_log_likelihood: max_ll.to_f64_lossy(),
            });
        }
        let log_w: Vec<T> = self
            .weights
            .iter()
            .zip(&log_lik)
            .map(|(&w, &ll)| w.ln() + ll)
            .collect();
        let top = log_w.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let raw: Vec<T> = log_w.iter().map(|&lw| (lw - top).exp()).collect();
        let total = stats::pairwise_sum(&raw);
        let weights: Vec<T> = raw.iter().map(|&r| r / total).collect();
        let min_resid = self
            .member_values(|p| ((z.z_s - p.model.settlement(t)) / z.sigma_eps).abs())
            .into_iter()
            .fold(T::infinity(), T::min);

        let mut next = self.clone();
        next.t_current = z.t;
        next.weights = weights.clone();
        next.resample();
        if next.options.jitter > T::zero() {
            next.rejuvenate();
        }
        let sq: Vec<T> = weights.iter().map(|&w| w * w).collect();
        let report = UpdateReport {
            effective_sample_size: T::one() / stats::pairwise_sum(&sq),
            weights,
            log_likelihoods: log_lik,
            max_log_likelihood: max_ll,
            min_standardized_residual: min_resid,
        };
        Ok((next, report))
    }

    fn resample(&mut self) {
        let n = self.members.len();
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = T::zero();
        for &w in &self.weights {
            acc = acc + w;
            cumulative.push(acc);
        }
        let pick = |u: T| cumulative.partition_point(|&c| c <= u).min(n - 1);
        let nf = T::from_usize(n).unwrap();
        let chosen: Vec<usize> = match self.options.resampling {
            Resampling::Multinomial => (0..n)
                .map(|_| pick(T::lit(self.rng.random::<f64>()) * acc))
                .collect(),
            Resampling::Systematic => {
                let u0 = T::lit(self.rng.random::<f64>()) / nf;
                (0..n)
                    .map(|k| pick((u0 + T::from_usize(k).unwrap() / nf) * acc))
                    .collect()
            }
        };
        self.members = chosen.into_iter().map(|i| self.members[i]).collect();
        self.weights = vec![T::one() / nf; n];
    }

    fn rejuvenate(&mut self) {
        let jitter = self.options.jitter;
        let mut pool = Vec::with_capacity(self.members.len());
        for &i in &self.members {
            let original = self.pool[i as usize];
            let mut soil = original.soil;
            for p in SoilParam::ALL {
                let z: f64 = self.rng.sample(StandardNormal);
                soil.set(p, soil.get(p) * (jitter * T::lit(z)).exp());
            }
            // a perturbation that leaves the model's domain keeps the original particle
            let moved = if soil.is_valid() {
                SettlementModel::new(&self.context, &soil, &self.schedule)
                    .ok()
                    .map(|model| Particle { soil, model })
            } else {
                None
            };
            pool.push(moved.unwrap_or(original));
        }
        self.members = (0..pool.len() as u32).collect();
        self.pool = Arc::new(pool);
    }

    /// Records the surcharge increment decided at `t_add` and rebuilds every particle's
    /// settlement model under the extended schedule.
    pub fn apply_action(&self, t_add: u32, h_add: T) -> Result<Self> {
        if self.schedule.has_increment() {
            return Err(PdtError::UnsupportedAction(
                "a surcharge increment was already applied".into(),
            ));
        }
        let schedule = ActionSchedule::with_increment(self.schedule.h0, t_add, h_add);
        schedule.validate(t_add.max(1))?;
        let mut next = self.clone();
        next.rebuild(schedule)?;
        Ok(next)
    }

    /// Copy of this belief with every particle re-simulated under `schedule`.
    pub fn with_schedule(&self, schedule: ActionSchedule<T>) -> Result<Self> {
        let mut next = self.clone();
        next.rebuild(schedule)?;
        Ok(next)
    }

    fn rebuild(&mut self, schedule: ActionSchedule<T>) -> Result<()> {
        let mut remap: Vec<Option<u32>> = vec![None; self.pool.len()];
        let mut pool = Vec::new();
        let mut members = Vec::with_capacity(self.members.len());
        for &i in &self.members {
            let slot = match remap[i as usize] {
                Some(s) => s,
                None => {
                    let soil = self.pool[i as usize].soil;
                    pool.push(Particle {
                        model: SettlementModel::new(&self.context, &soil, &schedule)?,
                        soil,
                    });
                    let s = (pool.len() - 1) as u32;
                    remap[i as usize] = Some(s);
                    s
                }
            };
            members.push(slot);
        }
        self.pool = Arc::new(pool);
        self.members = members;
        self.schedule = schedule;
        Ok(())
    }

    /// Per-member values of a quantity under a hypothetical schedule, without building a new
    /// belief. Used by what-if evaluations.
    pub fn values_under(&self, schedule: &ActionSchedule<T>, functional: &Functional<T>) -> Result<Vec<T>> {
        let mut cache: Vec<Option<T>> = vec![None; self.pool.len()];
        self.members
            .iter()
            .map(|&i| {
                if let Some(v) = cache[i as usize] {
                    return Ok(v);
                }
                let m = SettlementModel::new(&self.context, &self.pool[i as usize].soil, schedule)?;
                let v = functional.eval(&m);
                cache[i as usize] = Some(v);
                Ok(v)
            })
            .collect()
    }

    /// A belief with the same particles and current weights but at most `n` members, for cheap
    /// approximate queries. Members are taken with a fixed stride.
    pub fn thinned(&self, n: usize) -> Self {
        if n >= self.members.len() || n < 2 {
            return self.clone();
        }
        let stride = self.members.len() as f64 / n as f64;
        let idx: Vec<usize> = (0..n).map(|k| (k as f64 * stride) as usize).collect();
        let mut next = self.clone();
        next.members = idx.iter().map(|&k| self.members[k]).collect();
        let w: Vec<T> = idx.iter().map(|&k| self.weights[k]).collect();
        let total = stats::pairwise_sum(&w);
        next.weights = w.into_iter().map(|x| x / total).collect();
        next
    }
}

pub(crate) fn stats_of<T: Scalar>(values: &[T], weights: &[T], probs: &[T]) -> PosteriorStats<T> {
    let (mean, std) = stats::weighted_mean_std(values, weights);
    PosteriorStats {
        mean,
        std,
        probs: probs.to_vec(),
        quantiles: stats::weighted_quantiles(values, weights, probs),
    }
}
