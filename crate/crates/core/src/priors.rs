//! Lognormal priors over the soil parameters and realizations drawn from them.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PdtError, Result};
use crate::rng::{self, StreamRng};
use crate::scalar::{lit, Scalar};
use crate::stats;

/// Lognormal distribution parameterized in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LognormalDist<T: Scalar = f64> {
    log_mean: T,
    log_std: T,
    unit: String,
}

impl<T: Scalar> LognormalDist<T> {
    pub fn new(log_mean: T, log_std: T, unit: impl Into<String>) -> Result<Self> {
        if !log_mean.is_finite() {
            return Err(PdtError::Domain(format!("log mean {log_mean} is not finite")));
        }
        if !(log_std > T::zero()) || !log_std.is_finite() {
            return Err(PdtError::Domain(format!(
                "log standard deviation {log_std} must be positive"
            )));
        }
        Ok(Self {
            log_mean,
            log_std,
            unit: unit.into(),
        })
    }

    pub fn log_mean(&self) -> T {
        self.log_mean
    }

    pub fn log_std(&self) -> T {
        self.log_std
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn mean(&self) -> T {
        (self.log_mean + self.log_std * self.log_std / lit(2.0)).exp()
    }

    pub fn median(&self) -> T {
        self.log_mean.exp()
    }

    pub fn std(&self) -> T {
        let s2 = self.log_std * self.log_std;
        self.mean() * s2.exp_m1().sqrt()
    }

    /// Coefficient of variation, `sqrt(exp(s²) − 1)`.
    pub fn cov(&self) -> T {
        (self.log_std * self.log_std).exp_m1().sqrt()
    }

    pub fn pdf(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        let z = (x.ln() - self.log_mean) / self.log_std;
        (-(z * z) / lit(2.0)).exp() / (x * self.log_std * (T::TAU()).sqrt())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let z: f64 = rng.sample(StandardNormal);
        (self.log_mean + self.log_std * T::lit(z)).exp()
    }

    /// Inflates the log standard deviation by `sqrt(1 + 1/n)`, the plug-in predictive spread
    /// for a new draw when the log mean was estimated from `n` samples.
    pub fn with_predictive_inflation(mut self, n: usize) -> Self {
        let n = T::from_usize(n.max(1)).unwrap();
        self.log_std = self.log_std * (T::one() + T::one() / n).sqrt();
        self
    }

    pub fn cast<U: Scalar>(&self) -> LognormalDist<U> {
        LognormalDist {
            log_mean: U::lit(self.log_mean.to_f64_lossy()),
            log_std: U::lit(self.log_std.to_f64_lossy()),
            unit: self.unit.clone(),
        }
    }
}

/// Plug-in maximum likelihood fit in log space (n−1 denominator for the spread).
pub fn fit_lognormal<T: Scalar>(samples: &[T], unit: impl Into<String>) -> Result<LognormalDist<T>> {
    if let Some((index, value)) = samples
        .iter()
        .enumerate()
        .find(|(_, &x)| !(x > T::zero()) || !x.is_finite())
    {
        return Err(PdtError::NonPositiveSample {
            index,
            value: value.to_f64_lossy(),
        });
    }
    if samples.len() < 2 {
        return Err(PdtError::InsufficientData {
            got: samples.len(),
            needed: 2,
        });
    }
    let logs: Vec<T> = samples.iter().map(|x| x.ln()).collect();
    let log_mean = stats::mean(&logs);
    let log_std = stats::sample_std(&logs);
    if !(log_std > T::zero()) {
        return Err(PdtError::DegenerateData);
    }
    LognormalDist::new(log_mean, log_std, unit)
}

/// Lognormal with the given arithmetic mean and coefficient of variation.
pub fn from_moments<T: Scalar>(mean: T, cov: T, unit: impl Into<String>) -> Result<LognormalDist<T>> {
    if !(mean > T::zero()) || !(cov > T::zero()) || !mean.is_finite() || !cov.is_finite() {
        return Err(PdtError::Domain(format!(
            "mean ({mean}) and coefficient of variation ({cov}) must be positive"
        )));
    }
    let log_var = (cov * cov).ln_1p();
    let log_std = log_var.sqrt();
    let log_mean = mean.ln() - log_var / lit(2.0);
    LognormalDist::new(log_mean, log_std, unit)
}

/// The nine soil parameters of the state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoilParam {
    SigmaL,
    SigmaC,
    GammaCl,
    GammaEmb,
    M0,
    Ml,
    WN,
    Cv,
    Ch,
}

impl SoilParam {
    pub const ALL: [SoilParam; 9] = [
        SoilParam::SigmaL,
        SoilParam::SigmaC,
        SoilParam::GammaCl,
        SoilParam::GammaEmb,
        SoilParam::M0,
        SoilParam::Ml,
        SoilParam::WN,
        SoilParam::Cv,
        SoilParam::Ch,
    ];

    pub fn key(self) -> &'static str {
        match self {
            SoilParam::SigmaL => "sigma_L",
            SoilParam::SigmaC => "sigma_c",
            SoilParam::GammaCl => "gamma_cl",
            SoilParam::GammaEmb => "gamma_emb",
            SoilParam::M0 => "M0",
            SoilParam::Ml => "ML",
            SoilParam::WN => "wN",
            SoilParam::Cv => "cv",
            SoilParam::Ch => "ch",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            SoilParam::SigmaL | SoilParam::SigmaC | SoilParam::M0 | SoilParam::Ml => "kPa",
            SoilParam::GammaCl | SoilParam::GammaEmb => "kN/m3",
            SoilParam::WN => "-",
            SoilParam::Cv | SoilParam::Ch => "m2/year",
        }
    }
}

impl fmt::Display for SoilParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// One lognormal prior per soil parameter. Every field is mandatory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoilPriorSet<T: Scalar = f64> {
    pub sigma_l: LognormalDist<T>,
    pub sigma_c: LognormalDist<T>,
    pub gamma_cl: LognormalDist<T>,
    pub gamma_emb: LognormalDist<T>,
    pub m0: LognormalDist<T>,
    pub ml: LognormalDist<T>,
    pub w_n: LognormalDist<T>,
    pub cv: LognormalDist<T>,
    pub ch: LognormalDist<T>,
}

impl<T: Scalar> SoilPriorSet<T> {
    pub fn get(&self, p: SoilParam) -> &LognormalDist<T> {
        match p {
            SoilParam::SigmaL => &self.sigma_l,
            SoilParam::SigmaC => &self.sigma_c,
            SoilParam::GammaCl => &self.gamma_cl,
            SoilParam::GammaEmb => &self.gamma_emb,
            SoilParam::M0 => &self.m0,
            SoilParam::Ml => &self.ml,
            SoilParam::WN => &self.w_n,
            SoilParam::Cv => &self.cv,
            SoilParam::Ch => &self.ch,
        }
    }

    pub fn cast<U: Scalar>(&self) -> SoilPriorSet<U> {
        SoilPriorSet {
            sigma_l: self.sigma_l.cast(),
            sigma_c: self.sigma_c.cast(),
            gamma_cl: self.gamma_cl.cast(),
            gamma_emb: self.gamma_emb.cast(),
            m0: self.m0.cast(),
            ml: self.ml.cast(),
            w_n: self.w_n.cast(),
            cv: self.cv.cast(),
            ch: self.ch.cast(),
        }
    }
}

/// One realization of the soil parameters.
///
/// Units: pressures and moduli in kPa, unit weights in kN/m³, water content as a fraction,
/// consolidation coefficients in m²/year. `w_n` is carried but not consumed by the settlement
/// model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoilSample<T: Scalar = f64> {
    pub sigma_l: T,
    pub sigma_c: T,
    pub gamma_cl: T,
    pub gamma_emb: T,
    pub m0: T,
    pub ml: T,
    pub w_n: T,
    pub cv: T,
    pub ch: T,
}

impl<T: Scalar> SoilSample<T> {
    pub fn get(&self, p: SoilParam) -> T {
        match p {
            SoilParam::SigmaL => self.sigma_l,
            SoilParam::SigmaC => self.sigma_c,
            SoilParam::GammaCl => self.gamma_cl,
            SoilParam::GammaEmb => self.gamma_emb,
            SoilParam::M0 => self.m0,
            SoilParam::Ml => self.ml,
            SoilParam::WN => self.w_n,
            SoilParam::Cv => self.cv,
            SoilParam::Ch => self.ch,
        }
    }

    pub fn set(&mut self, p: SoilParam, v: T) {
        match p {
            SoilParam::SigmaL => self.sigma_l = v,
            SoilParam::SigmaC => self.sigma_c = v,
            SoilParam::GammaCl => self.gamma_cl = v,
            SoilParam::GammaEmb => self.gamma_emb = v,
            SoilParam::M0 => self.m0 = v,
            SoilParam::Ml => self.ml = v,
            SoilParam::WN => self.w_n = v,
            SoilParam::Cv => self.cv = v,
            SoilParam::Ch => self.ch = v,
        }
    }

    pub fn is_valid(&self) -> bool {
        SoilParam::ALL
            .iter()
            .all(|&p| self.get(p) > T::zero() && self.get(p).is_finite())
            && self.sigma_c <= self.sigma_l
    }
}

const REJECTION_WINDOW: u64 = 1_000_000;
const MIN_ACCEPTANCE: f64 = 0.01;

/// Draws `n` soil realizations from the stream `(seed, "soil", 0)`.
pub fn sample_soil<T: Scalar>(priors: &SoilPriorSet<T>, seed: u64, n: usize) -> Result<Vec<SoilSample<T>>> {
    let mut rng = rng::stream(seed, rng::tags::SOIL, 0);
    sample_soil_with(priors, &mut rng, n)
}

/// Draws `n` independent realizations, rejecting joint draws with σ′_c > σ′_L.
pub fn sample_soil_with<T: Scalar>(
    priors: &SoilPriorSet<T>,
    rng: &mut StreamRng,
    n: usize,
) -> Result<Vec<SoilSample<T>>> {
    if n == 0 {
        return Err(PdtError::Domain("sample count must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(n);
    let mut attempts: u64 = 0;
    let mut accepted: u64 = 0;
    while out.len() < n {
        let mut s = SoilSample {
            sigma_l: T::zero(),
            sigma_c: T::zero(),
            gamma_cl: T::zero(),
            gamma_emb: T::zero(),
            m0: T::zero(),
            ml: T::zero(),
            w_n: T::zero(),
            cv: T::zero(),
            ch: T::zero(),
        };
        for p in SoilParam::ALL {
            s.set(p, priors.get(p).sample(rng));
        }
        attempts += 1;
        if s.sigma_c <= s.sigma_l {
            accepted += 1;
            out.push(s);
        }
        if attempts.is_multiple_of(REJECTION_WINDOW) {
            let rate = accepted as f64 / attempts as f64;
            if rate < MIN_ACCEPTANCE {
                return Err(PdtError::InconsistentPriors { attempts, rate });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn table_like_priors() -> SoilPriorSet {
        let m = |mean: f64, cov: f64, unit: &str| from_moments(mean, cov, unit).unwrap();
        SoilPriorSet {
            sigma_l: m(400.0, 0.06, "kPa"),
            sigma_c: m(55.0, 0.15, "kPa"),
            gamma_cl: m(16.0, 0.02, "kN/m3"),
            gamma_emb: m(20.8, 0.05, "kN/m3"),
            m0: m(4000.0, 0.3, "kPa"),
            ml: m(300.0, 0.2, "kPa"),
            w_n: m(0.75, 0.1, "-"),
            cv: m(0.2, 0.5, "m2/year"),
            ch: m(0.5, 0.5, "m2/year"),
        }
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let err = fit_lognormal::<f64>(&[E, E, E, E], "kPa").unwrap_err();
        assert_eq!(err, PdtError::DegenerateData);
    }

    #[test]
    fn two_point_fit_is_analytic() {
        let d = fit_lognormal::<f64>(&[1.0, E * E], "kPa").unwrap();
        assert!((d.log_mean() - 1.0).abs() < 1e-15);
        assert!((d.log_std() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert_eq!(
            fit_lognormal::<f64>(&[1.0, -2.0, 3.0], "kPa").unwrap_err(),
            PdtError::NonPositiveSample { index: 1, value: -2.0 }
        );
        assert_eq!(
            fit_lognormal::<f64>(&[1.0], "kPa").unwrap_err(),
            PdtError::InsufficientData { got: 1, needed: 2 }
        );
    }

    #[test]
    fn nine_draw_fit_recovers_log_mean() {
        // Oracle draws straight from a seeded normal, bypassing LognormalDist::sample.
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let draws: Vec<f64> = (0..9)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                (0.5 + 0.2 * z).exp()
            })
            .collect();
        let d = fit_lognormal(&draws, "-").unwrap();
        assert!((d.log_mean() - 0.5).abs() <= 3.0 * (0.2 / 3.0));
    }

    #[test]
    fn moments_reproduce_table_means() {
        let g = from_moments(20.8f64, 0.05, "kN/m3").unwrap();
        assert!((g.mean() - 20.8).abs() / 20.8 < 1e-12);
        let cv = from_moments(0.2f64, 0.5, "m2/year").unwrap();
        assert!((cv.mean() - 0.2).abs() / 0.2 < 1e-12);
        assert!((cv.cov() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn vanishing_variance_limit() {
        let d = from_moments(1.0f64, 1e-9, "-").unwrap();
        assert!((d.log_mean() + 5e-19).abs() < 1e-30);
        assert!((d.log_std() - 1e-9).abs() < 1e-20);
    }

    #[test]
    fn from_moments_rejects_non_positive() {
        assert!(from_moments(0.0f64, 0.1, "-").is_err());
        assert!(from_moments(1.0f64, -0.1, "-").is_err());
    }

    #[test]
    fn pdf_integrates_to_one() {
        let d = from_moments(0.2f64, 0.5, "m2/year").unwrap();
        // Trapezoid rule in log space: ∫ f(x) dx = ∫ f(e^u) e^u du.
        let (lo, hi, n) = (d.log_mean() - 10.0 * d.log_std(), d.log_mean() + 10.0 * d.log_std(), 20_000);
        let h = (hi - lo) / n as f64;
        let integral: f64 = (0..=n)
            .map(|i| {
                let u = lo + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * d.pdf(u.exp()) * u.exp()
            })
            .sum::<f64>()
            * h;
        assert!((integral - 1.0).abs() < 1e-3);
    }

    #[test]
    fn single_sample_is_physical() {
        let s = sample_soil(&table_like_priors(), 99, 1).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0].is_valid());
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = table_like_priors();
        assert_eq!(sample_soil(&p, 5, 50).unwrap(), sample_soil(&p, 5, 50).unwrap());
        assert_ne!(sample_soil(&p, 5, 50).unwrap(), sample_soil(&p, 6, 50).unwrap());
    }

    #[test]
    fn embankment_unit_weight_mean_converges() {
        let s = sample_soil(&table_like_priors(), 11, 100_000).unwrap();
        let g: Vec<f64> = s.iter().map(|x| x.gamma_emb).collect();
        let m = stats::mean(&g);
        assert!((m - 20.8).abs() / 20.8 < 0.005, "{m}");
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(sample_soil(&table_like_priors(), 1, 0).is_err());
    }

    #[test]
    fn inconsistent_priors_detected() {
        let mut p = table_like_priors();
        p.sigma_l = from_moments(1.0f64, 0.01, "kPa").unwrap();
        p.sigma_c = from_moments(100.0f64, 0.01, "kPa").unwrap();
        match sample_soil(&p, 1, 1) {
            Err(PdtError::InconsistentPriors { attempts, .. }) => assert_eq!(attempts, 1_000_000),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn f32_priors_work() {
        let d = from_moments(20.8f32, 0.05, "kN/m3").unwrap();
        assert!((d.mean() - 20.8).abs() < 1e-4);
    }
}
