use crate::error::{PdtError, Result};
use crate::scalar::{lit, Scalar};

use super::{ConsolidationModel, PvdDesign, WEEKS_PER_YEAR};

/// Below this time factor the Fourier series equals `2·sqrt(T/π)` up to terms of order
/// `exp(−1/(4T)) < 1e-20`, and the closed form is used instead of summing hundreds of terms.
const SHORT_TIME_FACTOR: f64 = 0.02;

/// Terzaghi average degree of consolidation for time factor `tv`.
pub fn vertical_degree_from_factor<T: Scalar>(tv: T, tolerance: T) -> T {
    if !(tv > T::zero()) {
        return T::zero();
    }
    if tv < lit(SHORT_TIME_FACTOR) {
        return lit::<T>(2.0) * (tv / T::PI()).sqrt();
    }
    let two = lit::<T>(2.0);
    let mut remaining = T::zero();
    let mut m = 0usize;
    loop {
        let big_m = T::from_usize(2 * m + 1).unwrap() * T::FRAC_PI_2();
        let m2 = big_m * big_m;
        let term = two / m2 * (-m2 * tv).exp();
        remaining = remaining + term;
        if term < tolerance {
            break;
        }
        m += 1;
    }
    (T::one() - remaining).max(T::zero()).min(T::one())
}

/// Vertical degree for `cv` in m²/year, drainage path in m and time in weeks.
pub fn vertical_degree<T: Scalar>(cv: T, drain_path: T, t_weeks: T, tolerance: T) -> T {
    let t_years = t_weeks / lit(WEEKS_PER_YEAR);
    vertical_degree_from_factor(cv * t_years / (drain_path * drain_path), tolerance)
}

/// Hansbo's drain factor μ(n) for an ideal drain (no smear, no well resistance).
pub fn hansbo_mu<T: Scalar>(n: T) -> Result<T> {
    if !(n > T::one()) {
        return Err(PdtError::InvalidGeometry(format!(
            "drain spacing ratio n = {n} must exceed 1"
        )));
    }
    let n2 = n * n;
    Ok(n2 / (n2 - T::one()) * n.ln() - (lit::<T>(3.0) * n2 - T::one()) / (lit::<T>(4.0) * n2))
}

pub fn horizontal_degree_from_factor<T: Scalar>(th: T, mu: T) -> T {
    if !(th > T::zero()) {
        return T::zero();
    }
    T::one() - (-lit::<T>(8.0) * th / mu).exp()
}

/// Radial degree of consolidation towards the drains for `ch` in m²/year and time in weeks.
pub fn horizontal_degree<T: Scalar>(ch: T, pvd: &PvdDesign<T>, t_weeks: T) -> Result<T> {
    let de = pvd.influence_diameter();
    let mu = hansbo_mu(de / pvd.equivalent_drain_diameter)?;
    let t_years = t_weeks / lit(WEEKS_PER_YEAR);
    Ok(horizontal_degree_from_factor(ch * t_years / (de * de), mu))
}

pub fn combined_degree<T: Scalar>(uv: T, uh: T) -> T {
    T::one() - (T::one() - uv) * (T::one() - uh)
}

/// Degree of consolidation as a function of time for one soil realization, with the unit
/// conversions folded into per-week rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeCurve<T: Scalar = f64> {
    /// Vertical time factor per week.
    vertical_rate: T,
    /// `8·T_h/μ` per week.
    horizontal_rate: T,
    tolerance: T,
}

impl<T: Scalar> DegreeCurve<T> {
    pub fn new(model: &ConsolidationModel<T>, cv: T, ch: T) -> Result<Self> {
        let pvd = &model.pvd;
        let h = pvd.drain_path(model.geometry.clay_thickness);
        let de = pvd.influence_diameter();
        let mu = hansbo_mu(de / pvd.equivalent_drain_diameter)?;
        let per_week = T::one() / lit(WEEKS_PER_YEAR);
        Ok(Self {
            vertical_rate: cv * per_week / (h * h),
            horizontal_rate: lit::<T>(8.0) * ch * per_week / (de * de * mu),
            tolerance: model.solver.series_tolerance,
        })
    }

    pub fn vertical(&self, t_weeks: T) -> T {
        vertical_degree_from_factor(self.vertical_rate * t_weeks, self.tolerance)
    }

    pub fn horizontal(&self, t_weeks: T) -> T {
        if !(t_weeks > T::zero()) {
            return T::zero();
        }
        -(-self.horizontal_rate * t_weeks).exp_m1()
    }

    pub fn at(&self, t_weeks: T) -> T {
        combined_degree(self.vertical(t_weeks), self.horizontal(t_weeks))
    }
}
