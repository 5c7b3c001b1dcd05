use serde::{Deserialize, Serialize};

use crate::error::{PdtError, Result};
use crate::priors::SoilSample;
use crate::scalar::{lit, Scalar};

use super::{long_term_settlement, representative_stress, ConsolidationModel, DegreeCurve};

/// Surcharge decisions: initial height plus at most one increment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionSchedule<T: Scalar = f64> {
    /// Initial surcharge height above the embankment, m.
    pub h0: T,
    /// Week at which the increment is placed.
    pub t_add: Option<u32>,
    /// Increment height, m. Zero when there is no increment.
    pub h_add: T,
}

impl<T: Scalar> ActionSchedule<T> {
    pub fn initial(h0: T) -> Self {
        Self {
            h0,
            t_add: None,
            h_add: T::zero(),
        }
    }

    pub fn with_increment(h0: T, t_add: u32, h_add: T) -> Self {
        Self {
            h0,
            t_add: Some(t_add),
            h_add,
        }
    }

    pub fn has_increment(&self) -> bool {
        self.t_add.is_some()
    }

    pub fn validate(&self, t_max: u32) -> Result<()> {
        if self.h0 < T::zero() || !self.h0.is_finite() {
            return Err(PdtError::Domain(format!("initial surcharge {} must be non-negative", self.h0)));
        }
        if self.h_add < T::zero() || !self.h_add.is_finite() {
            return Err(PdtError::Domain(format!("increment {} must be non-negative", self.h_add)));
        }
        match self.t_add {
            Some(t) if t < 1 || t > t_max => Err(PdtError::Domain(format!(
                "increment week {t} outside [1, {t_max}]"
            ))),
            None if self.h_add != T::zero() => Err(PdtError::Domain("increment height without a week".into())),
            _ => Ok(()),
        }
    }

    pub fn cast<U: Scalar>(&self) -> ActionSchedule<U> {
        ActionSchedule {
            h0: U::lit(self.h0.to_f64_lossy()),
            t_add: self.t_add,
            h_add: U::lit(self.h_add.to_f64_lossy()),
        }
    }
}

/// Clock shift that keeps `S` continuous when the long-term settlement jumps from `s_old` to
/// `s_new` at `t_add`: solves `U(t_add − t_shift)·s_new = U(t_add)·s_old` on `[0, t_add]`.
///
/// Bracketing Illinois iteration with bisection fallback; stops when the bracket is narrower
/// than `tolerance` weeks or the continuity residual is at round-off level.
pub fn compute_t_shift<T: Scalar, F: Fn(T) -> T>(u: F, s_old: T, s_new: T, t_add: T, tolerance: T) -> Result<T> {
    if s_old < T::zero() || s_new < s_old {
        return Err(PdtError::Domain(format!(
            "clock shift requires 0 <= S_inf_old ({s_old}) <= S_inf_new ({s_new})"
        )));
    }
    if s_new == s_old {
        return Ok(T::zero());
    }
    let target = u(t_add) * s_old;
    if target == T::zero() {
        return Ok(t_add);
    }
    let g = |ts: T| u(t_add - ts) * s_new - target;
    let (mut a, mut b) = (T::zero(), t_add);
    let (mut fa, mut fb) = (g(a), g(b));
    if fa < T::zero() || fb > T::zero() {
        return Err(PdtError::ContinuityUnsolvable {
            t_add: t_add.to_f64_lossy(),
        });
    }
    let residual_tol = target * lit(4.0) * T::epsilon();
    let mut best = if fa.abs() <= fb.abs() { (a, fa) } else { (b, fb) };
    let mut side = 0i8;
    for iter in 0..400 {
        if (b - a) <= tolerance || best.1.abs() <= residual_tol {
            break;
        }
        let mut c = if iter % 4 == 3 {
            (a + b) / lit(2.0)
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        if !(c > a && c < b) {
            c = (a + b) / lit(2.0);
        }
        let fc = g(c);
        if fc.abs() < best.1.abs() {
            best = (c, fc);
        }
        if fc == T::zero() {
            break;
        }
        if fc > T::zero() {
            a = c;
            fa = fc;
            if side == 1 {
                fb = fb / lit(2.0);
            }
            side = 1;
        } else {
            b = c;
            fb = fc;
            if side == -1 {
                fa = fa / lit(2.0);
            }
            side = -1;
        }
    }
    Ok(best.0)
}

/// Closed-form settlement and OCR history for one soil realization under one schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettlementModel<T: Scalar = f64> {
    curve: DegreeCurve<T>,
    sigma0: T,
    load_emb: T,
    load_sur: T,
    load_add: T,
    t_add: Option<T>,
    s_inf_before: T,
    s_inf_after: T,
    t_shift: T,
}

impl<T: Scalar> SettlementModel<T> {
    pub fn new(model: &ConsolidationModel<T>, soil: &SoilSample<T>, schedule: &ActionSchedule<T>) -> Result<Self> {
        let geom = &model.geometry;
        let curve = DegreeCurve::new(model, soil.cv, soil.ch)?;
        let load_emb = soil.gamma_emb * geom.embankment_height;
        let load_sur = soil.gamma_emb * schedule.h0;
        let load_add = if schedule.t_add.is_some() {
            soil.gamma_emb * schedule.h_add
        } else {
            T::zero()
        };
        let s_inf_before = long_term_settlement(soil, geom, load_emb + load_sur).map_err(|e| e.at_week(0))?;
        let t_add = schedule.t_add.map(|w| T::from_u32(w).unwrap());
        let (s_inf_after, t_shift) = match (schedule.t_add, t_add) {
            (Some(week), Some(t)) => {
                let s_after = if load_add > T::zero() {
                    long_term_settlement(soil, geom, load_emb + load_sur + load_add).map_err(|e| e.at_week(week))?
                } else {
                    s_inf_before
                };
                let shift = compute_t_shift(|x| curve.at(x), s_inf_before, s_after, t, model.solver.t_shift_tolerance)
                    .map_err(|e| e.at_week(week))?;
                (s_after, shift)
            }
            _ => (s_inf_before, T::zero()),
        };
        Ok(Self {
            curve,
            sigma0: representative_stress(geom, soil.gamma_cl),
            load_emb,
            load_sur,
            load_add,
            t_add,
            s_inf_before,
            s_inf_after,
            t_shift,
        })
    }

    fn after_increment(&self, t: T) -> bool {
        matches!(self.t_add, Some(ta) if t >= ta)
    }

    pub fn curve(&self) -> &DegreeCurve<T> {
        &self.curve
    }

    pub fn t_shift(&self) -> T {
        self.t_shift
    }

    /// Representative initial effective stress at clay mid-depth, kPa.
    pub fn sigma0(&self) -> T {
        self.sigma0
    }

    /// Degree of consolidation on the unshifted clock.
    pub fn degree(&self, t: T) -> T {
        self.curve.at(t)
    }

    /// Degree of consolidation driving the settlement (shifted clock after the increment).
    pub fn effective_degree(&self, t: T) -> T {
        if self.after_increment(t) {
            self.curve.at(t - self.t_shift)
        } else {
            self.curve.at(t)
        }
    }

    /// Degree of consolidation of the increment load, zero before it is placed.
    pub fn increment_degree(&self, t: T) -> T {
        match self.t_add {
            Some(ta) if t >= ta => self.curve.at(t - ta),
            _ => T::zero(),
        }
    }

    pub fn s_inf(&self, t: T) -> T {
        if self.after_increment(t) {
            self.s_inf_after
        } else {
            self.s_inf_before
        }
    }

    pub fn final_s_inf(&self) -> T {
        self.s_inf_after
    }

    pub fn settlement(&self, t: T) -> T {
        self.effective_degree(t) * self.s_inf(t)
    }

    /// Overconsolidation ratio after unloading at `t`: preconsolidation from the consolidated
    /// share of the full preload (embankment plus surcharge plus increment) over the stress
    /// under the consolidated embankment alone.
    pub fn ocr(&self, t: T) -> T {
        let u = self.curve.at(t);
        let du = self.increment_degree(t);
        (self.sigma0 + u * (self.load_emb + self.load_sur) + du * self.load_add) / (self.sigma0 + u * self.load_emb)
    }

    pub fn load(&self, t: T) -> T {
        if self.after_increment(t) {
            self.load_emb + self.load_sur + self.load_add
        } else {
            self.load_emb + self.load_sur
        }
    }
}

/// Weekly tabulation of the quantities of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T: Scalar = f64> {
    pub weeks: Vec<u32>,
    /// Settlement, m.
    pub settlement: Vec<T>,
    pub ocr: Vec<T>,
    /// Effective degree of consolidation.
    pub degree: Vec<T>,
    /// Long-term settlement under the load in place, m.
    pub s_inf: Vec<T>,
    /// Surface load, kPa.
    pub load: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.weeks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weeks.is_empty()
    }

    pub fn last_week(&self) -> u32 {
        self.weeks.last().copied().unwrap_or(0)
    }

    pub fn settlement_at(&self, week: u32) -> Option<T> {
        self.settlement.get(week as usize).copied()
    }

    pub fn ocr_at(&self, week: u32) -> Option<T> {
        self.ocr.get(week as usize).copied()
    }
}

/// Tabulates weeks `0..=t_end`.
pub fn simulate_trajectory<T: Scalar>(
    model: &ConsolidationModel<T>,
    soil: &SoilSample<T>,
    schedule: &ActionSchedule<T>,
    t_end: u32,
) -> Result<Trajectory<T>> {
    schedule.validate(t_end.max(schedule.t_add.unwrap_or(0)))?;
    let sm = SettlementModel::new(model, soil, schedule)?;
    Ok(tabulate(&sm, t_end))
}

pub(crate) fn tabulate<T: Scalar>(sm: &SettlementModel<T>, t_end: u32) -> Trajectory<T> {
    let n = t_end as usize + 1;
    let mut traj = Trajectory {
        weeks: Vec::with_capacity(n),
        settlement: Vec::with_capacity(n),
        ocr: Vec::with_capacity(n),
        degree: Vec::with_capacity(n),
        s_inf: Vec::with_capacity(n),
        load: Vec::with_capacity(n),
    };
    for w in 0..=t_end {
        let t = T::from_u32(w).unwrap();
        let u = sm.effective_degree(t);
        let s_inf = sm.s_inf(t);
        traj.weeks.push(w);
        traj.settlement.push(u * s_inf);
        traj.ocr.push(sm.ocr(t));
        traj.degree.push(u);
        traj.s_inf.push(s_inf);
        traj.load.push(sm.load(t));
    }
    traj
}
