//! One-dimensional consolidation of the clay under the embankment.
//!
//! Long-term settlement is the layer sum of strain increments from a bilinear constrained
//! modulus law; its time evolution follows the combined vertical (Terzaghi) and radial
//! (Hansbo, ideal drain) degree of consolidation. One surcharge increment is supported, with a
//! clock shift that keeps the settlement continuous at the increment.

mod degree;
mod settlement;
mod trajectory;

use serde::{Deserialize, Serialize};

use crate::error::{PdtError, Result};
use crate::scalar::{lit, Scalar};

pub use degree::{
    combined_degree, hansbo_mu, horizontal_degree, horizontal_degree_from_factor, vertical_degree,
    vertical_degree_from_factor, DegreeCurve,
};
pub use settlement::{
    initial_effective_stress, long_term_settlement, representative_stress, strain_increment,
    total_load,
};
pub use trajectory::{
    compute_t_shift, simulate_trajectory, ActionSchedule, SettlementModel, Trajectory,
};

/// Weeks per calendar year used for every unit conversion.
pub const WEEKS_PER_YEAR: f64 = 52.0;

/// Deterministic geometric boundary conditions of the embankment. Lengths in m, unit weights
/// in kN/m³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbankmentGeometry<T: Scalar = f64> {
    pub clay_thickness: T,
    pub crust_thickness: T,
    pub embankment_height: T,
    pub n_layers: usize,
    /// Depth of the water table below the ground surface.
    pub groundwater_depth: T,
    pub gamma_w: T,
    /// Only scales costs.
    pub road_length: T,
}

impl<T: Scalar> EmbankmentGeometry<T> {
    /// Highway 73 section: 0.3 m crust over 15.5 m clay, 1.2 m embankment, 550 m road.
    pub fn highway73() -> Self {
        Self {
            clay_thickness: lit(15.5),
            crust_thickness: lit(0.3),
            embankment_height: lit(1.2),
            n_layers: 31,
            groundwater_depth: lit(0.3),
            gamma_w: lit(9.81),
            road_length: lit(550.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("clay_thickness", self.clay_thickness),
            ("crust_thickness", self.crust_thickness),
            ("gamma_w", self.gamma_w),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) {
                return Err(PdtError::InvalidGeometry(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_layers == 0 {
            return Err(PdtError::InvalidGeometry("n_layers must be at least 1".into()));
        }
        if self.embankment_height < T::zero() || self.groundwater_depth < T::zero() || self.road_length < T::zero() {
            return Err(PdtError::InvalidGeometry(
                "embankment_height, groundwater_depth and road_length must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> EmbankmentGeometry<U> {
        EmbankmentGeometry {
            clay_thickness: U::lit(self.clay_thickness.to_f64_lossy()),
            crust_thickness: U::lit(self.crust_thickness.to_f64_lossy()),
            embankment_height: U::lit(self.embankment_height.to_f64_lossy()),
            n_layers: self.n_layers,
            groundwater_depth: U::lit(self.groundwater_depth.to_f64_lossy()),
            gamma_w: U::lit(self.gamma_w.to_f64_lossy()),
            road_length: U::lit(self.road_length.to_f64_lossy()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrainPattern {
    Square,
    Triangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drainage {
    Single,
    Double,
}

/// Prefabricated vertical drain layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvdDesign<T: Scalar = f64> {
    pub spacing: T,
    pub pattern: DrainPattern,
    pub equivalent_drain_diameter: T,
    pub drainage: Drainage,
}

impl<T: Scalar> PvdDesign<T> {
    /// 1.2 m square grid of 100×4 mm band drains (d_w = 0.066 m), double drainage.
    pub fn default_band_drain() -> Self {
        Self {
            spacing: lit(1.2),
            pattern: DrainPattern::Square,
            equivalent_drain_diameter: lit(0.066),
            drainage: Drainage::Double,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.equivalent_drain_diameter > T::zero()) || !(self.spacing > self.equivalent_drain_diameter) {
            return Err(PdtError::InvalidGeometry(format!(
                "require spacing ({}) > drain diameter ({}) > 0",
                self.spacing, self.equivalent_drain_diameter
            )));
        }
        Ok(())
    }

    /// Diameter of the drain's cylindrical influence zone.
    pub fn influence_diameter(&self) -> T {
        let factor: T = match self.pattern {
            DrainPattern::Square => lit(1.13),
            DrainPattern::Triangular => lit(1.05),
        };
        factor * self.spacing
    }

    /// Vertical drainage path length for a clay layer of the given thickness.
    pub fn drain_path(&self, clay_thickness: T) -> T {
        match self.drainage {
            Drainage::Double => clay_thickness / lit(2.0),
            Drainage::Single => clay_thickness,
        }
    }

    pub fn cast<U: Scalar>(&self) -> PvdDesign<U> {
        PvdDesign {
            spacing: U::lit(self.spacing.to_f64_lossy()),
            pattern: self.pattern,
            equivalent_drain_diameter: U::lit(self.equivalent_drain_diameter.to_f64_lossy()),
            drainage: self.drainage,
        }
    }
}

/// Numerical tolerances of the behavior model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings<T: Scalar = f64> {
    /// Truncation threshold for the Terzaghi series terms.
    pub series_tolerance: T,
    /// Bracket width at which the clock-shift root search stops, in weeks.
    pub t_shift_tolerance: T,
}

impl<T: Scalar> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            series_tolerance: lit(1e-10),
            t_shift_tolerance: lit(1e-9),
        }
    }
}

impl<T: Scalar> SolverSettings<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.series_tolerance > T::zero()) || !(self.t_shift_tolerance > T::zero()) {
            return Err(PdtError::Config("solver tolerances must be positive".into()));
        }
        if self.t_shift_tolerance > lit(1e-3) {
            return Err(PdtError::Config("t_shift_tolerance must not exceed 1e-3 weeks".into()));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> SolverSettings<U> {
        SolverSettings {
            series_tolerance: U::lit(self.series_tolerance.to_f64_lossy()),
            t_shift_tolerance: U::lit(self.t_shift_tolerance.to_f64_lossy()),
        }
    }
}

/// Everything the behavior model needs besides the soil realization and the actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsolidationModel<T: Scalar = f64> {
    pub geometry: EmbankmentGeometry<T>,
    pub pvd: PvdDesign<T>,
    pub solver: SolverSettings<T>,
}

impl<T: Scalar> ConsolidationModel<T> {
    pub fn new(geometry: EmbankmentGeometry<T>, pvd: PvdDesign<T>, solver: SolverSettings<T>) -> Result<Self> {
        let m = Self { geometry, pvd, solver };
        m.validate()?;
        Ok(m)
    }

    pub fn highway73() -> Self {
        Self {
            geometry: EmbankmentGeometry::highway73(),
            pvd: PvdDesign::default_band_drain(),
            solver: SolverSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.pvd.validate()?;
        self.solver.validate()?;
        hansbo_mu(self.pvd.influence_diameter() / self.pvd.equivalent_drain_diameter)?;
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ConsolidationModel<U> {
        ConsolidationModel {
            geometry: self.geometry.cast(),
            pvd: self.pvd.cast(),
            solver: self.solver.cast(),
        }
    }
}
