use crate::error::{PdtError, Result};
use crate::priors::SoilSample;
use crate::scalar::{lit, Scalar};

use super::{ActionSchedule, EmbankmentGeometry};

/// Strain from loading `sigma0 → sigma0 + dsigma` on the bilinear modulus law: `M0` up to the
/// preconsolidation pressure, `ML` between it and the limit pressure.
pub fn strain_increment<T: Scalar>(sigma0: T, sigma_c: T, sigma_l: T, m0: T, ml: T, dsigma: T) -> Result<T> {
    if !(sigma0 > T::zero()) {
        return Err(PdtError::Domain(format!("initial effective stress {sigma0} must be positive")));
    }
    if sigma_c > sigma_l {
        return Err(PdtError::Domain(format!(
            "preconsolidation pressure {sigma_c} exceeds limit pressure {sigma_l}"
        )));
    }
    if !(m0 > T::zero()) || !(ml > T::zero()) {
        return Err(PdtError::Domain("moduli must be positive".into()));
    }
    if dsigma < T::zero() {
        return Err(PdtError::Domain(format!("load increment {dsigma} is negative")));
    }
    let sigma = sigma0 + dsigma;
    if sigma > sigma_l {
        return Err(PdtError::StressRangeExceeded {
            stress: sigma.to_f64_lossy(),
            limit: sigma_l.to_f64_lossy(),
            layer: None,
        });
    }
    let stiff = (sigma.min(sigma_c) - sigma0).max(T::zero());
    let soft = (sigma - sigma0.max(sigma_c)).max(T::zero());
    Ok(stiff / m0 + soft / ml)
}

/// In-situ vertical effective stress at `depth` below the ground surface. The crust and clay
/// share the unit weight `gamma_cl`; below the water table the buoyant weight applies.
pub fn initial_effective_stress<T: Scalar>(geom: &EmbankmentGeometry<T>, gamma_cl: T, depth: T) -> T {
    let dry = depth.min(geom.groundwater_depth);
    let submerged = (depth - geom.groundwater_depth).max(T::zero());
    gamma_cl * dry + (gamma_cl - geom.gamma_w) * submerged
}

/// Effective stress at clay mid-depth, the representative value used for OCR.
pub fn representative_stress<T: Scalar>(geom: &EmbankmentGeometry<T>, gamma_cl: T) -> T {
    initial_effective_stress(geom, gamma_cl, geom.crust_thickness + geom.clay_thickness / lit(2.0))
}

/// Primary long-term settlement under a uniform surface load (kPa), summed over equal layers.
pub fn long_term_settlement<T: Scalar>(soil: &SoilSample<T>, geom: &EmbankmentGeometry<T>, load: T) -> Result<T> {
    if load < T::zero() {
        return Err(PdtError::Domain(format!("load {load} is negative")));
    }
    let n = T::from_usize(geom.n_layers).unwrap();
    let b = geom.clay_thickness / n;
    let mut total = T::zero();
    for i in 0..geom.n_layers {
        let depth = geom.crust_thickness + (T::from_usize(i).unwrap() + lit(0.5)) * b;
        let sigma0 = initial_effective_stress(geom, soil.gamma_cl, depth);
        let de = strain_increment(sigma0, soil.sigma_c, soil.sigma_l, soil.m0, soil.ml, load).map_err(|e| match e {
            PdtError::StressRangeExceeded { stress, limit, .. } => PdtError::StressRangeExceeded {
                stress,
                limit,
                layer: Some(i),
            },
            other => other,
        })?;
        total = total + b * de;
    }
    Ok(total)
}

/// Uniform surface load (kPa) at week `t`: embankment plus initial surcharge, plus the
/// increment from `t_add` on.
pub fn total_load<T: Scalar>(schedule: &ActionSchedule<T>, soil: &SoilSample<T>, geom: &EmbankmentGeometry<T>, t: T) -> T {
    let base = soil.gamma_emb * (geom.embankment_height + schedule.h0);
    match schedule.t_add {
        Some(t_add) if t >= T::from_u32(t_add).unwrap() => base + soil.gamma_emb * schedule.h_add,
        _ => base,
    }
}
