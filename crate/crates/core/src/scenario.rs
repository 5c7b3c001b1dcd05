//! Scenario files: strict TOML schema, dotted-path overrides and a content hash.
//!
//! Field names carry their units. Every block declares whether its values come from the
//! published case study (`paper`), are calibration placeholders (`non-paper`) or both
//! (`mixed`).

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::consolidation::{
    ConsolidationModel, DrainPattern, Drainage, EmbankmentGeometry, PvdDesign, SolverSettings, WEEKS_PER_YEAR,
};
use crate::error::{PdtError, Result};
use crate::filter::{FilterOptions, Resampling};
use crate::optimizer::{CeConfig, DecisionProblem, ParamSpace, StudyConfig};
use crate::policy::{CostParams, GateStatistic, HeuristicParams, IncrementGrid, Requirements, SettlementCriterion};
use crate::priors::{fit_lognormal, from_moments, LognormalDist, SoilParam, SoilPriorSet};
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: u32 = 1;

/// The Highway 73 case study shipped with the crate.
pub const BUNDLED_SCENARIO: &str = include_str!("../scenarios/stockholm-highway73.toml");
pub const BUNDLED_NAME: &str = "stockholm-highway73";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Paper,
    NonPaper,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvenanceBlock {
    pub geometry: Provenance,
    pub pvd: Provenance,
    pub priors: Provenance,
    pub requirements: Provenance,
    pub cost_params: Provenance,
    pub measurement: Provenance,
    pub solver: Provenance,
    pub filter: Provenance,
    pub policy: Provenance,
    pub study: Provenance,
}

/// How the `cov` entry of a moment-specified prior is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovInterpretation {
    /// Coefficient of variation.
    #[default]
    Cov,
    /// Variance as a fraction of the mean, `σ² = cov·μ`.
    VarianceFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub clay_thickness_m: f64,
    pub crust_thickness_m: f64,
    pub embankment_height_m: f64,
    pub groundwater_depth_m: f64,
    pub unit_weight_water_kn_m3: f64,
    pub road_length_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvdBlock {
    pub spacing_m: f64,
    pub pattern: DrainPattern,
    pub equivalent_drain_diameter_m: f64,
    pub drainage: Drainage,
}

/// One prior: either property-data samples or moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub source: Provenance,
    pub unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov: Option<f64>,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorsBlock {
    pub sigma_L: PriorSpec,
    pub sigma_c: PriorSpec,
    pub gamma_cl: PriorSpec,
    pub gamma_emb: PriorSpec,
    pub M0: PriorSpec,
    pub ML: PriorSpec,
    pub wN: PriorSpec,
    pub cv: PriorSpec,
    pub ch: PriorSpec,
}

impl PriorsBlock {
    pub fn get(&self, p: SoilParam) -> &PriorSpec {
        match p {
            SoilParam::SigmaL => &self.sigma_L,
            SoilParam::SigmaC => &self.sigma_c,
            SoilParam::GammaCl => &self.gamma_cl,
            SoilParam::GammaEmb => &self.gamma_emb,
            SoilParam::M0 => &self.M0,
            SoilParam::Ml => &self.ML,
            SoilParam::WN => &self.wN,
            SoilParam::Cv => &self.cv,
            SoilParam::Ch => &self.ch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequirementsBlock {
    pub s_target_m: f64,
    pub ocr_target: f64,
    pub t_max_weeks: u32,
    #[serde(default)]
    pub settlement_criterion: SettlementCriterion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostBlock {
    pub c_sur_initial_sek_per_m_per_m: f64,
    pub c_sur_increase_sek_per_m_per_m: f64,
    pub remobilization_sek_per_m: f64,
    pub c_delay_sek_per_week: f64,
    pub delay_cap_weeks: u32,
    pub c_ocr_penalty_sek: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementBlock {
    pub sigma_eps_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub n_layers: usize,
    pub series_tolerance: f64,
    pub t_shift_tolerance_weeks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterBlock {
    pub n_particles: usize,
    #[serde(default)]
    pub resampling: Resampling,
    #[serde(default)]
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeuristicBlock {
    pub h0_m: f64,
    pub cov_th: f64,
    pub p_th: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyBlock {
    #[serde(default)]
    pub gate_statistic: GateStatistic,
    pub increment_grid_min_m: f64,
    pub increment_grid_max_m: f64,
    pub increment_grid_step_m: f64,
    /// Default heuristic parameters for interactive sessions.
    pub heuristic: HeuristicBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyBlock {
    pub sigma_eps_m: Vec<f64>,
    pub restarts: usize,
    pub n_mc_final: usize,
    pub ce: CeConfig,
    pub bu_space: ParamSpace,
    pub static_space: ParamSpace,
}

/// Normalized scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub cov_interpretation: CovInterpretation,
    /// Widen sample-fitted priors by `√(1 + 1/n)`.
    #[serde(default)]
    pub predictive_inflation: bool,
    pub provenance: ProvenanceBlock,
    pub geometry: GeometryBlock,
    pub pvd: PvdBlock,
    pub priors: PriorsBlock,
    pub requirements: RequirementsBlock,
    pub cost_params: CostBlock,
    pub measurement: MeasurementBlock,
    pub solver: SolverBlock,
    pub filter: FilterBlock,
    pub policy: PolicyBlock,
    pub study: StudyBlock,
}

/// A validated scenario and its content hash.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    hash: String,
}

/// Parses `path=value` where value is any TOML value; bare words are taken as strings.
pub fn parse_override(spec: &str) -> Result<(String, toml::Value)> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| PdtError::Config(format!("override '{spec}' is not of the form path=value")))?;
    let path = path.trim().trim_start_matches("--").replace('-', "_");
    if path.is_empty() {
        return Err(PdtError::Config(format!("override '{spec}' has an empty path")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((path, value))
}

/// Sets `path` inside `table`, creating intermediate tables. A final segment that is not
/// present may omit the unit suffix of an existing key (`study.sigma_eps` → `study.sigma_eps_m`).
pub fn apply_override(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let segments: Vec<&str> = path.split('.').collect();
    let mut cur = table;
    for seg in &segments[..segments.len() - 1] {
        let entry = cur
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| PdtError::Schema {
                path: path.to_string(),
                message: format!("'{seg}' is not a table"),
            })?;
    }
    let last = segments[segments.len() - 1];
    let key = if cur.contains_key(last) {
        last.to_string()
    } else {
        let prefix = format!("{last}_");
        let matches: Vec<&String> = cur.keys().filter(|k| k.starts_with(&prefix)).collect();
        match matches.as_slice() {
            [one] => one.to_string(),
            _ => last.to_string(),
        }
    };
    cur.insert(key, value);
    Ok(())
}

fn schema_error<E: std::fmt::Display>(e: serde_path_to_error::Error<E>) -> PdtError {
    let path = e.path().to_string();
    PdtError::Schema {
        path,
        message: e.into_inner().to_string(),
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| PdtError::Schema {
            path: ".".into(),
            message: e.to_string(),
        })?;
        for spec in overrides {
            let (path, value) = parse_override(spec)?;
            apply_override(&mut table, &path, value)?;
        }
        let file: ScenarioFile = serde_path_to_error::deserialize(table).map_err(schema_error)?;
        Self::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        validate(&file)?;
        let hash = content_hash(&file);
        Ok(Self { file, hash })
    }

    pub fn bundled() -> Self {
        Self::from_toml_str(BUNDLED_SCENARIO, &[]).expect("bundled scenario is valid")
    }

    /// SHA-256 of the normalized document, hex encoded.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&self.file).map_err(|e| PdtError::Io(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn geometry<T: Scalar>(&self) -> EmbankmentGeometry<T> {
        let g = &self.file.geometry;
        EmbankmentGeometry {
            clay_thickness: T::lit(g.clay_thickness_m),
            crust_thickness: T::lit(g.crust_thickness_m),
            embankment_height: T::lit(g.embankment_height_m),
            n_layers: self.file.solver.n_layers,
            groundwater_depth: T::lit(g.groundwater_depth_m),
            gamma_w: T::lit(g.unit_weight_water_kn_m3),
            road_length: T::lit(g.road_length_m),
        }
    }

    pub fn model<T: Scalar>(&self) -> Result<ConsolidationModel<T>> {
        let p = &self.file.pvd;
        ConsolidationModel::new(
            self.geometry(),
            PvdDesign {
                spacing: T::lit(p.spacing_m),
                pattern: p.pattern,
                equivalent_drain_diameter: T::lit(p.equivalent_drain_diameter_m),
                drainage: p.drainage,
            },
            SolverSettings {
                series_tolerance: T::lit(self.file.solver.series_tolerance),
                t_shift_tolerance: T::lit(self.file.solver.t_shift_tolerance_weeks),
            },
        )
    }

    pub fn prior<T: Scalar>(&self, p: SoilParam) -> Result<LognormalDist<T>> {
        prior_from_spec(p, self.file.priors.get(p), self.file.cov_interpretation, self.file.predictive_inflation)
    }

    pub fn priors<T: Scalar>(&self) -> Result<SoilPriorSet<T>> {
        Ok(SoilPriorSet {
            sigma_l: self.prior(SoilParam::SigmaL)?,
            sigma_c: self.prior(SoilParam::SigmaC)?,
            gamma_cl: self.prior(SoilParam::GammaCl)?,
            gamma_emb: self.prior(SoilParam::GammaEmb)?,
            m0: self.prior(SoilParam::M0)?,
            ml: self.prior(SoilParam::Ml)?,
            w_n: self.prior(SoilParam::WN)?,
            cv: self.prior(SoilParam::Cv)?,
            ch: self.prior(SoilParam::Ch)?,
        })
    }

    pub fn requirements<T: Scalar>(&self) -> Requirements<T> {
        let r = &self.file.requirements;
        Requirements {
            s_target: T::lit(r.s_target_m),
            ocr_target: T::lit(r.ocr_target),
            t_max: r.t_max_weeks,
            criterion: r.settlement_criterion,
        }
    }

    pub fn costs<T: Scalar>(&self) -> CostParams<T> {
        let c = &self.file.cost_params;
        CostParams {
            c_sur_initial: T::lit(c.c_sur_initial_sek_per_m_per_m),
            c_sur_increase: T::lit(c.c_sur_increase_sek_per_m_per_m),
            remobilization: T::lit(c.remobilization_sek_per_m),
            c_delay: T::lit(c.c_delay_sek_per_week),
            delay_cap: c.delay_cap_weeks,
            c_ocr_penalty: T::lit(c.c_ocr_penalty_sek),
        }
    }

    pub fn grid<T: Scalar>(&self) -> IncrementGrid<T> {
        let p = &self.file.policy;
        IncrementGrid {
            min: T::lit(p.increment_grid_min_m),
            max: T::lit(p.increment_grid_max_m),
            step: T::lit(p.increment_grid_step_m),
        }
    }

    pub fn filter_options<T: Scalar>(&self) -> FilterOptions<T> {
        FilterOptions {
            resampling: self.file.filter.resampling,
            jitter: T::lit(self.file.filter.jitter),
        }
    }

    pub fn heuristic<T: Scalar>(&self) -> Result<HeuristicParams<T>> {
        let h = &self.file.policy.heuristic;
        HeuristicParams::new(T::lit(h.h0_m), T::lit(h.cov_th), T::lit(h.p_th))
    }

    pub fn sigma_eps<T: Scalar>(&self) -> T {
        T::lit(self.file.measurement.sigma_eps_m)
    }

    pub fn study_sigma_eps<T: Scalar>(&self) -> Vec<T> {
        self.file.study.sigma_eps_m.iter().map(|&s| T::lit(s)).collect()
    }

    pub fn study_config(&self) -> StudyConfig {
        let s = &self.file.study;
        StudyConfig {
            ce: s.ce.clone(),
            bu_space: s.bu_space.clone(),
            static_space: s.static_space.clone(),
            restarts: s.restarts,
            n_mc_final: s.n_mc_final,
        }
    }

    pub fn problem<T: Scalar>(&self) -> Result<DecisionProblem<T>> {
        Ok(DecisionProblem {
            model: Arc::new(self.model()?),
            priors: self.priors()?,
            requirements: self.requirements(),
            costs: self.costs(),
            grid: self.grid(),
            gate: self.file.policy.gate_statistic,
            filter: self.filter_options(),
        })
    }
}

/// Reads, overrides and validates a scenario file. The name of the bundled scenario may be
/// given instead of a path.
pub fn load_scenario(path: &Path, overrides: &[String]) -> Result<Scenario> {
    if !path.exists() && path.to_str() == Some(BUNDLED_NAME) {
        return Scenario::from_toml_str(BUNDLED_SCENARIO, overrides);
    }
    let text = std::fs::read_to_string(path).map_err(|e| PdtError::Io(format!("{}: {e}", path.display())))?;
    Scenario::from_toml_str(&text, overrides)
}

pub fn content_hash(file: &ScenarioFile) -> String {
    let bytes = serde_json::to_vec(file).expect("scenario serializes");
    hex::encode(Sha256::digest(bytes))
}

fn expected_units(p: SoilParam) -> &'static [(&'static str, f64)] {
    match p {
        SoilParam::SigmaL | SoilParam::SigmaC | SoilParam::M0 | SoilParam::Ml => &[("kPa", 1.0)],
        SoilParam::GammaCl | SoilParam::GammaEmb => &[("kN/m3", 1.0)],
        SoilParam::WN => &[("-", 1.0)],
        SoilParam::Cv | SoilParam::Ch => &[("m2/year", 1.0), ("m2/week", WEEKS_PER_YEAR)],
    }
}

fn prior_from_spec<T: Scalar>(
    p: SoilParam,
    spec: &PriorSpec,
    interpretation: CovInterpretation,
    inflate: bool,
) -> Result<LognormalDist<T>> {
    let at = |message: String| PdtError::Schema {
        path: format!("priors.{}", p.key()),
        message,
    };
    let factor = expected_units(p)
        .iter()
        .find(|(u, _)| *u == spec.unit)
        .map(|(_, f)| *f)
        .ok_or_else(|| {
            let allowed: Vec<&str> = expected_units(p).iter().map(|(u, _)| *u).collect();
            at(format!("unit '{}' not accepted, expected one of {allowed:?}", spec.unit))
        })?;
    let unit = p.unit();
    match (&spec.samples, spec.mean, spec.cov) {
        (Some(samples), None, None) => {
            let xs: Vec<T> = samples.iter().map(|&x| T::lit(x * factor)).collect();
            let d = fit_lognormal(&xs, unit).map_err(|e| at(e.to_string()))?;
            Ok(if inflate { d.with_predictive_inflation(xs.len()) } else { d })
        }
        (None, Some(mean), Some(cov)) => {
            let cov = match interpretation {
                CovInterpretation::Cov => cov,
                CovInterpretation::VarianceFraction => {
                    if !(mean > 0.0) || !(cov > 0.0) {
                        return Err(at("mean and cov must be positive".into()));
                    }
                    (cov * mean).sqrt() / mean
                }
            };
            from_moments(T::lit(mean * factor), T::lit(cov), unit).map_err(|e| at(e.to_string()))
        }
        _ => Err(at("give either `samples` or both `mean` and `cov`".into())),
    }
}

fn validate(file: &ScenarioFile) -> Result<()> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(PdtError::Schema {
            path: "schema_version".into(),
            message: format!("unsupported version {}, expected {SCHEMA_VERSION}", file.schema_version),
        });
    }
    let s = Scenario {
        file: file.clone(),
        hash: String::new(),
    };
    s.model::<f64>()?;
    s.priors::<f64>()?;
    s.requirements::<f64>().validate()?;
    s.costs::<f64>().validate()?;
    s.grid::<f64>().validate()?;
    s.heuristic::<f64>().map_err(|e| PdtError::Config(format!("policy.heuristic: {e}")))?;
    if !(file.measurement.sigma_eps_m > 0.0) || file.study.sigma_eps_m.iter().any(|&x| !(x > 0.0)) {
        return Err(PdtError::Config("measurement error std must be positive".into()));
    }
    if file.filter.n_particles < 2 {
        return Err(PdtError::Config("filter.n_particles must be at least 2".into()));
    }
    if !(file.filter.jitter >= 0.0) {
        return Err(PdtError::Config("filter.jitter must be non-negative".into()));
    }
    file.study.ce.validate()?;
    file.study.bu_space.validate()?;
    file.study.static_space.validate()?;
    if file.study.bu_space.dim() != 3 || file.study.static_space.dim() != 1 {
        return Err(PdtError::Config("bu_space needs 3 parameters and static_space 1".into()));
    }
    if file.study.n_mc_final < 2 {
        return Err(PdtError::Config("study.n_mc_final must be at least 2".into()));
    }
    Ok(())
}
