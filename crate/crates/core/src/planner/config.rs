use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::candidate::CandidateParams;
use crate::error::{GraspError, Result};
use crate::mechanics::ClosureMode;
use crate::region::RegionGrowingParams;
use crate::robustness::{PerturbationSpec, SigmaMode};
use crate::stability::{CostMode, ScoringParams, SolverOptions};

/// Prefix for environment overrides: `GRASPKIT_SEED=7` sets `seed`.
pub const ENV_PREFIX: &str = "GRASPKIT_";

/// Every planner tunable, as one flat TOML table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Voxel edge for downsampling; 0 disables it.
    pub voxel_size: f64,
    pub outlier_removal: bool,
    pub outlier_k: usize,
    pub outlier_std_ratio: f64,
    pub normal_k: usize,

    pub region_k: usize,
    pub angle_threshold_deg: f64,
    pub curvature_threshold: f64,
    pub distance_threshold: f64,
    pub min_region_size: usize,
    pub refit_interval: usize,

    pub max_angle_deg: f64,
    pub max_width: f64,
    pub n_per_pair: usize,
    pub snap_radius: f64,

    pub mu: f64,
    pub f_ex_magnitude: f64,
    pub f_normal_cap: f64,
    pub sigma_threshold: f64,
    pub closure_mode: ClosureMode,
    pub cost_mode: CostMode,
    pub solver_max_iterations: usize,
    pub solver_cost_tolerance: f64,
    pub solver_kkt_tolerance: f64,

    pub sigmas: Vec<f64>,
    pub sigma_mode: SigmaMode,
    pub trials: usize,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        let region = RegionGrowingParams::default();
        let cand = CandidateParams::default();
        let score = ScoringParams::default();
        Self {
            voxel_size: 0.003,
            outlier_removal: true,
            outlier_k: 12,
            outlier_std_ratio: 3.0,
            normal_k: 16,
            region_k: region.k_neighbors,
            angle_threshold_deg: region.angle_threshold_deg,
            curvature_threshold: region.curvature_threshold,
            distance_threshold: region.distance_threshold,
            min_region_size: region.min_region_size,
            refit_interval: region.refit_interval,
            max_angle_deg: cand.max_angle_deg,
            max_width: cand.max_width,
            n_per_pair: cand.n_per_pair,
            snap_radius: cand.snap_radius,
            mu: score.mu,
            f_ex_magnitude: score.f_ex_magnitude,
            f_normal_cap: score.f_normal_cap,
            sigma_threshold: score.sigma_threshold,
            closure_mode: score.closure_mode,
            cost_mode: score.cost_mode,
            solver_max_iterations: score.solver.max_iterations,
            solver_cost_tolerance: score.solver.cost_tolerance,
            solver_kkt_tolerance: score.solver.kkt_tolerance,
            sigmas: vec![0.02, 0.05, 0.1],
            sigma_mode: SigmaMode::Absolute,
            trials: 100,
            seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| GraspError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| GraspError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Defaults, then the optional file, then `GRASPKIT_*` variables from `env`.
    pub fn resolve<I>(path: Option<&Path>, env: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply_env(env)?;
        Ok(cfg)
    }

    /// Apply `GRASPKIT_<KEY>` overrides. Values are parsed with the type of the
    /// field they replace; `sigmas` takes a comma-separated list. Unknown keys
    /// under the prefix are rejected.
    pub fn apply_env<I>(&mut self, env: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut vars: Vec<(String, String)> = env
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|key| (key.to_ascii_lowercase(), v)))
            .collect();
        if vars.is_empty() {
            return Ok(());
        }
        vars.sort();
        let mut table = toml::Table::try_from(&*self).map_err(|e| GraspError::Config(e.to_string()))?;
        for (key, raw) in vars {
            let current = table
                .get(&key)
                .ok_or_else(|| GraspError::Config(format!("unknown override {ENV_PREFIX}{}", key.to_ascii_uppercase())))?;
            let value = parse_like(current, raw.trim())
                .ok_or_else(|| GraspError::Config(format!("cannot parse {ENV_PREFIX}{}={raw}", key.to_ascii_uppercase())))?;
            table.insert(key, value);
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| GraspError::Config(e.to_string()))?;
        cfg.validate()?;
        *self = cfg;
        Ok(())
    }

    pub fn region_params(&self) -> RegionGrowingParams {
        RegionGrowingParams {
            angle_threshold_deg: self.angle_threshold_deg,
            curvature_threshold: self.curvature_threshold,
            distance_threshold: self.distance_threshold,
            k_neighbors: self.region_k,
            min_region_size: self.min_region_size,
            refit_interval: self.refit_interval,
        }
    }

    pub fn candidate_params(&self) -> CandidateParams {
        CandidateParams {
            max_angle_deg: self.max_angle_deg,
            max_width: self.max_width,
            n_per_pair: self.n_per_pair,
            snap_radius: self.snap_radius,
            min_overlap_points: self.min_region_size,
        }
    }

    pub fn scoring_params(&self) -> ScoringParams {
        ScoringParams {
            mu: self.mu,
            sigma_threshold: self.sigma_threshold,
            closure_mode: self.closure_mode,
            f_ex_magnitude: self.f_ex_magnitude,
            f_normal_cap: self.f_normal_cap,
            cost_mode: self.cost_mode,
            solver: SolverOptions {
                max_iterations: self.solver_max_iterations,
                cost_tolerance: self.solver_cost_tolerance,
                kkt_tolerance: self.solver_kkt_tolerance,
            },
        }
    }

    pub fn perturbation(&self, sigma: f64) -> PerturbationSpec {
        PerturbationSpec {
            sigma,
            trials: self.trials,
            seed: self.seed,
            threshold: self.sigma_threshold,
            sigma_mode: self.sigma_mode,
            mu: self.mu,
            closure_mode: self.closure_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: GraspError| GraspError::Config(e.to_string());
        if !(self.voxel_size >= 0.0) || !self.voxel_size.is_finite() {
            return Err(GraspError::Config("voxel_size must be >= 0".into()));
        }
        if self.outlier_k == 0 || !(self.outlier_std_ratio > 0.0) {
            return Err(GraspError::Config("outlier_k must be >= 1 and outlier_std_ratio > 0".into()));
        }
        if self.normal_k < 3 {
            return Err(GraspError::Config("normal_k must be >= 3".into()));
        }
        self.region_params().validate().map_err(cfg_err)?;
        self.candidate_params().validate().map_err(cfg_err)?;
        self.scoring_params().validate().map_err(cfg_err)?;
        if self.sigmas.is_empty() {
            return Err(GraspError::Config("sigmas must not be empty".into()));
        }
        for &s in &self.sigmas {
            self.perturbation(s).validate().map_err(cfg_err)?;
        }
        Ok(())
    }

    /// The config as pretty TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

fn parse_like(current: &toml::Value, raw: &str) -> Option<toml::Value> {
    use toml::Value;
    Some(match current {
        Value::Integer(_) => Value::Integer(raw.parse().ok()?),
        Value::Float(_) => Value::Float(raw.parse().ok()?),
        Value::Boolean(_) => Value::Boolean(raw.parse().ok()?),
        Value::String(_) => Value::String(raw.to_string()),
        Value::Array(_) => Value::Array(
            raw.split(',')
                .map(|s| s.trim().parse::<f64>().ok().map(Value::Float))
                .collect::<Option<Vec<_>>>()?,
        ),
        _ => return None,
    })
}
