//! Monte Carlo robust force closure.
//!
//! Both contacts are displaced by isotropic Gaussian noise, snapped back to
//! the nearest cloud point and re-checked for force closure using the stored
//! normals there. The score is the fraction of trials that keep closure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::candidate::GraspCandidate;
use crate::cloud::{PointCloud, SpatialIndex};
use crate::error::{GraspError, Result};
use crate::geometry::Vec3;
use crate::mechanics::{force_closure, two_contact_map, ClosureMode, DEFAULT_SIGMA_THRESHOLD};
use crate::par;
use crate::stability::GraspReport;

/// Recorded in every report so runs can be replayed elsewhere.
pub const RNG_ALGORITHM: &str = "chacha8 seed_from_u64(seed), stream = trial index";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    /// `sigma` is a length.
    #[default]
    Absolute,
    /// `sigma` is a fraction of the cloud's bounding radius.
    Relative,
}

impl std::str::FromStr for SigmaMode {
    type Err = GraspError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(SigmaMode::Absolute),
            "relative" => Ok(SigmaMode::Relative),
            other => Err(GraspError::invalid(format!("unknown sigma mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub threshold: f64,
    pub sigma_mode: SigmaMode,
    pub mu: f64,
    pub closure_mode: ClosureMode,
}

impl PerturbationSpec {
    pub fn new(sigma: f64, trials: usize, seed: u64) -> Self {
        Self {
            sigma,
            trials,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(GraspError::invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if self.trials == 0 {
            return Err(GraspError::invalid("trials must be at least 1"));
        }
        if !(self.threshold >= 0.0) {
            return Err(GraspError::invalid("threshold must be non-negative"));
        }
        if !(self.mu > 0.0) {
            return Err(GraspError::invalid("mu must be positive"));
        }
        Ok(())
    }

    /// Noise standard deviation as a length for `cloud`.
    pub fn effective_sigma(&self, cloud: &PointCloud) -> f64 {
        match self.sigma_mode {
            SigmaMode::Absolute => self.sigma,
            SigmaMode::Relative => self.sigma * cloud.bounding_radius(),
        }
    }
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self {
            sigma: 0.02,
            trials: 100,
            seed: 0,
            threshold: DEFAULT_SIGMA_THRESHOLD,
            sigma_mode: SigmaMode::Absolute,
            mu: 0.5,
            closure_mode: ClosureMode::SoftPinch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub probability: f64,
    pub closures: usize,
    pub per_trial: Vec<bool>,
    pub sigma: f64,
    pub sigma_mode: SigmaMode,
    pub effective_sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub threshold: f64,
    pub mu: f64,
    pub closure_mode: ClosureMode,
    pub rng: String,
}

/// The two contact points of a grasp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspContacts {
    pub contact_a: Vec3,
    pub contact_b: Vec3,
}

impl From<&GraspCandidate> for GraspContacts {
    fn from(c: &GraspCandidate) -> Self {
        Self {
            contact_a: c.contact_a,
            contact_b: c.contact_b,
        }
    }
}

impl From<&GraspReport> for GraspContacts {
    fn from(r: &GraspReport) -> Self {
        Self {
            contact_a: r.contact_a(),
            contact_b: r.contact_b(),
        }
    }
}

/// RNG for one trial: its own stream, so trials are independent of order.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Add `N(0, sigma^2)` per axis and return the index of the nearest cloud point
/// (ties by index). Three normal draws are consumed even when `sigma` is 0.
pub fn perturb_and_snap<R: Rng + ?Sized>(contact: &Vec3, index: &SpatialIndex, sigma: f64, rng: &mut R) -> usize {
    let offset = Vec3::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    ) * sigma;
    index.nearest(&(contact + offset)).expect("index is non-empty")
}

/// Closure outcome of one trial with snapped contact indices `ia`, `ib`.
fn trial_closure(cloud: &PointCloud, ia: usize, ib: usize, origin: Vec3, length: f64, spec: &PerturbationSpec) -> bool {
    if ia == ib {
        return false;
    }
    let normals = cloud.normals().expect("checked by caller");
    // Stored normals face outward; contacts push inward.
    let gm = match two_contact_map(cloud.point(ia), -normals[ia], cloud.point(ib), -normals[ib], spec.mu, origin, length) {
        Ok(gm) => gm,
        Err(_) => return false,
    };
    force_closure(&gm, spec.mu, spec.threshold, spec.closure_mode)
        .map(|c| c.closure)
        .unwrap_or(false)
}

pub fn robust_force_closure(grasp: GraspContacts, cloud: &PointCloud, spec: &PerturbationSpec) -> Result<RobustnessReport> {
    spec.validate()?;
    if cloud.is_empty() {
        return Err(GraspError::EmptyCloud);
    }
    if cloud.normals().is_none() {
        return Err(GraspError::Precondition("robustness evaluation requires normals".into()));
    }
    let index = SpatialIndex::new(cloud.points());
    let origin = cloud.centroid();
    let length = cloud.bounding_radius();
    if !(length > 0.0) {
        return Err(GraspError::Precondition("cloud has zero extent".into()));
    }
    let sigma = spec.effective_sigma(cloud);

    let per_trial = par::map_range(spec.trials, |t| {
        let mut rng = trial_rng(spec.seed, t);
        let ia = perturb_and_snap(&grasp.contact_a, &index, sigma, &mut rng);
        let ib = perturb_and_snap(&grasp.contact_b, &index, sigma, &mut rng);
        trial_closure(cloud, ia, ib, origin, length, spec)
    });
    let closures = per_trial.iter().filter(|&&b| b).count();
    Ok(RobustnessReport {
        probability: closures as f64 / spec.trials as f64,
        closures,
        per_trial,
        sigma: spec.sigma,
        sigma_mode: spec.sigma_mode,
        effective_sigma: sigma,
        trials: spec.trials,
        seed: spec.seed,
        threshold: spec.threshold,
        mu: spec.mu,
        closure_mode: spec.closure_mode,
        rng: RNG_ALGORITHM.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, Shape, ShapeSpec};

    fn sphere() -> PointCloud {
        generate(&ShapeSpec::new(Shape::Sphere { radius: 0.0335 }, 250_000.0)).unwrap()
    }

    fn axis_grasp(cloud: &PointCloud) -> GraspContacts {
        let idx = SpatialIndex::new(cloud.points());
        let a = cloud.point(idx.nearest(&Vec3::new(0.0335, 0.0, 0.0)).unwrap());
        // Exactly opposite point keeps the line through both normals.
        let b = cloud.point(idx.nearest(&-a).unwrap());
        GraspContacts { contact_a: a, contact_b: b }
    }

    #[test]
    fn zero_sigma_returns_nearest_point() {
        let cloud = sphere();
        let index = SpatialIndex::new(cloud.points());
        let mut rng = trial_rng(3, 0);
        for i in [0, 17, 400] {
            assert_eq!(perturb_and_snap(&cloud.point(i), &index, 0.0, &mut rng), i);
        }
    }

    #[test]
    fn single_point_cloud_always_snaps_there() {
        let index = SpatialIndex::new(&[Vec3::new(1.0, 2.0, 3.0)]);
        let mut rng = trial_rng(1, 0);
        for _ in 0..50 {
            assert_eq!(perturb_and_snap(&Vec3::zeros(), &index, 5.0, &mut rng), 0);
        }
    }

    #[test]
    fn in_plane_displacement_matches_sigma() {
        let mut pts = Vec::new();
        for i in 0..151 {
            for j in 0..151 {
                pts.push(Vec3::new(-0.15 + i as f64 * 0.002, -0.15 + j as f64 * 0.002, 0.0));
            }
        }
        let index = SpatialIndex::new(&pts);
        let mut rng = trial_rng(11, 0);
        let n = 10_000;
        let dx: Vec<f64> = (0..n).map(|_| pts[perturb_and_snap(&Vec3::zeros(), &index, 0.02, &mut rng)].x).collect();
        let mean = dx.iter().sum::<f64>() / n as f64;
        let std = (dx.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((std - 0.02).abs() < 0.15 * 0.02, "{std}");
    }

    #[test]
    fn ideal_sphere_grasp_without_noise() {
        let cloud = sphere();
        let spec = PerturbationSpec::new(0.0, 20, 5);
        let r = robust_force_closure(axis_grasp(&cloud), &cloud, &spec).unwrap();
        assert_eq!(r.probability, 1.0);
        assert_eq!(r.per_trial.len(), 20);
    }

    #[test]
    fn seeded_and_order_independent() {
        let cloud = sphere();
        let spec = PerturbationSpec::new(0.01, 64, 42);
        let g = axis_grasp(&cloud);
        let a = robust_force_closure(g, &cloud, &spec).unwrap();
        let b = robust_force_closure(g, &cloud, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.probability, a.closures as f64 / 64.0);
        // A shorter run is a prefix of a longer one: trials own their streams.
        let short = robust_force_closure(g, &cloud, &PerturbationSpec::new(0.01, 10, 42)).unwrap();
        assert_eq!(short.per_trial[..], a.per_trial[..10]);
    }

    #[test]
    fn relative_mode_scales_by_radius() {
        let cloud = sphere();
        let spec = PerturbationSpec {
            sigma_mode: SigmaMode::Relative,
            ..PerturbationSpec::new(0.5, 1, 0)
        };
        assert!((spec.effective_sigma(&cloud) - 0.5 * cloud.bounding_radius()).abs() < 1e-15);
    }

    #[test]
    fn invalid_specs() {
        let cloud = sphere();
        let g = axis_grasp(&cloud);
        assert!(robust_force_closure(g, &cloud, &PerturbationSpec::new(-1.0, 10, 0)).is_err());
        assert!(robust_force_closure(g, &cloud, &PerturbationSpec::new(0.1, 0, 0)).is_err());
        let bare = PointCloud::new(cloud.points().to_vec());
        assert!(robust_force_closure(g, &bare, &PerturbationSpec::default()).is_err());
    }

    #[test]
    fn coincident_snaps_fail() {
        let cloud = PointCloud::from_arrays(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
            .with_normals(vec![-Vec3::x(), Vec3::x()])
            .unwrap();
        let g = GraspContacts {
            contact_a: Vec3::zeros(),
            contact_b: Vec3::new(0.1, 0.0, 0.0),
        };
        let r = robust_force_closure(g, &cloud, &PerturbationSpec::new(0.0, 3, 0)).unwrap();
        assert_eq!(r.probability, 0.0);
    }
}
