//! Soft region growing: decompose a cloud into locally planar patches.
//!
//! Growth starts from the lowest-curvature unassigned point. A neighbour
//! joins when its normal is within the angle threshold of the seed normal
//! and it lies within the distance tolerance of the region's running plane
//! fit. Low-curvature joiners keep expanding the region.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::cloud::{covariance_eigen, PointCloud, SpatialIndex};
use crate::error::{GraspError, Result};
use crate::geometry::{canonical_sign, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionGrowingParams {
    pub angle_threshold_deg: f64,
    pub curvature_threshold: f64,
    /// Plane-membership tolerance in cloud units.
    pub distance_threshold: f64,
    pub k_neighbors: usize,
    pub min_region_size: usize,
    /// Accepted points between refits of the running plane.
    pub refit_interval: usize,
}

impl Default for RegionGrowingParams {
    fn default() -> Self {
        Self {
            angle_threshold_deg: 15.0,
            curvature_threshold: 0.05,
            distance_threshold: 0.005,
            k_neighbors: 12,
            min_region_size: 20,
            refit_interval: 32,
        }
    }
}

impl RegionGrowingParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GraspError::invalid(m.to_string()));
        if !(self.angle_threshold_deg > 0.0 && self.angle_threshold_deg < 90.0) {
            return bad("angle_threshold_deg must lie in (0, 90)");
        }
        if !(self.curvature_threshold >= 0.0) {
            return bad("curvature_threshold must be >= 0");
        }
        if !(self.distance_threshold >= 0.0) {
            return bad("distance_threshold must be >= 0");
        }
        if self.k_neighbors < 3 {
            return bad("k_neighbors must be >= 3");
        }
        if self.min_region_size < 3 {
            return bad("min_region_size must be >= 3");
        }
        if self.refit_interval == 0 {
            return bad("refit_interval must be >= 1");
        }
        Ok(())
    }
}

/// Total least-squares plane `normal . x = offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFit {
    pub normal: Vec3,
    pub offset: f64,
    pub rms: f64,
    pub centroid: Vec3,
}

impl PlaneFit {
    pub fn distance(&self, p: &Vec3) -> f64 {
        (self.normal.dot(p) - self.offset).abs()
    }
}

/// Fit a plane through `points`. The normal's largest component is positive.
pub fn fit_plane_lsq(points: &[Vec3]) -> Result<PlaneFit> {
    if points.len() < 3 {
        return Err(GraspError::DegenerateFit(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    let (values, vectors) = covariance_eigen(points);
    if values[1] <= 1e-12 * values[2].max(f64::MIN_POSITIVE) {
        return Err(GraspError::DegenerateFit("points are collinear or coincident".into()));
    }
    let centroid = points.iter().fold(Vec3::zeros(), |a, p| a + p) / points.len() as f64;
    let normal = canonical_sign(vectors[0].normalize());
    let offset = normal.dot(&centroid);
    let rms = (points.iter().map(|p| (normal.dot(p) - offset).powi(2)).sum::<f64>()
        / points.len() as f64)
        .sqrt();
    Ok(PlaneFit {
        normal,
        offset,
        rms,
        centroid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarRegion {
    /// Ascending indices into the segmented cloud.
    pub point_indices: Vec<usize>,
    /// Unit normal, oriented to agree with the members' point normals.
    pub plane_normal: [f64; 3],
    pub plane_offset: f64,
    pub centroid: [f64; 3],
    pub rms_residual: f64,
    /// In-plane principal half-lengths, major first.
    pub extent: [f64; 2],
    pub seed_index: usize,
}

impl PlanarRegion {
    pub fn normal(&self) -> Vec3 {
        Vec3::from(self.plane_normal)
    }

    pub fn centroid(&self) -> Vec3 {
        Vec3::from(self.centroid)
    }

    pub fn len(&self) -> usize {
        self.point_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_indices.is_empty()
    }

    pub fn distance_to_plane(&self, p: &Vec3) -> f64 {
        (self.normal().dot(p) - self.plane_offset).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Segmentation {
    /// Sorted by descending size, then lowest member index.
    pub regions: Vec<PlanarRegion>,
    /// Points that ended up in regions below the minimum size.
    pub residue: Vec<usize>,
}

impl Segmentation {
    /// Per-point region id, -1 for residue.
    pub fn labels(&self, n_points: usize) -> Vec<i64> {
        let mut labels = vec![-1i64; n_points];
        for (id, r) in self.regions.iter().enumerate() {
            for &i in &r.point_indices {
                labels[i] = id as i64;
            }
        }
        labels
    }
}

/// Running plane used to gate membership while a region grows.
struct GrowingPlane {
    normal: Vec3,
    offset: f64,
}

impl GrowingPlane {
    fn distance(&self, p: &Vec3) -> f64 {
        (self.normal.dot(p) - self.offset).abs()
    }
}

pub fn segment(cloud: &PointCloud, params: &RegionGrowingParams) -> Result<Segmentation> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(GraspError::EmptyCloud);
    }
    let normals = cloud
        .normals()
        .ok_or_else(|| GraspError::Precondition("segmentation requires normals".into()))?;
    let curvatures = cloud
        .curvatures()
        .ok_or_else(|| GraspError::Precondition("segmentation requires curvatures".into()))?;

    let n = cloud.len();
    let index = SpatialIndex::new(cloud.points());
    let cos_limit = params.angle_threshold_deg.to_radians().cos();

    let mut seed_order: Vec<usize> = (0..n).collect();
    seed_order.sort_by(|&a, &b| curvatures[a].total_cmp(&curvatures[b]).then(a.cmp(&b)));

    let mut available = vec![true; n];
    let mut seg = Segmentation::default();
    let mut raw_regions: Vec<(usize, Vec<usize>)> = Vec::new();

    for &seed in &seed_order {
        if !available[seed] {
            continue;
        }
        available[seed] = false;
        let seed_normal = normals[seed];
        let mut plane = GrowingPlane {
            normal: seed_normal,
            offset: seed_normal.dot(&cloud.point(seed)),
        };
        let mut members = vec![seed];
        let mut queue = VecDeque::from([seed]);

        while let Some(current) = queue.pop_front() {
            for hit in index.knn(&cloud.point(current), params.k_neighbors + 1) {
                let j = hit.index;
                if j == current || !available[j] {
                    continue;
                }
                if normals[j].dot(&seed_normal) <= cos_limit {
                    continue;
                }
                if !(plane.distance(&cloud.point(j)) < params.distance_threshold) {
                    continue;
                }
                available[j] = false;
                members.push(j);
                if curvatures[j] < params.curvature_threshold {
                    queue.push_back(j);
                }
                if members.len() % params.refit_interval == 0 {
                    let pts: Vec<Vec3> = members.iter().map(|&m| cloud.point(m)).collect();
                    if let Ok(fit) = fit_plane_lsq(&pts) {
                        let normal = if fit.normal.dot(&seed_normal) < 0.0 { -fit.normal } else { fit.normal };
                        plane = GrowingPlane {
                            normal,
                            offset: normal.dot(&fit.centroid),
                        };
                    }
                }
            }
        }

        if members.len() >= params.min_region_size {
            raw_regions.push((seed, members));
        } else {
            seg.residue.extend(members);
        }
    }

    for (seed, mut members) in raw_regions {
        members.sort_unstable();
        match build_region(cloud, seed, members.clone()) {
            Ok(r) => seg.regions.push(r),
            Err(_) => seg.residue.extend(members),
        }
    }
    seg.regions
        .sort_by(|a, b| b.len().cmp(&a.len()).then(a.point_indices[0].cmp(&b.point_indices[0])));
    seg.residue.sort_unstable();
    Ok(seg)
}

/// Fit a region over an explicit member list (the first index acts as seed).
/// The cloud must carry normals; they decide the plane orientation.
pub fn region_from_members(cloud: &PointCloud, mut members: Vec<usize>) -> Result<PlanarRegion> {
    if cloud.normals().is_none() {
        return Err(GraspError::Precondition("region fit requires normals".into()));
    }
    if members.iter().any(|&i| i >= cloud.len()) {
        return Err(GraspError::invalid("region member index out of range"));
    }
    members.sort_unstable();
    members.dedup();
    let seed = *members.first().ok_or_else(|| GraspError::DegenerateFit("empty region".into()))?;
    build_region(cloud, seed, members)
}

fn build_region(cloud: &PointCloud, seed: usize, members: Vec<usize>) -> Result<PlanarRegion> {
    let pts: Vec<Vec3> = members.iter().map(|&i| cloud.point(i)).collect();
    let fit = fit_plane_lsq(&pts)?;
    let normals = cloud.normals().expect("checked by caller");
    let mean_normal = members.iter().fold(Vec3::zeros(), |a, &i| a + normals[i]);
    let normal = if fit.normal.dot(&mean_normal) < 0.0 { -fit.normal } else { fit.normal };
    let offset = normal.dot(&fit.centroid);

    let (_, axes) = covariance_eigen(&pts);
    let half = |axis: &Vec3| {
        pts.iter()
            .map(|p| (p - fit.centroid).dot(axis).abs())
            .fold(0.0, f64::max)
    };
    Ok(PlanarRegion {
        point_indices: members,
        plane_normal: normal.into(),
        plane_offset: offset,
        centroid: fit.centroid.into(),
        rms_residual: fit.rms,
        extent: [half(&axes[2]), half(&axes[1])],
        seed_index: seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::estimate_normals_curvatures;
    use crate::geometry::angle_deg;

    #[test]
    fn unit_square_plane() {
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
        ];
        let fit = fit_plane_lsq(&pts).unwrap();
        assert!((fit.normal - Vec3::z()).norm() < 1e-12);
        assert!(fit.offset.abs() < 1e-12);
        assert!(fit.rms < 1e-12);
    }

    #[test]
    fn alternating_jitter() {
        // z = 0.01 - 0.02 x exactly, so the closed-form normal is (0.02, 0, 1)/|.|.
        let pts = [
            Vec3::new(0.0, 0.0, 0.01),
            Vec3::new(1.0, 0.0, -0.01),
            Vec3::new(0.0, 1.0, 0.01),
            Vec3::new(1.0, 1.0, -0.01),
        ];
        let fit = fit_plane_lsq(&pts).unwrap();
        let expected = Vec3::new(0.02, 0.0, 1.0).normalize();
        assert!((fit.normal - expected).norm() < 1e-9);
        assert!(angle_deg(&fit.normal, &Vec3::z()) < 2.0);
        assert!(fit.rms <= 0.01);
    }

    #[test]
    fn collinear_fit_fails() {
        let pts = [Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0), Vec3::new(2.0, 2.0, 2.0)];
        assert!(matches!(fit_plane_lsq(&pts), Err(GraspError::DegenerateFit(_))));
        assert!(fit_plane_lsq(&pts[..2]).is_err());
    }

    #[test]
    fn fit_sign_is_canonical() {
        let pts = [
            Vec3::new(0.0, 0.0, 5.0),
            Vec3::new(0.0, 1.0, 5.0),
            Vec3::new(0.0, 0.0, 6.0),
        ];
        let fit = fit_plane_lsq(&pts).unwrap();
        assert_eq!(canonical_sign(fit.normal), fit.normal);
        assert!((fit.normal - Vec3::x()).norm() < 1e-12);
    }

    fn grid(nx: usize, ny: usize, f: impl Fn(f64, f64) -> Vec3) -> Vec<Vec3> {
        let mut v = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                v.push(f(i as f64, j as f64));
            }
        }
        v
    }

    #[test]
    fn single_plane_is_one_region() {
        let pts = grid(20, 20, |i, j| Vec3::new(i * 0.005, j * 0.005, 0.0));
        let cloud = estimate_normals_curvatures(&PointCloud::new(pts), 12).unwrap();
        let seg = segment(&cloud, &RegionGrowingParams::default()).unwrap();
        assert_eq!(seg.regions.len(), 1);
        assert_eq!(seg.regions[0].len(), 400);
        assert!(seg.regions[0].rms_residual < 1e-9);
        assert!(seg.residue.is_empty());
    }

    #[test]
    fn missing_attributes_rejected() {
        let cloud = PointCloud::new(grid(5, 5, |i, j| Vec3::new(i, j, 0.0)));
        assert!(matches!(
            segment(&cloud, &RegionGrowingParams::default()),
            Err(GraspError::Precondition(_))
        ));
    }

    #[test]
    fn params_validation() {
        let mut p = RegionGrowingParams::default();
        p.angle_threshold_deg = 90.0;
        assert!(p.validate().is_err());
        p = RegionGrowingParams::default();
        p.k_neighbors = 2;
        assert!(p.validate().is_err());
        p = RegionGrowingParams::default();
        p.min_region_size = 2;
        assert!(p.validate().is_err());
    }
}
