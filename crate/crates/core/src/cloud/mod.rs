//! Point clouds and everything that operates directly on them.

mod filter;
pub mod io;
mod kdtree;
mod normals;

pub use filter::{remove_statistical_outliers, voxel_downsample};
pub use io::{load_cloud, parse_ply, parse_xyz, write_ply, CloudFormat};
pub use kdtree::{Neighbor, SpatialIndex};
pub(crate) use normals::covariance_eigen;
pub use normals::{estimate_normals_curvatures, estimate_normals_with_diagnostics, NormalDiagnostics};

use crate::error::{GraspError, Result};
use crate::geometry::Vec3;

const UNIT_TOLERANCE: f64 = 1e-6;

/// An ordered set of 3D points with optional per-point attributes.
///
/// Attribute lists, when present, always match `points` in length. Normals
/// are stored unit length and curvatures are clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Vec3>,
    normals: Option<Vec<Vec3>>,
    curvatures: Option<Vec<f64>>,
    confidence: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self {
            points,
            ..Default::default()
        }
    }

    pub fn from_arrays(points: &[[f64; 3]]) -> Self {
        Self::new(points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect())
    }

    /// Attach normals. Each is renormalized; zero or non-finite normals are rejected.
    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Result<Self> {
        self.check_len("normals", normals.len())?;
        let mut out = Vec::with_capacity(normals.len());
        for (i, n) in normals.into_iter().enumerate() {
            let norm = n.norm();
            if !norm.is_finite() || norm == 0.0 {
                return Err(GraspError::invalid(format!("normal {i} is zero or non-finite")));
            }
            if (norm - 1.0).abs() > UNIT_TOLERANCE {
                out.push(n / norm);
            } else {
                out.push(n);
            }
        }
        self.normals = Some(out);
        Ok(self)
    }

    pub fn with_curvatures(mut self, curvatures: Vec<f64>) -> Result<Self> {
        self.check_len("curvatures", curvatures.len())?;
        if curvatures.iter().any(|c| c.is_nan()) {
            return Err(GraspError::invalid("curvature is NaN"));
        }
        self.curvatures = Some(curvatures.into_iter().map(|c| c.clamp(0.0, 1.0)).collect());
        Ok(self)
    }

    /// Per-point reconstruction confidence, used to weight contact selection.
    pub fn with_confidence(mut self, confidence: Vec<f64>) -> Result<Self> {
        self.check_len("confidence", confidence.len())?;
        if confidence.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
            return Err(GraspError::invalid("confidence values must be positive and finite"));
        }
        self.confidence = Some(confidence);
        Ok(self)
    }

    fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.points.len() {
            return Err(GraspError::invalid(format!(
                "{what} has {len} entries, cloud has {} points",
                self.points.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Vec3 {
        self.points[i]
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn curvatures(&self) -> Option<&[f64]> {
        self.curvatures.as_deref()
    }

    pub fn confidence(&self) -> Option<&[f64]> {
        self.confidence.as_deref()
    }

    /// Confidence of point `i`, 1.0 when the attribute is absent.
    pub fn confidence_at(&self, i: usize) -> f64 {
        self.confidence.as_ref().map_or(1.0, |c| c[i])
    }

    /// Arithmetic mean of the points, accumulated in index order.
    pub fn centroid(&self) -> Vec3 {
        if self.points.is_empty() {
            return Vec3::zeros();
        }
        let sum = self.points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
        sum / self.points.len() as f64
    }

    /// Largest distance from the centroid to any point.
    pub fn bounding_radius(&self) -> f64 {
        let c = self.centroid();
        self.points.iter().map(|p| (p - c).norm()).fold(0.0, f64::max)
    }

    /// Cloud made of the given point indices, attributes carried along.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self.normals.as_ref().map(|v| indices.iter().map(|&i| v[i]).collect()),
            curvatures: self.curvatures.as_ref().map(|v| indices.iter().map(|&i| v[i]).collect()),
            confidence: self.confidence.as_ref().map(|v| indices.iter().map(|&i| v[i]).collect()),
        }
    }

    /// Checks every structural invariant; used by tests and after deserialization.
    pub fn validate(&self) -> Result<()> {
        if let Some(n) = &self.normals {
            self.check_len("normals", n.len())?;
            if let Some(i) = n.iter().position(|v| (v.norm() - 1.0).abs() > UNIT_TOLERANCE) {
                return Err(GraspError::invalid(format!("normal {i} is not unit length")));
            }
        }
        if let Some(c) = &self.curvatures {
            self.check_len("curvatures", c.len())?;
            if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(GraspError::invalid("curvature outside [0, 1]"));
            }
        }
        if let Some(c) = &self.confidence {
            self.check_len("confidence", c.len())?;
        }
        if self.points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(GraspError::invalid("non-finite coordinate"));
        }
        Ok(())
    }

    pub(crate) fn into_parts(self) -> (Vec<Vec3>, Option<Vec<Vec3>>, Option<Vec<f64>>, Option<Vec<f64>>) {
        (self.points, self.normals, self.curvatures, self.confidence)
    }

    pub(crate) fn from_parts_unchecked(
        points: Vec<Vec3>,
        normals: Option<Vec<Vec3>>,
        curvatures: Option<Vec<f64>>,
        confidence: Option<Vec<f64>>,
    ) -> Self {
        Self {
            points,
            normals,
            curvatures,
            confidence,
        }
    }
}
