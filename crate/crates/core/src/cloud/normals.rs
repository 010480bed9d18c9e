use nalgebra::{Matrix3, SymmetricEigen};

use super::{PointCloud, SpatialIndex};
use crate::error::{GraspError, Result};
use crate::geometry::{canonical_sign, Vec3};
use crate::par;

/// Points whose neighbourhood covariance had rank < 2 (coincident or collinear).
/// Those get normal +Z and curvature 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormalDiagnostics {
    pub degenerate: Vec<usize>,
}

pub fn estimate_normals_curvatures(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    estimate_normals_with_diagnostics(cloud, k).map(|(c, _)| c)
}

/// PCA over each point's `k`-neighbourhood (the point itself included).
///
/// Normal: eigenvector of the smallest eigenvalue, flipped to point away from
/// the cloud centroid. Curvature: surface variation `l0 / (l0 + l1 + l2)`.
pub fn estimate_normals_with_diagnostics(
    cloud: &PointCloud,
    k: usize,
) -> Result<(PointCloud, NormalDiagnostics)> {
    if k < 3 {
        return Err(GraspError::invalid(format!("normal estimation needs k >= 3, got {k}")));
    }
    if cloud.len() < k {
        return Err(GraspError::invalid(format!(
            "normal estimation with k={k} needs at least {k} points, cloud has {}",
            cloud.len()
        )));
    }
    let index = SpatialIndex::new(cloud.points());
    let centroid = cloud.centroid();

    let per_point = par::map_range(cloud.len(), |i| {
        let p = cloud.point(i);
        let hood: Vec<Vec3> = index.knn(&p, k).iter().map(|n| cloud.point(n.index)).collect();
        let (normal, curvature, degenerate) = local_pca(&hood);
        (orient_outward(normal, p - centroid), curvature, degenerate)
    });

    let mut normals = Vec::with_capacity(cloud.len());
    let mut curvatures = Vec::with_capacity(cloud.len());
    let mut diagnostics = NormalDiagnostics::default();
    for (i, (n, c, degenerate)) in per_point.into_iter().enumerate() {
        normals.push(n);
        curvatures.push(c);
        if degenerate {
            diagnostics.degenerate.push(i);
        }
    }
    let (points, _, _, confidence) = cloud.clone().into_parts();
    let out = PointCloud::from_parts_unchecked(points, Some(normals), None, confidence)
        .with_curvatures(curvatures)?;
    Ok((out, diagnostics))
}

/// Flip `normal` to point along `outward`. When `outward` is (nearly) tangent
/// the test is meaningless, so fall back to the canonical sign.
fn orient_outward(normal: Vec3, outward: Vec3) -> Vec3 {
    let d = normal.dot(&outward);
    if d.abs() <= 1e-6 * outward.norm() {
        canonical_sign(normal)
    } else if d < 0.0 {
        -normal
    } else {
        normal
    }
}

/// Ascending eigen-decomposition of the centered covariance of `pts`.
pub(crate) fn covariance_eigen(pts: &[Vec3]) -> ([f64; 3], [Vec3; 3]) {
    let n = pts.len() as f64;
    let mean = pts.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.map(|i| eig.eigenvalues[i].max(0.0));
    let vectors = order.map(|i| eig.eigenvectors.column(i).into_owned());
    (values, vectors)
}

fn local_pca(hood: &[Vec3]) -> (Vec3, f64, bool) {
    let (values, vectors) = covariance_eigen(hood);
    let total = values[0] + values[1] + values[2];
    if total <= 0.0 || values[1] <= 1e-12 * values[2] {
        return (Vec3::z(), 0.0, true);
    }
    (vectors[0].normalize(), values[0] / total, false)
}
