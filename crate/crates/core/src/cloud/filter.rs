use std::collections::BTreeMap;

use super::{PointCloud, SpatialIndex};
use crate::error::{GraspError, Result};
use crate::geometry::Vec3;
use crate::par;

#[derive(Default)]
struct VoxelAccum {
    members: Vec<usize>,
}

/// Replace every occupied voxel by the centroid of its members.
///
/// Output is ordered by lexicographic voxel coordinate. Normals become the
/// renormalized member mean; curvature and confidence are averaged.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f64) -> Result<PointCloud> {
    if !(voxel > 0.0) || !voxel.is_finite() {
        return Err(GraspError::invalid(format!("voxel size must be positive, got {voxel}")));
    }
    let mut grid: BTreeMap<(i64, i64, i64), VoxelAccum> = BTreeMap::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let key = (
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        );
        grid.entry(key).or_default().members.push(i);
    }

    let mut points = Vec::with_capacity(grid.len());
    let mut normals = cloud.normals().map(|_| Vec::with_capacity(grid.len()));
    let mut curvatures = cloud.curvatures().map(|_| Vec::with_capacity(grid.len()));
    let mut confidence = cloud.confidence().map(|_| Vec::with_capacity(grid.len()));

    for acc in grid.values() {
        let m = &acc.members;
        let inv = 1.0 / m.len() as f64;
        let sum = m.iter().fold(Vec3::zeros(), |s, &i| s + cloud.point(i));
        points.push(sum * inv);
        if let (Some(out), Some(src)) = (normals.as_mut(), cloud.normals()) {
            let mean = m.iter().fold(Vec3::zeros(), |s, &i| s + src[i]);
            let norm = mean.norm();
            // Opposing normals can cancel; keep the first member's then.
            out.push(if norm > 1e-12 { mean / norm } else { src[m[0]] });
        }
        if let (Some(out), Some(src)) = (curvatures.as_mut(), cloud.curvatures()) {
            out.push(m.iter().map(|&i| src[i]).sum::<f64>() * inv);
        }
        if let (Some(out), Some(src)) = (confidence.as_mut(), cloud.confidence()) {
            out.push(m.iter().map(|&i| src[i]).sum::<f64>() * inv);
        }
    }
    Ok(PointCloud::from_parts_unchecked(points, normals, curvatures, confidence))
}

/// Drop points whose mean distance to their `k` nearest neighbours exceeds
/// `mean + std_ratio * stddev` of that statistic over the whole cloud.
pub fn remove_statistical_outliers(cloud: &PointCloud, k: usize, std_ratio: f64) -> Result<PointCloud> {
    if k == 0 {
        return Err(GraspError::invalid("k must be at least 1"));
    }
    if cloud.len() < k + 1 {
        return Err(GraspError::invalid(format!(
            "outlier removal with k={k} needs at least {} points, cloud has {}",
            k + 1,
            cloud.len()
        )));
    }
    if !(std_ratio > 0.0) {
        return Err(GraspError::invalid("std_ratio must be positive"));
    }
    let index = SpatialIndex::new(cloud.points());
    let mean_dist = par::map_range(cloud.len(), |i| {
        // The first hit is the point itself (distance 0, or a duplicate: same thing).
        let hits = index.knn(&cloud.point(i), k + 1);
        hits.iter().skip(1).map(|n| n.distance()).sum::<f64>() / k as f64
    });
    let n = mean_dist.len() as f64;
    let mean = mean_dist.iter().sum::<f64>() / n;
    let var = mean_dist.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    let limit = mean + std_ratio * var.sqrt();
    let keep: Vec<usize> = (0..cloud.len()).filter(|&i| mean_dist[i] <= limit).collect();
    Ok(cloud.select(&keep))
}
