//! Antiparallel region pairing and antipodal contact selection.
//!
//! Two planar regions whose normals point in opposite directions are
//! projected onto their common plane. Contacts are picked inside the
//! intersection of the two projected bounding boxes, so the jaws close along
//! a line that hits both patches.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{GraspError, Result};
use crate::geometry::{angle_deg, canonical_sign, reference_tangent, to_array, Vec3};
use crate::par;
use crate::region::PlanarRegion;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateParams {
    pub max_angle_deg: f64,
    /// Gripper maximum opening.
    pub max_width: f64,
    pub n_per_pair: usize,
    /// How far (in the common plane) a contact may sit from its sample location.
    pub snap_radius: f64,
    /// Each side needs this many points inside the overlap box.
    pub min_overlap_points: usize,
}

impl Default for CandidateParams {
    fn default() -> Self {
        Self {
            max_angle_deg: 15.0,
            max_width: 0.085,
            n_per_pair: 5,
            snap_radius: 0.005,
            min_overlap_points: 20,
        }
    }
}

impl CandidateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_angle_deg > 0.0 && self.max_angle_deg < 90.0) {
            return Err(GraspError::invalid("max_angle_deg must be in (0, 90)"));
        }
        if !(self.max_width > 0.0) {
            return Err(GraspError::invalid("max_width must be positive"));
        }
        if self.n_per_pair == 0 {
            return Err(GraspError::invalid("n_per_pair must be at least 1"));
        }
        if !(self.snap_radius > 0.0) {
            return Err(GraspError::invalid("snap_radius must be positive"));
        }
        Ok(())
    }
}

/// Two regions facing in opposite directions. Indices refer to the region list
/// the pair was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPair {
    pub region_a: usize,
    pub region_b: usize,
    /// `normalize(n_a - n_b)`.
    pub common_normal: [f64; 3],
    pub antiparallel_angle_deg: f64,
    /// Distance between the region centroids along the common normal.
    pub separation: f64,
}

impl RegionPair {
    pub fn common_normal(&self) -> Vec3 {
        Vec3::from(self.common_normal)
    }

    pub fn swapped(&self) -> Self {
        Self {
            region_a: self.region_b,
            region_b: self.region_a,
            common_normal: to_array(&-self.common_normal()),
            ..*self
        }
    }
}

pub fn find_antiparallel_pairs(regions: &[PlanarRegion], max_angle_deg: f64, max_width: f64) -> Vec<RegionPair> {
    let mut pairs = Vec::new();
    for i in 0..regions.len() {
        for j in (i + 1)..regions.len() {
            let (na, nb) = (regions[i].normal(), regions[j].normal());
            let angle = angle_deg(&na, &-nb);
            if angle > max_angle_deg {
                continue;
            }
            let diff = na - nb;
            if diff.norm() == 0.0 {
                continue;
            }
            let n_com = diff.normalize();
            let separation = (regions[i].centroid() - regions[j].centroid()).dot(&n_com).abs();
            if separation > 0.0 && separation <= max_width {
                pairs.push(RegionPair {
                    region_a: i,
                    region_b: j,
                    common_normal: to_array(&n_com),
                    antiparallel_angle_deg: angle,
                    separation,
                });
            }
        }
    }
    pairs.sort_by(|a, b| {
        a.antiparallel_angle_deg
            .total_cmp(&b.antiparallel_angle_deg)
            .then((a.region_a, a.region_b).cmp(&(b.region_a, b.region_b)))
    });
    pairs
}

/// `p - (p . n) n` for unit `n`.
pub fn project_point(p: &Vec3, n: &Vec3) -> Vec3 {
    p - n * p.dot(n)
}

/// Orthonormal in-plane basis of the plane with normal `n`.
///
/// Built from the sign-canonical normal so that `n` and `-n` give the same
/// coordinates.
pub fn plane_basis(n: &Vec3) -> [Vec3; 2] {
    let n = canonical_sign(n.normalize());
    let e1 = reference_tangent(&n);
    [e1, n.cross(&e1)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairProjection {
    pub basis: [Vec3; 2],
    /// Member indices into the cloud, aligned with `proj_a` / `proj_b`.
    pub indices_a: Vec<usize>,
    pub indices_b: Vec<usize>,
    pub proj_a: Vec<[f64; 2]>,
    pub proj_b: Vec<[f64; 2]>,
}

pub fn project_to_common_plane(pair: &RegionPair, regions: &[PlanarRegion], cloud: &PointCloud) -> PairProjection {
    let basis = plane_basis(&pair.common_normal());
    let to2d = |i: &usize| {
        let p = cloud.point(*i);
        [p.dot(&basis[0]), p.dot(&basis[1])]
    };
    let indices_a = regions[pair.region_a].point_indices.clone();
    let indices_b = regions[pair.region_b].point_indices.clone();
    PairProjection {
        basis,
        proj_a: indices_a.iter().map(to2d).collect(),
        proj_b: indices_b.iter().map(to2d).collect(),
        indices_a,
        indices_b,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2 {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

const BOX_EPS: f64 = 1e-12;

impl Box2 {
    pub fn bounding(pts: &[[f64; 2]]) -> Option<Self> {
        let first = pts.first()?;
        let mut b = Box2 { min: *first, max: *first };
        for p in pts {
            for d in 0..2 {
                b.min[d] = b.min[d].min(p[d]);
                b.max[d] = b.max[d].max(p[d]);
            }
        }
        Some(b)
    }

    pub fn contains(&self, p: &[f64; 2]) -> bool {
        (0..2).all(|d| p[d] >= self.min[d] - BOX_EPS && p[d] <= self.max[d] + BOX_EPS)
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.min[0] + self.max[0]), 0.5 * (self.min[1] + self.max[1])]
    }

    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]).max(0.0) * (self.max[1] - self.min[1]).max(0.0)
    }

    pub fn intersect(&self, other: &Box2) -> Option<Box2> {
        let b = Box2 {
            min: [self.min[0].max(other.min[0]), self.min[1].max(other.min[1])],
            max: [self.max[0].min(other.max[0]), self.max[1].min(other.max[1])],
        };
        (b.area() > 0.0).then_some(b)
    }
}

/// Intersection of the two bounding boxes, or `None` when it has no area or
/// either side has fewer than `min_points` inside it.
pub fn overlap_region(proj_a: &[[f64; 2]], proj_b: &[[f64; 2]], min_points: usize) -> Option<Box2> {
    let b = Box2::bounding(proj_a)?.intersect(&Box2::bounding(proj_b)?)?;
    let inside = |pts: &[[f64; 2]]| pts.iter().filter(|p| b.contains(p)).count();
    (inside(proj_a) >= min_points && inside(proj_b) >= min_points).then_some(b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspCandidate {
    pub contact_a: Vec3,
    pub contact_b: Vec3,
    /// Cloud indices of the contacts.
    pub index_a: usize,
    pub index_b: usize,
    /// Inward normals: each points toward the opposite contact's region.
    pub normal_a: Vec3,
    pub normal_b: Vec3,
    pub grasp_axis: Vec3,
    pub width: f64,
    pub source: RegionPair,
}

/// Flat JSON form of a candidate for debugging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub contact_a: [f64; 3],
    pub contact_b: [f64; 3],
    pub normal_a: [f64; 3],
    pub normal_b: [f64; 3],
    pub width: f64,
    pub pair_angle_deg: f64,
}

impl GraspCandidate {
    pub fn record(&self) -> CandidateRecord {
        CandidateRecord {
            contact_a: to_array(&self.contact_a),
            contact_b: to_array(&self.contact_b),
            normal_a: to_array(&self.normal_a),
            normal_b: to_array(&self.normal_b),
            width: self.width,
            pair_angle_deg: self.source.antiparallel_angle_deg,
        }
    }

    /// Distance from `p` to the infinite line through the contacts.
    pub fn axis_distance_to(&self, p: &Vec3) -> f64 {
        (p - self.contact_a).cross(&self.grasp_axis).norm()
    }

    /// Worst angle between the grasp line and either inward normal.
    pub fn max_axis_normal_angle_deg(&self) -> f64 {
        angle_deg(&self.grasp_axis, &self.normal_a).max(angle_deg(&-self.grasp_axis, &self.normal_b))
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// Box centre first, then Halton(2, 3) points scaled into the box.
pub fn sample_locations(b: &Box2, count: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(count);
    if count > 0 {
        out.push(b.center());
    }
    let mut i = 1u64;
    while out.len() < count {
        out.push([
            b.min[0] + radical_inverse(i, 2) * (b.max[0] - b.min[0]),
            b.min[1] + radical_inverse(i, 3) * (b.max[1] - b.min[1]),
        ]);
        i += 1;
    }
    out
}

/// Member within `radius` of `loc` minimizing distance / confidence, ties by index.
fn pick_contact(loc: &[f64; 2], proj: &[[f64; 2]], indices: &[usize], cloud: &PointCloud, radius: f64) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (p, &idx) in proj.iter().zip(indices) {
        let d = ((p[0] - loc[0]).powi(2) + (p[1] - loc[1]).powi(2)).sqrt();
        if d > radius {
            continue;
        }
        let score = d / cloud.confidence_at(idx);
        let better = match best {
            None => true,
            Some((s, i)) => score < s || (score == s && idx < i),
        };
        if better {
            best = Some((score, idx));
        }
    }
    best.map(|(_, i)| i)
}

/// Sample locations tried per requested candidate before giving up.
const ATTEMPTS_PER_CANDIDATE: usize = 16;

pub fn make_candidates(
    pair: &RegionPair,
    regions: &[PlanarRegion],
    cloud: &PointCloud,
    params: &CandidateParams,
) -> Vec<GraspCandidate> {
    let proj = project_to_common_plane(pair, regions, cloud);
    match overlap_region(&proj.proj_a, &proj.proj_b, params.min_overlap_points) {
        Some(b) => make_candidates_in_box(pair, regions, &proj, &b, cloud, params),
        None => Vec::new(),
    }
}

/// Candidate selection inside an already computed overlap box.
pub fn make_candidates_in_box(
    pair: &RegionPair,
    regions: &[PlanarRegion],
    proj: &PairProjection,
    overlap: &Box2,
    cloud: &PointCloud,
    params: &CandidateParams,
) -> Vec<GraspCandidate> {
    let (ra, rb) = (&regions[pair.region_a], &regions[pair.region_b]);
    let toward = ra.centroid() - rb.centroid();
    let normal_a = if ra.normal().dot(&toward) > 0.0 { -ra.normal() } else { ra.normal() };
    let normal_b = if rb.normal().dot(&toward) < 0.0 { -rb.normal() } else { rb.normal() };

    let mut out: Vec<GraspCandidate> = Vec::new();
    for loc in sample_locations(overlap, params.n_per_pair * ATTEMPTS_PER_CANDIDATE) {
        if out.len() >= params.n_per_pair {
            break;
        }
        let Some(ia) = pick_contact(&loc, &proj.proj_a, &proj.indices_a, cloud, params.snap_radius) else {
            continue;
        };
        let Some(ib) = pick_contact(&loc, &proj.proj_b, &proj.indices_b, cloud, params.snap_radius) else {
            continue;
        };
        if out.iter().any(|c| c.index_a == ia && c.index_b == ib) {
            continue;
        }
        let (ca, cb) = (cloud.point(ia), cloud.point(ib));
        let width = (cb - ca).norm();
        if !(width > 0.0) || width > params.max_width {
            continue;
        }
        let grasp_axis = (cb - ca) / width;
        let candidate = GraspCandidate {
            contact_a: ca,
            contact_b: cb,
            index_a: ia,
            index_b: ib,
            normal_a,
            normal_b,
            grasp_axis,
            width,
            source: *pair,
        };
        if candidate.max_axis_normal_angle_deg() > params.max_angle_deg {
            continue;
        }
        out.push(candidate);
    }
    out
}

/// Pair every antiparallel region couple and collect candidates in pair order.
pub fn candidates_for_regions(
    regions: &[PlanarRegion],
    cloud: &PointCloud,
    params: &CandidateParams,
) -> (Vec<RegionPair>, Vec<GraspCandidate>) {
    let pairs = find_antiparallel_pairs(regions, params.max_angle_deg, params.max_width);
    let per_pair = par::map_slice(&pairs, |p| make_candidates(p, regions, cloud, params));
    (pairs, per_pair.into_iter().flatten().collect())
}
