//! Octant pseudo-force stability score and candidate ranking.
//!
//! Twenty-four pseudo forces, the signed unit axes scaled by `f_ex`, probe
//! the grasp in every octant. For stacked contact forces `f` let
//! `q = |G f|^2`; the score is `sum_i prod_j (q - m_ij)` with
//! `m_ij = |F_ij|^2`. It is minimized over friction-cone forces with a
//! per-contact norm cap by projected gradient descent.

use serde::{Deserialize, Serialize};

use crate::candidate::GraspCandidate;
use crate::cloud::PointCloud;
use crate::error::{GraspError, Result};
use crate::geometry::{to_array, Vec3};
use crate::mechanics::{force_closure, two_contact_map, ClosureMode, GraspMap};
use crate::par;

/// How the pseudo forces enter each factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostMode {
    /// `q - m_ij` with `q = |G f|^2`.
    #[default]
    Scalar,
    /// Experimental: `|G f + [F_ij; 0]|^2 - m_ij`.
    Wrench,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub cost_tolerance: f64,
    pub kkt_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            cost_tolerance: 1e-10,
            kkt_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityProblem {
    pub grasp_map: GraspMap,
    pub mu: f64,
    pub f_ex_magnitude: f64,
    pub f_normal_cap: f64,
    /// `octant_bases[i][j]`: signed unit axis `j` of octant `i`.
    pub octant_bases: [[Vec3; 3]; 8],
    pub cost_mode: CostMode,
}

/// Octant `i` takes axis signs from the bits of `i` (x: bit 2, y: bit 1, z: bit 0),
/// so octant 0 is `{+X, +Y, +Z}` and octant 7 is `{-X, -Y, -Z}`.
pub fn octant_bases() -> [[Vec3; 3]; 8] {
    std::array::from_fn(|i| {
        let s = |bit: usize| if i >> bit & 1 == 1 { -1.0 } else { 1.0 };
        [Vec3::x() * s(2), Vec3::y() * s(1), Vec3::z() * s(0)]
    })
}

impl StabilityProblem {
    pub fn new(grasp_map: GraspMap, mu: f64, f_ex_magnitude: f64, f_normal_cap: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(GraspError::invalid("mu must be positive"));
        }
        if !(f_ex_magnitude > 0.0) || !(f_normal_cap > 0.0) {
            return Err(GraspError::invalid("f_ex_magnitude and f_normal_cap must be positive"));
        }
        Ok(Self {
            grasp_map,
            mu,
            f_ex_magnitude,
            f_normal_cap,
            octant_bases: octant_bases(),
            cost_mode: CostMode::Scalar,
        })
    }

    pub fn with_cost_mode(mut self, mode: CostMode) -> Self {
        self.cost_mode = mode;
        self
    }

    pub fn dim(&self) -> usize {
        self.grasp_map.matrix.ncols()
    }

    fn pseudo_force(&self, i: usize, j: usize) -> Vec3 {
        self.octant_bases[i][j] * self.f_ex_magnitude
    }

    fn check_dim(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.dim() {
            return Err(GraspError::DimensionMismatch {
                expected: self.dim(),
                actual: f.len(),
            });
        }
        Ok(())
    }

    /// Pure normal force of magnitude `f_ex` at every contact.
    pub fn default_start(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.dim()];
        for c in 0..self.dim() / 3 {
            f[3 * c + 2] = self.f_ex_magnitude;
        }
        f
    }

    /// The 24 factors `a_ij` and their gradients with respect to `f`.
    fn factors(&self, f: &[f64], with_grad: bool) -> ([[f64; 3]; 8], Vec<[[f64; 3]; 8]>) {
        let g = &self.grasp_map.matrix;
        let gf = self.grasp_map.apply(f).expect("dimension checked");
        let mut a = [[0.0; 3]; 8];
        let mut grads = Vec::new();
        if with_grad {
            grads = vec![[[0.0; 3]; 8]; f.len()];
        }
        match self.cost_mode {
            CostMode::Scalar => {
                let q = gf.norm_squared();
                let dq: Vec<f64> = (0..f.len()).map(|k| 2.0 * g.column(k).dot(&gf)).collect();
                for i in 0..8 {
                    for j in 0..3 {
                        a[i][j] = q - self.pseudo_force(i, j).norm_squared();
                        for (k, d) in dq.iter().enumerate().take(grads.len()) {
                            grads[k][i][j] = *d;
                        }
                    }
                }
            }
            CostMode::Wrench => {
                for i in 0..8 {
                    for j in 0..3 {
                        let p = self.pseudo_force(i, j);
                        let mut r = gf;
                        r[0] += p.x;
                        r[1] += p.y;
                        r[2] += p.z;
                        a[i][j] = r.norm_squared() - p.norm_squared();
                        for (k, gk) in grads.iter_mut().enumerate() {
                            gk[i][j] = 2.0 * g.column(k).dot(&r);
                        }
                    }
                }
            }
        }
        (a, grads)
    }

    fn cost_unchecked(&self, f: &[f64]) -> f64 {
        let (a, _) = self.factors(f, false);
        a.iter().map(|row| row[0] * row[1] * row[2]).sum()
    }

    fn gradient_unchecked(&self, f: &[f64]) -> Vec<f64> {
        let (a, da) = self.factors(f, true);
        da.iter()
            .map(|dk| {
                let mut s = 0.0;
                for i in 0..8 {
                    let [x, y, z] = a[i];
                    s += dk[i][0] * y * z + x * dk[i][1] * z + x * y * dk[i][2];
                }
                s
            })
            .collect()
    }

    /// Largest violation of the cone, non-negativity and norm-cap constraints.
    pub fn constraint_violation(&self, f: &[f64]) -> f64 {
        f.chunks(3)
            .map(|c| {
                let t = (c[0] * c[0] + c[1] * c[1]).sqrt();
                let norm = (t * t + c[2] * c[2]).sqrt();
                (t - self.mu * c[2]).max(-c[2]).max(norm - self.f_normal_cap).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Euclidean projection onto the feasible set, contact by contact.
    pub fn project(&self, f: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(f.len());
        for c in f.chunks(3) {
            let p = project_cone_ball(Vec3::new(c[0], c[1], c[2]), self.mu, self.f_normal_cap);
            out.extend_from_slice(&[p.x, p.y, p.z]);
        }
        out
    }
}

pub fn stability_cost(f: &[f64], problem: &StabilityProblem) -> Result<f64> {
    problem.check_dim(f)?;
    Ok(problem.cost_unchecked(f))
}

pub fn stability_gradient(f: &[f64], problem: &StabilityProblem) -> Result<Vec<f64>> {
    problem.check_dim(f)?;
    Ok(problem.gradient_unchecked(f))
}

/// Projection onto `{|(x, y)| <= mu z} ∩ {|f| <= cap}`.
///
/// For a cone with apex at the ball centre, projecting onto the cone and then
/// onto the ball lands on the intersection.
pub fn project_cone_ball(f: Vec3, mu: f64, cap: f64) -> Vec3 {
    let t = (f.x * f.x + f.y * f.y).sqrt();
    let on_cone = if t <= mu * f.z {
        f
    } else if mu * t <= -f.z {
        Vec3::zeros()
    } else {
        let s = (1.0 + mu * mu).sqrt();
        let alpha = (mu * t + f.z) / s;
        let (t_new, z_new) = (alpha * mu / s, alpha / s);
        Vec3::new(f.x * t_new / t, f.y * t_new / t, z_new)
    };
    let n = on_cone.norm();
    if n > cap {
        on_cone * (cap / n)
    } else {
        on_cone
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    pub optimal_f: Vec<f64>,
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
    pub constraint_violation: f64,
    /// `|f - P(f - grad)|` at the returned point.
    pub kkt_residual: f64,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn kkt_residual(problem: &StabilityProblem, f: &[f64], g: &[f64]) -> f64 {
    let step: Vec<f64> = f.iter().zip(g).map(|(x, d)| x - d).collect();
    dist(f, &problem.project(&step))
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
/// Window of the nonmonotone acceptance test.
const MEMORY: usize = 10;
/// A stalled cost only counts as converged once the projected gradient is this small.
const STALL_KKT: f64 = 1e-7;

/// Spectral projected gradient: Barzilai-Borwein step lengths, projected
/// search direction and a nonmonotone Armijo test over the last few costs.
///
/// `f0 = None` starts from pure normal forces of magnitude `f_ex`. The start is
/// projected onto the feasible set first. Non-convergence is reported through
/// `converged = false` together with the best iterate.
pub fn solve_stability(problem: &StabilityProblem, f0: Option<&[f64]>, opts: &SolverOptions) -> Result<StabilityResult> {
    let start = match f0 {
        Some(f) => {
            problem.check_dim(f)?;
            f.to_vec()
        }
        None => problem.default_start(),
    };
    let mut f = problem.project(&start);
    let mut cost = problem.cost_unchecked(&f);
    let mut grad = problem.gradient_unchecked(&f);
    let gnorm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut step = if gnorm > 0.0 { 1.0 / gnorm } else { 1.0 };
    let mut history = vec![cost];
    let (mut best_f, mut best_cost, mut best_grad) = (f.clone(), cost, grad.clone());
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if kkt_residual(problem, &f, &grad) < opts.kkt_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let moved: Vec<f64> = f.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
        let dir: Vec<f64> = problem.project(&moved).iter().zip(&f).map(|(p, x)| p - x).collect();
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let cand: Vec<f64> = f.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
            let c = problem.cost_unchecked(&cand);
            if c <= reference + ARMIJO * t * slope {
                accepted = Some((cand, c));
                break;
            }
            t *= 0.5;
        }
        let Some((next, next_cost)) = accepted else {
            // No acceptable point along the projected direction.
            converged = kkt_residual(problem, &f, &grad) < STALL_KKT;
            break;
        };

        let next_grad = problem.gradient_unchecked(&next);
        let s: Vec<f64> = next.iter().zip(&f).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { 1e12f64.min(step * 10.0) };

        let change = (cost - next_cost).abs();
        f = next;
        cost = next_cost;
        grad = next_grad;
        if cost < best_cost {
            (best_f, best_cost, best_grad) = (f.clone(), cost, grad.clone());
        }
        history.push(cost);
        if history.len() > MEMORY {
            history.remove(0);
        }
        if change < opts.cost_tolerance && kkt_residual(problem, &f, &grad) < STALL_KKT {
            converged = true;
            break;
        }
    }
    let (f, cost, grad) = if best_cost < cost { (best_f, best_cost, best_grad) } else { (f, cost, grad) };

    Ok(StabilityResult {
        constraint_violation: problem.constraint_violation(&f),
        kkt_residual: kkt_residual(problem, &f, &grad),
        optimal_f: f,
        cost,
        converged,
        iterations,
    })
}

/// Everything the ranking needs from the planner configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringParams {
    pub mu: f64,
    pub sigma_threshold: f64,
    pub closure_mode: ClosureMode,
    pub f_ex_magnitude: f64,
    pub f_normal_cap: f64,
    pub cost_mode: CostMode,
    pub solver: SolverOptions,
}

impl Default for ScoringParams {
    fn default() -> Self {
        Self {
            mu: 0.5,
            sigma_threshold: crate::mechanics::DEFAULT_SIGMA_THRESHOLD,
            closure_mode: ClosureMode::SoftPinch,
            f_ex_magnitude: 1.0,
            f_normal_cap: 2.0,
            cost_mode: CostMode::Scalar,
            solver: SolverOptions::default(),
        }
    }
}

impl ScoringParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(GraspError::invalid("mu must be positive"));
        }
        if !(self.sigma_threshold >= 0.0) {
            return Err(GraspError::invalid("sigma_threshold must be non-negative"));
        }
        if !(self.f_ex_magnitude > 0.0) || !(self.f_normal_cap > 0.0) {
            return Err(GraspError::invalid("f_ex_magnitude and f_normal_cap must be positive"));
        }
        if self.solver.max_iterations == 0 {
            return Err(GraspError::invalid("solver max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspReport {
    pub candidate_index: usize,
    pub contact_a: [f64; 3],
    pub contact_b: [f64; 3],
    pub normal_a: [f64; 3],
    pub normal_b: [f64; 3],
    pub grasp_axis: [f64; 3],
    pub width: f64,
    pub closure: bool,
    pub antipodal: bool,
    pub sigma_min: f64,
    pub singular_values: Vec<f64>,
    pub stability_cost: f64,
    pub converged: bool,
    pub iterations: usize,
    pub constraint_violation: f64,
    /// Per-contact forces in contact coordinates.
    pub forces: Vec<[f64; 3]>,
    pub mode: ClosureMode,
    pub f_normal_cap: f64,
    /// Distance from the cloud centroid to the grasp line.
    pub axis_centroid_distance: f64,
    pub pair_angle_deg: f64,
}

impl GraspReport {
    pub fn contact_a(&self) -> Vec3 {
        Vec3::from(self.contact_a)
    }

    pub fn contact_b(&self) -> Vec3 {
        Vec3::from(self.contact_b)
    }

    pub fn normal_a(&self) -> Vec3 {
        Vec3::from(self.normal_a)
    }

    pub fn normal_b(&self) -> Vec3 {
        Vec3::from(self.normal_b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub reports: Vec<GraspReport>,
    /// Set when no candidate passed force closure.
    pub no_closure: bool,
}

impl Ranking {
    pub fn best(&self) -> Option<&GraspReport> {
        self.reports.first()
    }
}

pub fn score_candidate(
    index: usize,
    c: &GraspCandidate,
    origin: Vec3,
    length: f64,
    params: &ScoringParams,
) -> Result<GraspReport> {
    let gm = two_contact_map(c.contact_a, c.normal_a, c.contact_b, c.normal_b, params.mu, origin, length)?;
    let check = force_closure(&gm, params.mu, params.sigma_threshold, params.closure_mode)?;
    let problem = StabilityProblem::new(gm, params.mu, params.f_ex_magnitude, params.f_normal_cap)?
        .with_cost_mode(params.cost_mode);
    let sol = solve_stability(&problem, None, &params.solver)?;
    Ok(GraspReport {
        candidate_index: index,
        contact_a: to_array(&c.contact_a),
        contact_b: to_array(&c.contact_b),
        normal_a: to_array(&c.normal_a),
        normal_b: to_array(&c.normal_b),
        grasp_axis: to_array(&c.grasp_axis),
        width: c.width,
        closure: check.closure,
        antipodal: check.antipodal,
        sigma_min: check.sigma_min,
        singular_values: check.singular_values,
        stability_cost: sol.cost,
        converged: sol.converged,
        iterations: sol.iterations,
        constraint_violation: sol.constraint_violation,
        forces: sol.optimal_f.chunks(3).map(|f| [f[0], f[1], f[2]]).collect(),
        mode: params.closure_mode,
        f_normal_cap: params.f_normal_cap,
        axis_centroid_distance: c.axis_distance_to(&origin),
        pair_angle_deg: c.source.antiparallel_angle_deg,
    })
}

/// Relative resolution below which two costs count as equal when ranking.
pub const COST_TIE_TOLERANCE: f64 = 1e-9;

/// Sort reports by closure, stability cost, distance of the grasp line from
/// the centroid, width and finally candidate index.
///
/// Costs are bucketed at `COST_TIE_TOLERANCE` relative to the batch scale so
/// that rounding noise does not decide between otherwise equal grasps.
pub fn sort_reports(reports: &mut [GraspReport]) {
    let scale = reports
        .iter()
        .map(|r| r.stability_cost.abs())
        .fold(1.0f64, f64::max);
    let bucket = |c: f64| (c / (scale * COST_TIE_TOLERANCE)).round();
    reports.sort_by(|a, b| {
        b.closure
            .cmp(&a.closure)
            .then(bucket(a.stability_cost).total_cmp(&bucket(b.stability_cost)))
            .then(a.axis_centroid_distance.total_cmp(&b.axis_centroid_distance))
            .then(a.width.total_cmp(&b.width))
            .then(a.candidate_index.cmp(&b.candidate_index))
    });
}

/// Score every candidate and sort; the head is the planner's answer.
pub fn rank_candidates(candidates: &[GraspCandidate], cloud: &PointCloud, params: &ScoringParams) -> Result<Ranking> {
    if candidates.is_empty() {
        return Err(GraspError::Precondition("no candidates to rank".into()));
    }
    params.validate()?;
    let origin = cloud.centroid();
    let length = cloud.bounding_radius();
    if !(length > 0.0) {
        return Err(GraspError::Precondition("cloud has zero extent".into()));
    }
    let indexed: Vec<(usize, &GraspCandidate)> = candidates.iter().enumerate().collect();
    let mut reports = par::map_slice(&indexed, |(i, c)| score_candidate(*i, c, origin, length, params))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    sort_reports(&mut reports);
    let no_closure = !reports.iter().any(|r| r.closure);
    Ok(Ranking { reports, no_closure })
}
