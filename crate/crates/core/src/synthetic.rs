//! Deterministic benchmark shapes with analytic normals.
//!
//! Surfaces are sampled on regular parameter grids (Fibonacci lattices for
//! spheres and ellipsoids), so a spec always produces the same cloud in the
//! same order. Optional jitter is seeded.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{GraspError, Result};
use crate::geometry::Vec3;

/// Neighbourhood size assumed by the analytic curvature proxy.
const CURVATURE_PROXY_K: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Axis-aligned box centred at the origin.
    Box { size: [f64; 3] },
    /// Closed cylinder along Z, centred at the origin.
    Cylinder { radius: f64, height: f64 },
    Sphere { radius: f64 },
    Ellipsoid { semi_axes: [f64; 3] },
    /// Rectangular bar bent once in the XY plane; arms meet at the origin.
    BentPrism {
        arm_length: f64,
        width: f64,
        thickness: f64,
        bend_deg: f64,
    },
    /// Open single-sheet channel: a back plate at x = 0 and two arms at
    /// z = +-gap/2 reaching towards +X. No material thickness.
    CShell { arm_length: f64, gap: f64, depth: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub shape: Shape,
    /// Target samples per unit area.
    pub density: f64,
    pub seed: u64,
    /// Half-width of uniform per-axis jitter; 0 gives an exact surface.
    pub jitter: f64,
}

impl ShapeSpec {
    pub fn new(shape: Shape, density: f64) -> Self {
        Self {
            shape,
            density,
            seed: 0,
            jitter: 0.0,
        }
    }

    pub fn with_jitter(mut self, jitter: f64, seed: u64) -> Self {
        self.jitter = jitter;
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dims: Vec<f64> = match &self.shape {
            Shape::Box { size } => size.to_vec(),
            Shape::Cylinder { radius, height } => vec![*radius, *height],
            Shape::Sphere { radius } => vec![*radius],
            Shape::Ellipsoid { semi_axes } => semi_axes.to_vec(),
            Shape::BentPrism {
                arm_length,
                width,
                thickness,
                bend_deg,
            } => {
                if !(0.0..90.0).contains(bend_deg) {
                    return Err(GraspError::invalid("bend_deg must lie in [0, 90)"));
                }
                vec![*arm_length, *width, *thickness]
            }
            Shape::CShell { arm_length, gap, depth } => vec![*arm_length, *gap, *depth],
        };
        if dims.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(GraspError::invalid("shape dimensions must be positive"));
        }
        if !(self.density > 0.0) {
            return Err(GraspError::invalid("density must be positive"));
        }
        if !(self.jitter >= 0.0) {
            return Err(GraspError::invalid("jitter must be >= 0"));
        }
        Ok(())
    }

    /// Typical sample spacing, `1 / sqrt(density)`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.density.sqrt()
    }
}

struct Builder {
    points: Vec<Vec3>,
    normals: Vec<Vec3>,
    curvatures: Vec<f64>,
}

impl Builder {
    fn new() -> Self {
        Self {
            points: Vec::new(),
            normals: Vec::new(),
            curvatures: Vec::new(),
        }
    }

    fn push(&mut self, p: Vec3, n: Vec3, c: f64) {
        self.points.push(p);
        self.normals.push(n.normalize());
        self.curvatures.push(c);
    }

    /// Cell-centred grid on the rectangle `origin + [0,lu] u + [0,lv] v`.
    fn flat_patch(&mut self, origin: Vec3, u: Vec3, lu: f64, v: Vec3, lv: f64, normal: Vec3, spacing: f64) {
        let nu = cells(lu, spacing);
        let nv = cells(lv, spacing);
        for i in 0..nu {
            for j in 0..nv {
                let su = (i as f64 + 0.5) / nu as f64 * lu;
                let sv = (j as f64 + 0.5) / nv as f64 * lv;
                self.push(origin + u * su + v * sv, normal, 0.0);
            }
        }
    }
}

fn cells(length: f64, spacing: f64) -> usize {
    ((length / spacing).round() as usize).max(1)
}

/// Surface-variation value of a patch with principal curvatures `k1`, `k2`
/// sampled over a disc holding `CURVATURE_PROXY_K` points.
fn curvature_proxy(k1: f64, k2: f64, density: f64) -> f64 {
    let rho2 = CURVATURE_PROXY_K / (PI * density);
    (rho2 * ((k1 * k1 + k2 * k2) / 32.0 - k1 * k2 / 48.0)).clamp(0.0, 1.0)
}

fn fibonacci_direction(i: usize, n: usize) -> Vec3 {
    let golden = PI * (3.0 - 5f64.sqrt());
    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let t = golden * i as f64;
    Vec3::new(r * t.cos(), r * t.sin(), z)
}

pub fn generate(spec: &ShapeSpec) -> Result<PointCloud> {
    spec.validate()?;
    let s = spec.spacing();
    let d = spec.density;
    let mut b = Builder::new();
    match &spec.shape {
        Shape::Box { size } => {
            let h = Vec3::from(*size) / 2.0;
            for axis in 0..3 {
                let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
                let (u, v) = (unit(ua), unit(va));
                for sign in [1.0, -1.0] {
                    let normal = unit(axis) * sign;
                    let origin = normal * h[axis] - u * h[ua] - v * h[va];
                    b.flat_patch(origin, u, size[ua], v, size[va], normal, s);
                }
            }
        }
        Shape::Cylinder { radius, height } => {
            let r = *radius;
            let nt = cells(2.0 * PI * r, s).max(3);
            let nh = cells(*height, s);
            let side_curv = curvature_proxy(1.0 / r, 0.0, d);
            for i in 0..nt {
                let t = 2.0 * PI * (i as f64 + 0.5) / nt as f64;
                let radial = Vec3::new(t.cos(), t.sin(), 0.0);
                for j in 0..nh {
                    let z = -height / 2.0 + (j as f64 + 0.5) / nh as f64 * height;
                    b.push(radial * r + Vec3::z() * z, radial, side_curv);
                }
            }
            let n = cells(2.0 * r, s);
            let step = 2.0 * r / n as f64;
            let rim = (r - step / 2.0).max(0.0);
            for sign in [1.0, -1.0] {
                for i in 0..n {
                    for j in 0..n {
                        let x = -r + (i as f64 + 0.5) * step;
                        let y = -r + (j as f64 + 0.5) * step;
                        if x * x + y * y <= rim * rim {
                            b.push(Vec3::new(x, y, sign * height / 2.0), Vec3::z() * sign, 0.0);
                        }
                    }
                }
            }
        }
        Shape::Sphere { radius } => {
            let n = ((4.0 * PI * radius * radius * d).round() as usize).max(4);
            let c = curvature_proxy(1.0 / radius, 1.0 / radius, d);
            for i in 0..n {
                let dir = fibonacci_direction(i, n);
                b.push(dir * *radius, dir, c);
            }
        }
        Shape::Ellipsoid { semi_axes } => {
            let [a, bb, c] = *semi_axes;
            // Knud Thomsen's surface area approximation.
            let p = 1.6075;
            let area = 4.0
                * PI
                * (((a * bb).powf(p) + (a * c).powf(p) + (bb * c).powf(p)) / 3.0).powf(1.0 / p);
            let n = ((area * d).round() as usize).max(4);
            for i in 0..n {
                let dir = fibonacci_direction(i, n);
                let pt = Vec3::new(a * dir.x, bb * dir.y, c * dir.z);
                let grad = Vec3::new(pt.x / (a * a), pt.y / (bb * bb), pt.z / (c * c));
                let (h, k) = ellipsoid_curvatures(&pt, a, bb, c);
                // k1^2 + k2^2 = 4H^2 - 2K and k1 k2 = K.
                let rho2 = CURVATURE_PROXY_K / (PI * d);
                let curv = (rho2 * ((4.0 * h * h - 2.0 * k) / 32.0 - k / 48.0)).clamp(0.0, 1.0);
                b.push(pt, grad, curv);
            }
        }
        Shape::BentPrism {
            arm_length,
            width,
            thickness,
            bend_deg,
        } => bent_prism(&mut b, *arm_length, *width, *thickness, bend_deg.to_radians() / 2.0, s),
        Shape::CShell { arm_length, gap, depth } => {
            let (l, g, dp) = (*arm_length, *gap, *depth);
            b.flat_patch(Vec3::new(0.0, -dp / 2.0, -g / 2.0), Vec3::z(), g, Vec3::y(), dp, -Vec3::x(), s);
            b.flat_patch(Vec3::new(0.0, -dp / 2.0, g / 2.0), Vec3::x(), l, Vec3::y(), dp, Vec3::z(), s);
            b.flat_patch(Vec3::new(0.0, -dp / 2.0, -g / 2.0), Vec3::x(), l, Vec3::y(), dp, -Vec3::z(), s);
        }
    }

    if spec.jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for p in &mut b.points {
            for a in 0..3 {
                p[a] += rng.random_range(-spec.jitter..=spec.jitter);
            }
        }
    }

    PointCloud::new(b.points)
        .with_normals(b.normals)?
        .with_curvatures(b.curvatures)
}

fn unit(axis: usize) -> Vec3 {
    let mut v = Vec3::zeros();
    v[axis] = 1.0;
    v
}

/// Mean and Gaussian curvature of the ellipsoid at surface point `p`.
fn ellipsoid_curvatures(p: &Vec3, a: f64, b: f64, c: f64) -> (f64, f64) {
    let h2 = p.x * p.x / a.powi(4) + p.y * p.y / b.powi(4) + p.z * p.z / c.powi(4);
    let abc2 = (a * b * c).powi(2);
    let gauss = 1.0 / (abc2 * h2 * h2);
    let mean = (a * a + b * b + c * c - p.norm_squared()).abs() / (2.0 * abc2 * h2.powf(1.5));
    (mean, gauss)
}

/// Two straight arms of rectangular section, mitred on the plane x = 0.
fn bent_prism(b: &mut Builder, length: f64, width: f64, thickness: f64, half_bend: f64, s: f64) {
    let arms = [
        Vec3::new(-half_bend.cos(), -half_bend.sin(), 0.0),
        Vec3::new(half_bend.cos(), -half_bend.sin(), 0.0),
    ];
    // Extend each face past the joint, then clip at the mitre plane.
    let overshoot = width + thickness;
    for (k, along) in arms.iter().enumerate() {
        let keep = |p: &Vec3| if k == 0 { p.x < 0.0 } else { p.x >= 0.0 };
        let side = Vec3::z().cross(along);
        let total = length + overshoot;
        let faces = [
            (side, width / 2.0, Vec3::z(), thickness),
            (-side, width / 2.0, Vec3::z(), thickness),
            (Vec3::z(), thickness / 2.0, side, width),
            (-Vec3::z(), thickness / 2.0, side, width),
        ];
        for (normal, offset, across, across_len) in faces {
            let nu = cells(total, s);
            let nv = cells(across_len, s);
            for i in 0..nu {
                for j in 0..nv {
                    let su = -overshoot + (i as f64 + 0.5) / nu as f64 * total;
                    let sv = -across_len / 2.0 + (j as f64 + 0.5) / nv as f64 * across_len;
                    let p = along * su + normal * offset + across * sv;
                    if keep(&p) {
                        b.push(p, normal, 0.0);
                    }
                }
            }
        }
        let cap_origin = along * length - side * (width / 2.0) - Vec3::z() * (thickness / 2.0);
        b.flat_patch(cap_origin, side, width, Vec3::z(), thickness, *along, s);
    }
}

/// A named corpus entry with the everyday object it stands in for.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub analog: &'static str,
    pub spec: ShapeSpec,
}

/// Samples per square metre for the standard corpus (2 mm spacing).
pub const STANDARD_DENSITY: f64 = 250_000.0;

/// Fixed benchmark registry. Dimensions are metres; cylinders wider than an
/// 85 mm gripper opening are narrowed to fit.
pub fn corpus_standard() -> Vec<CorpusEntry> {
    let e = |name, analog, shape| CorpusEntry {
        name,
        analog,
        spec: ShapeSpec::new(shape, STANDARD_DENSITY),
    };
    vec![
        e("box_foam_brick", "YCB foam brick", Shape::Box { size: [0.05, 0.075, 0.05] }),
        e("box_gelatin", "YCB gelatin box", Shape::Box { size: [0.028, 0.085, 0.073] }),
        e("box_cracker", "YCB cracker box", Shape::Box { size: [0.06, 0.158, 0.21] }),
        e(
            "cylinder_chips_can",
            "YCB chips can",
            Shape::Cylinder { radius: 0.0375, height: 0.25 },
        ),
        e(
            "cylinder_master_chef_can",
            "YCB master chef can (narrowed)",
            Shape::Cylinder { radius: 0.04, height: 0.14 },
        ),
        e(
            "cylinder_soup_can",
            "YCB tomato soup can",
            Shape::Cylinder { radius: 0.033, height: 0.101 },
        ),
        e("sphere_tennis_ball", "YCB tennis ball", Shape::Sphere { radius: 0.0335 }),
        e(
            "ellipsoid_pear",
            "YCB pear",
            Shape::Ellipsoid { semi_axes: [0.03, 0.03, 0.05] },
        ),
        e(
            "bent_prism_banana",
            "YCB banana",
            Shape::BentPrism {
                arm_length: 0.09,
                width: 0.035,
                thickness: 0.03,
                bend_deg: 30.0,
            },
        ),
        e(
            "c_shell_medium_clamp",
            "YCB medium clamp (open jaw wider than the gripper)",
            Shape::CShell {
                arm_length: 0.05,
                gap: 0.12,
                depth: 0.03,
            },
        ),
    ]
}

pub fn corpus_lookup(name: &str) -> Result<CorpusEntry> {
    corpus_standard()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| GraspError::UnknownShape(name.to_string()))
}
