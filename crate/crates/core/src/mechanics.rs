//! Point-contact-with-friction mechanics for two-finger grasps.
//!
//! Each contact gets a frame whose Z axis is the inward surface normal. A
//! contact force `f` (contact coordinates) maps to the object wrench
//! `[R f; (p - o) x R f]`, and stacking those 6x3 blocks gives the grasp
//! map `G`.

use std::fmt;

use nalgebra::{Matrix3, Matrix6xX, Vector6, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{GraspError, Result};
use crate::geometry::{angle_deg, reference_tangent, Vec3};

pub type Wrench = Vector6<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactFrame {
    pub origin: Vec3,
    /// Columns are the contact X, Y, Z axes in the object frame.
    pub rotation: Matrix3<f64>,
    pub mu: f64,
}

impl ContactFrame {
    pub fn normal(&self) -> Vec3 {
        self.rotation.column(2).into_owned()
    }
}

pub fn build_contact_frame(contact: Vec3, inward_normal: Vec3, mu: f64) -> Result<ContactFrame> {
    let norm = inward_normal.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(GraspError::invalid("contact normal must be non-zero"));
    }
    if !(mu > 0.0) {
        return Err(GraspError::invalid(format!("friction coefficient must be positive, got {mu}")));
    }
    let z = inward_normal / norm;
    let x = reference_tangent(&z);
    let y = z.cross(&x);
    Ok(ContactFrame {
        origin: contact,
        rotation: Matrix3::from_columns(&[x, y, z]),
        mu,
    })
}

/// Coulomb cone membership, boundary included.
pub fn in_friction_cone(f: &Vec3, mu: f64) -> bool {
    f.z >= 0.0 && (f.x * f.x + f.y * f.y).sqrt() <= mu * f.z
}

/// Object wrench (force, then torque about `object_origin`) of contact force `f`.
pub fn contact_wrench(frame: &ContactFrame, f: &Vec3, object_origin: &Vec3) -> Wrench {
    let force = frame.rotation * f;
    let torque = (frame.origin - object_origin).cross(&force);
    Wrench::new(force.x, force.y, force.z, torque.x, torque.y, torque.z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspMap {
    /// 6 x 3k, columns grouped per contact.
    pub matrix: Matrix6xX<f64>,
    pub contacts: Vec<ContactFrame>,
    pub object_origin: Vec3,
    /// Length used to make torque rows dimensionless before the SVD test.
    pub characteristic_length: f64,
}

impl GraspMap {
    /// Net wrench of stacked contact forces.
    pub fn apply(&self, forces: &[f64]) -> Result<Wrench> {
        if forces.len() != self.matrix.ncols() {
            return Err(GraspError::DimensionMismatch {
                expected: self.matrix.ncols(),
                actual: forces.len(),
            });
        }
        let mut w = Wrench::zeros();
        for (j, fj) in forces.iter().enumerate() {
            w += self.matrix.column(j) * *fj;
        }
        Ok(w)
    }

    pub fn with_characteristic_length(mut self, length: f64) -> Self {
        self.characteristic_length = length;
        self
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.matrix *= alpha;
        out
    }

    /// Row-major nested rows, for debug export.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..6)
            .map(|r| self.matrix.row(r).iter().copied().collect())
            .collect()
    }

    /// `G` with torque rows divided by the characteristic length.
    pub fn normalized_matrix(&self) -> Matrix6xX<f64> {
        let mut m = self.matrix.clone();
        let inv = 1.0 / self.characteristic_length;
        for r in 3..6 {
            m.row_mut(r).scale_mut(inv);
        }
        m
    }
}

pub fn build_grasp_map(contacts: &[ContactFrame], object_origin: Vec3) -> Result<GraspMap> {
    if contacts.is_empty() {
        return Err(GraspError::invalid("grasp map needs at least one contact"));
    }
    let mut matrix = Matrix6xX::zeros(3 * contacts.len());
    for (i, c) in contacts.iter().enumerate() {
        for j in 0..3 {
            let mut e = Vec3::zeros();
            e[j] = 1.0;
            matrix.set_column(3 * i + j, &contact_wrench(c, &e, &object_origin));
        }
    }
    Ok(GraspMap {
        matrix,
        contacts: contacts.to_vec(),
        object_origin,
        characteristic_length: 1.0,
    })
}

/// Grasp map of a two-finger grasp, torque rows to be normalized by `length`.
pub fn two_contact_map(
    contact_a: Vec3,
    normal_a: Vec3,
    contact_b: Vec3,
    normal_b: Vec3,
    mu: f64,
    object_origin: Vec3,
    length: f64,
) -> Result<GraspMap> {
    if !(length > 0.0) {
        return Err(GraspError::invalid("characteristic length must be positive"));
    }
    let frames = [
        build_contact_frame(contact_a, normal_a, mu)?,
        build_contact_frame(contact_b, normal_b, mu)?,
    ];
    Ok(build_grasp_map(&frames, object_origin)?.with_characteristic_length(length))
}

/// Which singular values must clear the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosureMode {
    /// Five largest: rotation about the grasp axis is left free.
    #[default]
    SoftPinch,
    /// All six.
    Strict,
}

impl ClosureMode {
    fn required(self) -> usize {
        match self {
            ClosureMode::SoftPinch => 5,
            ClosureMode::Strict => 6,
        }
    }
}

impl fmt::Display for ClosureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClosureMode::SoftPinch => "soft-pinch",
            ClosureMode::Strict => "strict",
        })
    }
}

impl std::str::FromStr for ClosureMode {
    type Err = GraspError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft-pinch" | "soft_pinch" => Ok(ClosureMode::SoftPinch),
            "strict" => Ok(ClosureMode::Strict),
            other => Err(GraspError::invalid(format!("unknown closure mode `{other}`"))),
        }
    }
}

pub const DEFAULT_SIGMA_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureCheck {
    pub closure: bool,
    /// Smallest singular value among those the mode evaluates.
    pub sigma_min: f64,
    /// All singular values of the normalized map, descending.
    pub singular_values: Vec<f64>,
    pub antipodal: bool,
    pub mode: ClosureMode,
}

/// Singular values of the normalized grasp map, descending.
pub fn singular_values(gm: &GraspMap) -> Vec<f64> {
    let svd = SVD::new(gm.normalized_matrix(), false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Both contacts see the line joining them inside their friction cone.
pub fn is_antipodal(a: &ContactFrame, b: &ContactFrame, mu: f64) -> bool {
    let axis = b.origin - a.origin;
    if axis.norm() == 0.0 {
        return false;
    }
    let half_angle = mu.atan().to_degrees();
    angle_deg(&axis, &a.normal()) <= half_angle && angle_deg(&-axis, &b.normal()) <= half_angle
}

/// SVD force-closure classification for a two-contact grasp map.
pub fn force_closure(gm: &GraspMap, mu: f64, threshold: f64, mode: ClosureMode) -> Result<ClosureCheck> {
    if gm.contacts.len() != 2 {
        return Err(GraspError::Precondition(format!(
            "force closure is defined for 2 contacts, got {}",
            gm.contacts.len()
        )));
    }
    let sv = singular_values(gm);
    let needed = mode.required();
    let sigma_min = if sv.len() >= needed { sv[needed - 1] } else { 0.0 };
    let antipodal = is_antipodal(&gm.contacts[0], &gm.contacts[1], mu);
    Ok(ClosureCheck {
        closure: sigma_min > threshold && antipodal,
        sigma_min,
        singular_values: sv,
        antipodal,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hat(v: &Vec3) -> Matrix3<f64> {
        Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
    }

    #[test]
    fn canonical_frames() {
        let f = build_contact_frame(Vec3::zeros(), Vec3::z(), 0.5).unwrap();
        assert_eq!(f.rotation, Matrix3::identity());

        let f = build_contact_frame(Vec3::zeros(), Vec3::x(), 0.5).unwrap();
        assert_eq!(f.rotation.column(0).into_owned(), Vec3::y());
        assert!((f.rotation.determinant() - 1.0).abs() < 1e-12);
        assert_eq!(f.normal(), Vec3::x());
    }

    #[test]
    fn frame_argument_errors() {
        assert!(build_contact_frame(Vec3::zeros(), Vec3::zeros(), 0.5).is_err());
        assert!(build_contact_frame(Vec3::zeros(), Vec3::z(), 0.0).is_err());
    }

    #[test]
    fn cone_examples() {
        assert!(in_friction_cone(&Vec3::new(0.0, 0.0, 1.0), 0.5));
        assert!(!in_friction_cone(&Vec3::new(0.6, 0.0, 1.0), 0.5));
        assert!(in_friction_cone(&Vec3::new(0.3, 0.4, 1.0), 0.5));
        assert!(!in_friction_cone(&Vec3::new(0.0, 0.0, -1.0), 0.5));
        assert!(in_friction_cone(&Vec3::zeros(), 0.5));
    }

    #[test]
    fn wrench_examples() {
        let f = build_contact_frame(Vec3::zeros(), Vec3::z(), 0.5).unwrap();
        assert_eq!(
            contact_wrench(&f, &Vec3::z(), &Vec3::zeros()),
            Wrench::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0)
        );
        let f = build_contact_frame(Vec3::x(), Vec3::z(), 0.5).unwrap();
        assert_eq!(
            contact_wrench(&f, &Vec3::z(), &Vec3::zeros()),
            Wrench::new(0.0, 0.0, 1.0, 0.0, -1.0, 0.0)
        );
    }

    #[test]
    fn single_contact_map_is_lifted_basis() {
        let f = build_contact_frame(Vec3::zeros(), Vec3::z(), 0.5).unwrap();
        let gm = build_grasp_map(&[f], Vec3::zeros()).unwrap();
        let mut expected = Matrix6xX::zeros(3);
        expected.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
        assert_eq!(gm.matrix, expected);
    }

    fn sphere_pair() -> [ContactFrame; 2] {
        [
            build_contact_frame(Vec3::x(), -Vec3::x(), 0.5).unwrap(),
            build_contact_frame(-Vec3::x(), Vec3::x(), 0.5).unwrap(),
        ]
    }

    #[test]
    fn antipodal_sphere_blocks_and_cancellation() {
        let contacts = sphere_pair();
        let gm = build_grasp_map(&contacts, Vec3::zeros()).unwrap();
        for (i, c) in contacts.iter().enumerate() {
            let block = gm.matrix.fixed_view::<3, 3>(3, 3 * i).into_owned();
            assert!((block - hat(&c.origin) * c.rotation).norm() < 1e-15);
        }
        let w = gm.apply(&[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(w.norm() < 1e-12);
    }

    #[test]
    fn permuting_contacts_permutes_blocks() {
        let [a, b] = sphere_pair();
        let g1 = build_grasp_map(&[a, b], Vec3::new(0.1, 0.2, 0.3)).unwrap();
        let g2 = build_grasp_map(&[b, a], Vec3::new(0.1, 0.2, 0.3)).unwrap();
        assert_eq!(g1.matrix.columns(0, 3), g2.matrix.columns(3, 3));
        assert_eq!(g1.matrix.columns(3, 3), g2.matrix.columns(0, 3));
    }

    #[test]
    fn sphere_grasp_closure() {
        let gm = build_grasp_map(&sphere_pair(), Vec3::zeros()).unwrap();
        let check = force_closure(&gm, 0.5, DEFAULT_SIGMA_THRESHOLD, ClosureMode::SoftPinch).unwrap();
        assert!(check.antipodal);
        // Forces span R^3 from each contact; the only null direction is the
        // squeeze along the axis, so sigma_6 vanishes.
        assert!(check.singular_values[5] < 1e-12);
        assert!(check.sigma_min > DEFAULT_SIGMA_THRESHOLD);
        assert!(check.closure);

        let strict = force_closure(&gm, 0.5, DEFAULT_SIGMA_THRESHOLD, ClosureMode::Strict).unwrap();
        assert!(!strict.closure);
    }

    #[test]
    fn perpendicular_normals_fail_antipodality() {
        let a = build_contact_frame(Vec3::x(), Vec3::z(), 0.5).unwrap();
        let b = build_contact_frame(-Vec3::x(), Vec3::z(), 0.5).unwrap();
        let gm = build_grasp_map(&[a, b], Vec3::zeros()).unwrap();
        let check = force_closure(&gm, 0.5, DEFAULT_SIGMA_THRESHOLD, ClosureMode::SoftPinch).unwrap();
        assert!(!check.antipodal);
        assert!(!check.closure);
    }

    #[test]
    fn tiny_map_fails_threshold() {
        let gm = build_grasp_map(&sphere_pair(), Vec3::zeros()).unwrap().scaled(1e-6);
        let check = force_closure(&gm, 0.5, DEFAULT_SIGMA_THRESHOLD, ClosureMode::SoftPinch).unwrap();
        assert!(check.antipodal);
        assert!(!check.closure);
    }

    #[test]
    fn closure_requires_two_contacts() {
        let gm = build_grasp_map(&sphere_pair()[..1], Vec3::zeros()).unwrap();
        assert!(force_closure(&gm, 0.5, 0.01, ClosureMode::SoftPinch).is_err());
    }

    fn arb_unit() -> impl Strategy<Value = Vec3> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("non-degenerate", |(x, y, z)| x * x + y * y + z * z > 1e-3)
            .prop_map(|(x, y, z)| Vec3::new(x, y, z).normalize())
    }

    fn arb_vec() -> impl Strategy<Value = Vec3> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn frames_are_proper_rotations(n in arb_unit(), p in arb_vec()) {
            let f = build_contact_frame(p, n, 0.5).unwrap();
            let r = f.rotation;
            prop_assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
            prop_assert!((f.normal() - n).norm() < 1e-9);
        }

        #[test]
        fn wrench_torque_is_moment_of_force(n in arb_unit(), p in arb_vec(), o in arb_vec(), f in arb_vec()) {
            let frame = build_contact_frame(p, n, 0.5).unwrap();
            let w = contact_wrench(&frame, &f, &o);
            let force = Vec3::new(w[0], w[1], w[2]);
            let torque = Vec3::new(w[3], w[4], w[5]);
            prop_assert!((torque - (p - o).cross(&force)).norm() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn grasp_map_is_linear(
            na in arb_unit(), nb in arb_unit(), pa in arb_vec(), pb in arb_vec(),
            f in prop::collection::vec(-1.0f64..1.0, 6), g in prop::collection::vec(-1.0f64..1.0, 6),
            alpha in -2.0f64..2.0, beta in -2.0f64..2.0,
        ) {
            let c = [build_contact_frame(pa, na, 0.5).unwrap(), build_contact_frame(pb, nb, 0.5).unwrap()];
            let gm = build_grasp_map(&c, Vec3::zeros()).unwrap();
            let combo: Vec<f64> = f.iter().zip(&g).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = gm.apply(&combo).unwrap();
            let rhs = gm.apply(&f).unwrap() * alpha + gm.apply(&g).unwrap() * beta;
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn origin_shift_only_moves_torque(
            na in arb_unit(), nb in arb_unit(), pa in arb_vec(), pb in arb_vec(), t in arb_vec(),
            f in prop::collection::vec(-1.0f64..1.0, 6),
        ) {
            let c = [build_contact_frame(pa, na, 0.5).unwrap(), build_contact_frame(pb, nb, 0.5).unwrap()];
            let w0 = build_grasp_map(&c, Vec3::zeros()).unwrap().apply(&f).unwrap();
            let w1 = build_grasp_map(&c, t).unwrap().apply(&f).unwrap();
            let force = Vec3::new(w0[0], w0[1], w0[2]);
            for i in 0..3 {
                prop_assert!((w0[i] - w1[i]).abs() < 1e-12);
            }
            let dt = Vec3::new(w0[3] - w1[3], w0[4] - w1[4], w0[5] - w1[5]);
            prop_assert!((dt - t.cross(&force)).norm() < 1e-12);
        }

        #[test]
        fn cone_scale_invariant(f in arb_vec(), alpha in 1e-3f64..1e3, mu in 0.1f64..1.5) {
            // Scaling can only flip the result through rounding right at the boundary.
            let margin = (f.x * f.x + f.y * f.y).sqrt() - mu * f.z;
            prop_assume!(margin.abs() > 1e-9);
            prop_assert_eq!(in_friction_cone(&f, mu), in_friction_cone(&(f * alpha), mu));
        }

        #[test]
        fn scaling_up_never_breaks_closure(na in arb_unit(), nb in arb_unit(), pa in arb_vec(), pb in arb_vec(), alpha in 1.0f64..100.0) {
            let c = [build_contact_frame(pa, na, 0.5).unwrap(), build_contact_frame(pb, nb, 0.5).unwrap()];
            let gm = build_grasp_map(&c, Vec3::zeros()).unwrap();
            let base = force_closure(&gm, 0.5, 0.01, ClosureMode::SoftPinch).unwrap();
            let big = force_closure(&gm.scaled(alpha), 0.5, 0.01, ClosureMode::SoftPinch).unwrap();
            prop_assert!(!base.closure || big.closure);
        }
    }
}
