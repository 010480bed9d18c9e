//! Small vector helpers shared across modules.

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

/// Angle between two vectors in degrees, clamped against rounding.
pub fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 90.0;
    }
    (a.dot(b) / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Deterministic unit tangent to `n`: the normalized rejection of +X from `n`,
/// or of +Y when `n` is within ~25 degrees of the X axis.
pub fn reference_tangent(n: &Vec3) -> Vec3 {
    let reference = if n.x.abs() > 0.9 { Vec3::y() } else { Vec3::x() };
    (reference - n * n.dot(&reference)).normalize()
}

/// Flip `n` so its largest-magnitude component is positive (first axis wins ties).
pub fn canonical_sign(n: Vec3) -> Vec3 {
    let mut best = 0;
    for i in 1..3 {
        if n[i].abs() > n[best].abs() {
            best = i;
        }
    }
    if n[best] < 0.0 {
        -n
    } else {
        n
    }
}

pub fn to_array(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub fn from_array(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tangent_is_orthogonal_unit() {
        for n in [Vec3::x(), Vec3::y(), Vec3::z(), Vec3::new(1.0, 1.0, 1.0).normalize()] {
            let t = reference_tangent(&n);
            assert!((t.norm() - 1.0).abs() < 1e-12);
            assert!(t.dot(&n).abs() < 1e-12);
        }
    }

    #[test]
    fn canonical_sign_flips_dominant_negative() {
        assert_eq!(canonical_sign(Vec3::new(0.1, -0.9, 0.0)), Vec3::new(-0.1, 0.9, 0.0));
        assert_eq!(canonical_sign(Vec3::z()), Vec3::z());
    }
}
