//! Synthetic corpus invariants and estimated-normal agreement with the
//! generators' analytic normals.

use graspkit::cloud::estimate_normals_curvatures;
use graspkit::geometry::angle_deg;
use graspkit::synthetic::{corpus_standard, generate, Shape, ShapeSpec, STANDARD_DENSITY};
use graspkit::{PointCloud, Vec3};

const NORMAL_K: usize = 16;

#[test]
fn corpus_names_are_unique_and_clouds_well_formed() {
    let corpus = corpus_standard();
    let mut names: Vec<&str> = corpus.iter().map(|e| e.name).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), corpus.len());
    for e in &corpus {
        let cloud = generate(&e.spec).unwrap();
        assert!(cloud.len() > 500, "{} has {} points", e.name, cloud.len());
        cloud.validate().unwrap();
        let normals = cloud.normals().expect("generators attach normals");
        assert!(normals.iter().all(|n| (n.norm() - 1.0).abs() < 1e-12), "{}", e.name);
        assert_eq!(generate(&e.spec).unwrap(), cloud, "{} is not reproducible", e.name);
    }
}

#[test]
fn jitter_is_seeded_and_bounded() {
    let base = ShapeSpec::new(Shape::Box { size: [0.05, 0.06, 0.07] }, STANDARD_DENSITY);
    let exact = generate(&base).unwrap();
    let a = generate(&base.clone().with_jitter(0.001, 9)).unwrap();
    let b = generate(&base.clone().with_jitter(0.001, 9)).unwrap();
    let c = generate(&base.with_jitter(0.001, 10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.points(), c.points());
    for (p, q) in exact.points().iter().zip(a.points()) {
        assert!((p - q).amax() <= 0.001 + 1e-15);
    }
}

/// Fraction of `selected` points whose estimated normal is within 10 degrees
/// of the analytic one (signed comparison).
fn agreement(analytic: &PointCloud, selected: impl Fn(&Vec3) -> bool) -> (f64, usize) {
    let est = estimate_normals_curvatures(analytic, NORMAL_K).unwrap();
    let truth = analytic.normals().unwrap();
    let got = est.normals().unwrap();
    let mut total = 0;
    let mut good = 0;
    for (i, p) in analytic.points().iter().enumerate() {
        if !selected(p) {
            continue;
        }
        total += 1;
        if angle_deg(&truth[i], &got[i]) <= 10.0 {
            good += 1;
        }
    }
    (good as f64 / total as f64, total)
}

#[test]
fn smooth_shapes_normals_within_ten_degrees() {
    for shape in [
        Shape::Sphere { radius: 0.0335 },
        Shape::Ellipsoid { semi_axes: [0.03, 0.03, 0.05] },
    ] {
        let cloud = generate(&ShapeSpec::new(shape.clone(), STANDARD_DENSITY)).unwrap();
        let (frac, n) = agreement(&cloud, |_| true);
        assert!(frac >= 0.95, "{shape:?}: {frac} of {n}");
    }
}

#[test]
fn creased_shapes_normals_within_ten_degrees_away_from_edges() {
    let spacing = 1.0 / STANDARD_DENSITY.sqrt();
    let margin = 2.0 * spacing;

    let size = [0.05, 0.075, 0.05];
    let cloud = generate(&ShapeSpec::new(Shape::Box { size }, STANDARD_DENSITY)).unwrap();
    let half = size.map(|s| s / 2.0);
    let (frac, n) = agreement(&cloud, |p| {
        // On a face, the two tangential coordinates must stay clear of the rim.
        let on_face: Vec<usize> = (0..3).filter(|&i| (p[i].abs() - half[i]).abs() < 1e-9).collect();
        on_face.len() == 1 && (0..3).filter(|&i| i != on_face[0]).all(|i| p[i].abs() <= half[i] - margin)
    });
    assert!(n > 1000);
    assert!(frac >= 0.95, "box: {frac} of {n}");

    let (r, h) = (0.0375, 0.25);
    let cloud = generate(&ShapeSpec::new(Shape::Cylinder { radius: r, height: h }, STANDARD_DENSITY)).unwrap();
    let (frac, n) = agreement(&cloud, |p| {
        let radial = (p.x * p.x + p.y * p.y).sqrt();
        p.z.abs() <= h / 2.0 - margin && (radial - r).abs() < 1e-9 || radial <= r - margin
    });
    assert!(frac >= 0.95, "cylinder: {frac} of {n}");
}

#[test]
fn c_shell_jaws_are_wider_than_the_gripper() {
    let e = corpus_standard().into_iter().find(|e| e.name.starts_with("c_shell")).unwrap();
    let Shape::CShell { gap, .. } = e.spec.shape else {
        panic!("clamp analog is not a c-shell");
    };
    assert!(gap > 0.085);
}
