//! End-to-end planning and robustness properties on synthetic objects.

use graspkit::candidate::find_antiparallel_pairs;
use graspkit::geometry::angle_deg;
use graspkit::mechanics::{force_closure, two_contact_map};
use graspkit::planner::{self, PlanStatus, PlannerConfig};
use graspkit::report;
use graspkit::robustness::{perturb_and_snap, robust_force_closure, trial_rng, GraspContacts, PerturbationSpec};
use graspkit::synthetic::{corpus_lookup, generate, Shape, ShapeSpec, STANDARD_DENSITY};
use graspkit::{SpatialIndex, Vec3};

fn box_cloud(size: [f64; 3]) -> graspkit::PointCloud {
    generate(&ShapeSpec::new(Shape::Box { size }, STANDARD_DENSITY)).unwrap()
}

#[test]
fn box_gives_three_antiparallel_face_pairs() {
    let cfg = PlannerConfig::default();
    let (_, seg) = planner::segment_cloud(&box_cloud([0.05, 0.06, 0.07]), &cfg).unwrap();
    assert_eq!(seg.regions.len(), 6);
    let pairs = find_antiparallel_pairs(&seg.regions, cfg.max_angle_deg, cfg.max_width);
    assert_eq!(pairs.len(), 3);
    let mut widths: Vec<f64> = pairs.iter().map(|p| p.separation).collect();
    widths.sort_by(f64::total_cmp);
    for (w, expected) in widths.iter().zip([0.05, 0.06, 0.07]) {
        assert!((w - expected).abs() < cfg.voxel_size, "{w} vs {expected}");
    }
}

#[test]
fn box_face_too_wide_for_gripper_is_not_paired() {
    let cfg = PlannerConfig::default();
    let (_, seg) = planner::segment_cloud(&box_cloud([0.05, 0.06, 0.12]), &cfg).unwrap();
    let pairs = find_antiparallel_pairs(&seg.regions, cfg.max_angle_deg, cfg.max_width);
    assert_eq!(pairs.len(), 2);
}

#[test]
fn box_plan_grasps_across_a_face_pair() {
    let cfg = PlannerConfig::default();
    let size = [0.05, 0.075, 0.05];
    let r = planner::plan(&box_cloud(size), &cfg).unwrap();
    assert_eq!(r.status, PlanStatus::Ok);
    let best = r.best.unwrap();
    let axis = best.contact_b() - best.contact_a();
    let (k, _) = (0..3)
        .map(|i| (i, angle_deg(&axis, &Vec3::ith(i, 1.0)).min(angle_deg(&-axis, &Vec3::ith(i, 1.0)))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let off = angle_deg(&axis, &Vec3::ith(k, 1.0)).min(angle_deg(&-axis, &Vec3::ith(k, 1.0)));
    assert!(off <= 2.0, "axis {off} deg from a face normal");
    assert!((best.width - size[k]).abs() <= cfg.voxel_size, "width {} vs {}", best.width, size[k]);
    assert!(best.closure);
}

#[test]
fn sphere_plan_axis_passes_near_the_centre() {
    let cfg = PlannerConfig::default();
    let cloud = generate(&corpus_lookup("sphere_tennis_ball").unwrap().spec).unwrap();
    let r = planner::plan(&cloud, &cfg).unwrap();
    let best = r.best.expect("sphere yields a grasp");
    let a = best.contact_a();
    let d = (best.contact_b() - a).normalize();
    let miss = (-a - d * (-a).dot(&d)).norm();
    assert!(miss <= 2.0 * cfg.voxel_size, "axis misses the centre by {miss}");
}

#[test]
fn ranked_reports_are_sorted_and_well_formed() {
    let cfg = PlannerConfig::default();
    let cloud = generate(&corpus_lookup("box_cracker").unwrap().spec).unwrap();
    let r = planner::plan(&cloud, &cfg).unwrap();
    assert_eq!(r.counts.candidates, r.all_reports.len());
    assert!(!r.no_closure);
    for w in r.all_reports.windows(2) {
        assert!(w[0].closure >= w[1].closure);
    }
    for rep in &r.all_reports {
        assert!(rep.width > 0.0 && rep.width <= cfg.max_width);
        assert!(rep.constraint_violation <= 1e-9);
        assert_eq!(rep.forces.len(), 2);
    }
}

#[test]
fn robustness_falls_with_noise_on_a_box() {
    let cfg = PlannerConfig::default();
    let cloud = box_cloud([0.05, 0.075, 0.05]);
    let best = planner::plan(&cloud, &cfg).unwrap().best.unwrap();
    let processed = planner::preprocess(&cloud, &cfg).unwrap().unwrap();
    let p = |sigma| {
        robust_force_closure((&best).into(), &processed, &PerturbationSpec::new(sigma, 1000, 11))
            .unwrap()
            .probability
    };
    let (low, high) = (p(0.02), p(0.1));
    assert!(low >= high - 0.05, "p(0.02) = {low}, p(0.1) = {high}");
}

/// Replays every trial by hand with the same seed on an object where most
/// perturbations break antipodality.
#[test]
fn seeded_replay_on_a_thin_sliver() {
    let cloud = box_cloud([0.004, 0.08, 0.03]);
    let grasp = GraspContacts {
        contact_a: Vec3::new(-0.002, 0.0, 0.0),
        contact_b: Vec3::new(0.002, 0.0, 0.0),
    };
    let spec = PerturbationSpec::new(0.01, 200, 42);
    let report = robust_force_closure(grasp, &cloud, &spec).unwrap();

    let index = SpatialIndex::new(cloud.points());
    let normals = cloud.normals().unwrap();
    let replay: Vec<bool> = (0..spec.trials)
        .map(|t| {
            let mut rng = trial_rng(spec.seed, t);
            let ia = perturb_and_snap(&grasp.contact_a, &index, spec.sigma, &mut rng);
            let ib = perturb_and_snap(&grasp.contact_b, &index, spec.sigma, &mut rng);
            if ia == ib {
                return false;
            }
            let gm = two_contact_map(
                cloud.point(ia),
                -normals[ia],
                cloud.point(ib),
                -normals[ib],
                spec.mu,
                cloud.centroid(),
                cloud.bounding_radius(),
            )
            .unwrap();
            force_closure(&gm, spec.mu, spec.threshold, spec.closure_mode).unwrap().closure
        })
        .collect();
    assert_eq!(report.per_trial, replay);
    let closures = replay.iter().filter(|&&b| b).count();
    assert_eq!(report.probability, closures as f64 / spec.trials as f64);
    assert!(report.probability < 0.5, "sliver should mostly fail, got {}", report.probability);
}

#[cfg(feature = "parallel")]
#[test]
fn one_thread_pool_matches_default_pool() {
    let cfg = PlannerConfig::default();
    let cloud = generate(&corpus_lookup("cylinder_soup_can").unwrap().spec).unwrap();
    let run = || {
        let r = planner::plan(&cloud, &cfg).unwrap();
        let e = planner::evaluate(&cloud, r.best.as_ref().unwrap().into(), 0.05, &cfg).unwrap();
        (report::plan_json_without_timings(&r).unwrap(), report::to_json(&e).unwrap())
    };
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    assert_eq!(single.install(run), wide.install(run));
}

#[test]
fn jittered_box_still_plans() {
    let cfg = PlannerConfig::default();
    let spec = ShapeSpec::new(Shape::Box { size: [0.05, 0.075, 0.05] }, STANDARD_DENSITY).with_jitter(0.0005, 3);
    let r = planner::plan(&generate(&spec).unwrap(), &cfg).unwrap();
    assert_eq!(r.status, PlanStatus::Ok);
    assert!(r.best.unwrap().closure);
}
