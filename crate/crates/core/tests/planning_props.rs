use std::f64::consts::TAU;

use avsi::geometry::{point_on_circle, point_to_circle_distance, rotate_about, Circle3, Point3, UnitVec3, Vec3};
use avsi::planning::{
    dilation_target, plan_approach, plan_dilation, plan_grasp_point, plan_insertion, Gripper, InsertionParams,
    DILATION_SPEED_FRACTION, HOVER_OFFSET_MM,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arb_unit() -> impl Strategy<Value = UnitVec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("non-degenerate", |(x, y, z)| Vec3::new(*x, *y, *z).norm() > 0.1)
        .prop_map(|(x, y, z)| Vec3::new(x, y, z).normalize().unwrap())
}

fn arb_point(range: f64) -> impl Strategy<Value = Point3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn random_circle(rng: &mut ChaCha8Rng) -> Circle3 {
    let n = loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.norm() > 0.1 {
            break v.normalize().unwrap();
        }
    };
    let c = Vec3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
    Circle3::new(c, n, rng.gen_range(2.0..20.0)).unwrap()
}

#[test]
fn grasp_point_oracles_on_random_circles() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for _ in 0..200 {
        let c = random_circle(&mut rng);
        let a = rng.gen_range(0.0..TAU);
        let f1 = point_on_circle(&c, a);
        let f2 = point_on_circle(&c, a + rng.gen_range(0.3..2.8));
        let g = plan_grasp_point(&c, f1, f2).unwrap();
        let tol = 1e-9 * c.radius.max(1.0);
        assert!(point_to_circle_distance(g, &c) < tol);
        assert!((g.distance(f1) - g.distance(f2)).abs() < tol);
        // On the major arc: farther from f1 than the chord midpoint's projection.
        assert!(g.distance(f1) > f1.distance(f2) / 2.0);

        let approach = plan_approach(g, &c).unwrap();
        for w in &approach.waypoints {
            assert!(w.pose.orthonormality_error() < 1e-9);
            assert!((w.pose.determinant() - 1.0).abs() < 1e-9);
        }
        assert!(approach.first().position().distance(g + c.normal * HOVER_OFFSET_MM) < 1e-9);
        assert_eq!(approach.last().gripper, Gripper::Closed);

        let t = dilation_target(g, &c).unwrap();
        assert!((t.distance(c.center) - 7.0 / 3.0 * c.radius).abs() < tol);
        assert!((t - c.center).dot(c.normal.get()).abs() < tol);
        let pull = plan_dilation(g, &c).unwrap();
        assert_eq!(pull.waypoints.len(), 1);
        assert_eq!(pull.last().speed_fraction, DILATION_SPEED_FRACTION);
    }
}

#[test]
fn insertion_frames_stay_orthonormal_and_end_open() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let c = random_circle(&mut rng);
        let f = [point_on_circle(&c, 0.0), point_on_circle(&c, 2.1)];
        let g = plan_grasp_point(&c, f[0], f[1]).unwrap();
        let gd = dilation_target(g, &c).unwrap();
        for (use_screw, dilated) in [(true, true), (false, true), (true, false)] {
            let p = InsertionParams { use_screw, ..InsertionParams::default() };
            let plan = plan_insertion(&c, f, dilated.then_some(gd), 4.0, &p).unwrap();
            assert_eq!(plan.release.is_some(), dilated);
            let wps = &plan.inserting.waypoints;
            assert!(plan.release_after < wps.len());
            assert!(wps.iter().all(|w| w.pose.orthonormality_error() < 1e-9));
            assert_eq!(plan.inserting.last().gripper, Gripper::Open);
            assert!(wps[plan.release_after].position().distance(plan.opening_centroid) < 1e-9);
            // The screw rotates the frame about the normal by the configured angle.
            if use_screw {
                let (a, b) = (&wps[plan.release_after].pose, &wps[plan.release_after + 1].pose);
                assert!((a.x.angle_to(b.x) - p.screw_rotation.to_radians()).abs() < 1e-9);
                assert!(a.z.angle_to(b.z) < 1e-9);
            }
        }
    }
}

proptest! {
    #[test]
    fn grasp_point_is_rigid_invariant(
        center in arb_point(50.0), normal in arb_unit(), r in 2.0..20.0f64,
        a in 0.0..TAU, sep in 0.3..2.8f64,
        axis in arb_unit(), angle in -3.0..3.0f64, shift in arb_point(100.0),
    ) {
        let c = Circle3::new(center, normal, r).unwrap();
        let (f1, f2) = (point_on_circle(&c, a), point_on_circle(&c, a + sep));
        let g = plan_grasp_point(&c, f1, f2).unwrap();
        let m = |p: Point3| rotate_about(p, axis, angle) + shift;
        let moved = Circle3::new(m(center), normal.rotated(axis, angle), r).unwrap();
        let g2 = plan_grasp_point(&moved, m(f1), m(f2)).unwrap();
        prop_assert!(g2.distance(m(g)) < 1e-6);
    }
}
