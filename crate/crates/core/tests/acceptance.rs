//! Acceptance gate: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use avsi::fitting::{ransac_circle, RansacParams};
use avsi::geometry::{
    circle_from_three_points, grasp_frame, point_on_circle, point_to_circle_distance, triangle_incircle_radius,
    Circle3, UnitVec3, Vec3,
};
use avsi::harness::{rows_to_csv, run_experiment, CellSummary, ExperimentResult, ExperimentSpec, Variant};
use avsi::perception::{deproject, iou, segment_threshold, ColorBand, SegMask};
use avsi::planning::{dilation_target, plan_grasp_point};
use avsi::scene::{build_scene, render_splat, SceneConfig};
use avsi::simkernel::{stretched_opening, SEGMENT_TOLERANCE};
use common::{median, normal_error, standard_noisy_cloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Check {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: String) -> Check {
    Check { ok, detail }
}

fn random_unit(rng: &mut ChaCha8Rng) -> UnitVec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if (0.1..=1.0).contains(&v.norm()) {
            return v.normalize().unwrap();
        }
    }
}

fn random_circle(rng: &mut ChaCha8Rng) -> Circle3 {
    let c = Vec3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
    Circle3::new(c, random_unit(rng), rng.gen_range(1.0..20.0)).unwrap()
}

fn exact_fitting() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let (mut worst_pos, mut worst_ang) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let truth = random_circle(&mut rng);
        let a = rng.gen_range(0.0..TAU);
        let b = a + rng.gen_range(0.5..1.5);
        let c = b + rng.gen_range(1.5..2.5);
        let fit = circle_from_three_points(
            point_on_circle(&truth, a),
            point_on_circle(&truth, b),
            point_on_circle(&truth, c),
        )
        .unwrap();
        worst_pos = worst_pos.max(fit.center.distance(truth.center)).max((fit.radius - truth.radius).abs());
        worst_ang = worst_ang.max(normal_error(fit.normal, truth.normal));
    }
    let elapsed = start.elapsed();
    check(
        worst_pos <= 1e-6 && worst_ang <= 1e-6 && elapsed < Duration::from_secs(1),
        format!("max error {worst_pos:.2e} mm / {worst_ang:.2e} rad in {elapsed:.2?}"),
    )
}

fn ransac_recovery() -> Check {
    let (mut center, mut normal, mut radius) = (Vec::new(), Vec::new(), Vec::new());
    let mut slowest = Duration::ZERO;
    for seed in 0..50 {
        let (truth, cloud) = standard_noisy_cloud(seed);
        let p = RansacParams { iterations: 1000, inlier_radius: 1.0, seed, refine: false };
        let start = Instant::now();
        let fit = ransac_circle(&cloud, &p).unwrap();
        slowest = slowest.max(start.elapsed());
        center.push(fit.circle.center.distance(truth.center));
        normal.push(normal_error(fit.circle.normal, truth.normal).to_degrees());
        radius.push((fit.circle.radius - truth.radius).abs() / truth.radius);
    }
    let (c, n, r) = (median(center), median(normal), median(radius));
    check(
        c <= 1.0 && n <= 5.0 && r <= 0.05 && slowest < Duration::from_secs(1),
        format!("median centre {c:.3} mm, normal {n:.2} deg, radius {:.2}%, slowest fit {slowest:.2?}", 100.0 * r),
    )
}

fn grasp_geometry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut equi, mut on, mut ortho, mut dil) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let c = random_circle(&mut rng);
        let a = rng.gen_range(0.0..TAU);
        let f1 = point_on_circle(&c, a);
        let f2 = point_on_circle(&c, a + rng.gen_range(0.2..3.0));
        let g = plan_grasp_point(&c, f1, f2).unwrap();
        equi = equi.max((g.distance(f1) - g.distance(f2)).abs());
        on = on.max(point_to_circle_distance(g, &c));
        let f = grasp_frame(g, &c).unwrap();
        ortho = ortho.max(f.orthonormality_error()).max((f.determinant() - 1.0).abs());
        dil = dil.max((dilation_target(g, &c).unwrap().distance(c.center) - 7.0 / 3.0 * c.radius).abs());
    }
    check(
        equi <= 1e-6 && on <= 1e-6 && ortho <= 1e-9 && dil <= 1e-6,
        format!("equidistance {equi:.1e}, on-circle {on:.1e}, frame {ortho:.1e}, dilation {dil:.1e}"),
    )
}

fn default_opening() -> Check {
    let c = Circle3::new(Vec3::ZERO, UnitVec3::Z, 7.5).unwrap();
    let f1 = point_on_circle(&c, 0.0);
    let f2 = point_on_circle(&c, 120f64.to_radians());
    let g = plan_grasp_point(&c, f1, f2).unwrap();
    let t = stretched_opening(&c, f1, f2, dilation_target(g, &c).unwrap()).unwrap();
    let r = triangle_incircle_radius(&t);
    // Heron by hand: sides 7.5*sqrt(3) and two of sqrt(7.5^2 + 17.5^2 + 7.5*17.5).
    let a = 7.5 * 3f64.sqrt();
    let b = (7.5f64.powi(2) + 17.5f64.powi(2) + 7.5 * 17.5).sqrt();
    let s = (a + 2.0 * b) / 2.0;
    let oracle = (s * (s - a) * (s - b) * (s - b)).sqrt() / s;
    check(
        (r - 4.807).abs() <= 1e-3 && (r - oracle).abs() < 1e-9,
        format!("incircle {r:.4} mm (Heron {oracle:.4})"),
    )
}

fn cell(res: &ExperimentResult, v: Variant, angle: f64, od: f64) -> &CellSummary {
    res.summaries
        .iter()
        .find(|s| s.variant == v && s.angle_deg == angle && s.shunt_od_mm == od)
        .expect("cell in default grid")
}

fn table_ordering(res: &ExperimentResult) -> Check {
    let n = |v, a, od| cell(res, v, a, od).successes;
    let nd14 = n(Variant::NoDilation, 0.0, 14.0);
    let nd8 = n(Variant::NoDilation, 0.0, 8.0);
    let ns14 = n(Variant::NoScrew, 0.0, 14.0);
    let f14 = n(Variant::Full, 0.0, 14.0);
    let f8 = n(Variant::Full, 0.0, 8.0);
    let f14_30 = n(Variant::Full, 30.0, 14.0);
    let ok = nd14 == 0
        && nd8 >= 19
        && ns14 <= 4
        && f14 >= 14
        && f8 >= 18
        && (6..=14).contains(&f14_30)
        && f14 > ns14
        && f14 >= f14_30;
    check(
        ok,
        format!(
            "no-dil 14mm {nd14}/20, no-dil 8mm {nd8}/20, no-screw 14mm {ns14}/20, full 14mm {f14}/20, \
             full 8mm {f8}/20, full 14mm 30deg {f14_30}/20"
        ),
    )
}

fn timing_bands(res: &ExperimentResult) -> Check {
    let mean = |v: Variant| {
        let cells: Vec<_> = res.summaries.iter().filter(|s| s.variant == v).collect();
        cells.iter().map(|s| s.avg_time_s * s.attempts as f64).sum::<f64>()
            / cells.iter().map(|s| s.attempts as f64).sum::<f64>()
    };
    let (nd, full) = (mean(Variant::NoDilation), mean(Variant::Full));
    check(
        (8.0..=11.0).contains(&nd) && (12.5..=15.5).contains(&full) && nd < full,
        format!("no-dilation {nd:.2} s, full {full:.2} s"),
    )
}

fn determinism(runs: &[(usize, String)], elapsed: Duration) -> Check {
    let same = runs.windows(2).all(|w| w[0].1 == w[1].1);
    let workers: Vec<String> = runs.iter().map(|(w, _)| w.to_string()).collect();
    check(
        same && elapsed < Duration::from_secs(60),
        format!("trials.csv identical under {} workers: {same}; {elapsed:.2?} total", workers.join("/")),
    )
}

fn perception_round_trip() -> Check {
    let cfg = SceneConfig::noise_free();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let scene = build_scene(&cfg, &mut rng).unwrap();
    let cam = cfg.camera();
    let render = render_splat(&cfg, &scene, &cam, &mut rng).unwrap();
    let mask = segment_threshold(&render.image, &ColorBand::around(cfg.rim_color, SEGMENT_TOLERANCE));
    let cloud = deproject(&mask, &render.image, &cam).unwrap();
    let worst = cloud.points.iter().map(|p| scene.torus.signed_distance(*p).abs()).fold(0.0, f64::max);
    let (w, h) = mask.dims();
    let same = iou(&mask, &mask.clone()).unwrap();
    let mut complement = mask.clone();
    complement.data.iter_mut().for_each(|b| *b = !*b);
    let disjoint = iou(&mask, &complement).unwrap();
    let none = iou(&SegMask::empty(w, h), &SegMask::full(w, h)).unwrap();
    check(
        !cloud.is_empty() && worst <= 1e-6 && same == 1.0 && disjoint == 0.0 && none == 0.0,
        format!("{} points, max surface distance {worst:.1e} mm; iou same {same}, disjoint {disjoint}", cloud.len()),
    )
}

fn main() -> ExitCode {
    let mut results = vec![
        ("exact three-point circle fitting", exact_fitting()),
        ("RANSAC recovery on noisy cloud", ransac_recovery()),
        ("grasp geometry", grasp_geometry()),
        ("default dilated opening", default_opening()),
    ];

    let spec = ExperimentSpec::default();
    let start = Instant::now();
    let mut runs = Vec::new();
    let mut first = None;
    for workers in [1, 4, 8] {
        let res = run_experiment(&spec, Some(workers)).expect("default experiment runs");
        runs.push((workers, rows_to_csv(&res.rows).expect("csv")));
        first.get_or_insert(res);
    }
    let elapsed = start.elapsed();
    let res = first.expect("ran at least once");
    results.push(("success-rate ordering", table_ordering(&res)));
    results.push(("trial timing bands", timing_bands(&res)));
    results.push(("deterministic experiment", determinism(&runs, elapsed)));
    results.push(("perception round trip", perception_round_trip()));

    let mut failed = 0;
    for (i, (name, c)) in results.iter().enumerate() {
        println!("{} criterion {}: {name} -- {}", if c.ok { "PASS" } else { "FAIL" }, i + 1, c.detail);
        failed += usize::from(!c.ok);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
