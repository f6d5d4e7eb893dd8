//! Shared generators for integration tests.
#![allow(dead_code)]

use std::f64::consts::TAU;

use avsi::cloud::{PointCloud, PointLabel};
use avsi::geometry::{point_on_circle, Circle3, Point3, UnitVec3, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Points on the generating circle in the standard noisy cloud.
pub const STANDARD_INLIERS: usize = 490;
/// Uniform outliers: 210 of 700 points, i.e. 30 %.
pub const STANDARD_OUTLIERS: usize = 210;
pub const STANDARD_SIGMA: f64 = 0.3;
pub const STANDARD_BOX: f64 = 60.0;

/// A 7.5 mm circle with random centre and a normal within 30 degrees of +z,
/// 490 angle-uniform points with isotropic Gaussian noise and 210 outliers
/// uniform in a 60 mm cube around the centre.
pub fn standard_noisy_cloud(seed: u64) -> (Circle3, PointCloud) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_C10D);
    let center = Vec3::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), rng.gen_range(0.0..40.0));
    let tilt_axis = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0)
        .normalize()
        .unwrap_or(UnitVec3::X);
    let normal = UnitVec3::Z.rotated(tilt_axis, rng.gen_range(0.0..30f64.to_radians()));
    let truth = Circle3::new(center, normal, 7.5).unwrap();
    let noise = Normal::new(0.0, STANDARD_SIGMA).unwrap();
    let mut cloud = PointCloud::new();
    for _ in 0..STANDARD_INLIERS {
        let p = point_on_circle(&truth, rng.gen_range(0.0..TAU));
        let jitter = Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        cloud.push(p + jitter, PointLabel::Rim);
    }
    let half = STANDARD_BOX / 2.0;
    for _ in 0..STANDARD_OUTLIERS {
        let off = Vec3::new(rng.gen_range(-half..half), rng.gen_range(-half..half), rng.gen_range(-half..half));
        cloud.push(center + off, PointLabel::Outlier);
    }
    (truth, cloud)
}

/// Angle between normals, ignoring sign.
pub fn normal_error(a: UnitVec3, b: UnitVec3) -> f64 {
    a.angle_to(b).min(a.angle_to(-b))
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn point(x: f64, y: f64, z: f64) -> Point3 {
    Point3::new(x, y, z)
}
