//! RANSAC estimation of the rim circle from a noisy point cloud, with
//! optional Gauss-Newton refinement over the winning inliers.

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::PointCloud;
use crate::geometry::{circle_from_three_points, point_to_circle_distance, Circle3, Point3, UnitVec3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FitError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("every sampled triple was collinear")]
    NoValidCandidate,
    #[error("invalid RANSAC parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacParams {
    pub iterations: u32,
    /// Max point-to-circle distance (mm) for a point to count as an inlier.
    pub inlier_radius: f64,
    pub seed: u64,
    pub refine: bool,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self { iterations: 1000, inlier_radius: 1.0, seed: 0, refine: false }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<(), FitError> {
        if self.iterations == 0 {
            return Err(FitError::InvalidParams("iterations must be >= 1"));
        }
        if !(self.inlier_radius > 0.0 && self.inlier_radius.is_finite()) {
            return Err(FitError::InvalidParams("inlier_radius must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub circle: Circle3,
    /// The winning 3-point circle; equals `circle` unless refinement ran.
    pub sample_circle: Circle3,
    /// Indices of inliers of `sample_circle`.
    pub inliers: Vec<usize>,
    pub inlier_count: usize,
    pub inlier_ratio: f64,
}

/// JSON form of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub center_mm: [f64; 3],
    pub normal: [f64; 3],
    pub radius_mm: f64,
    pub inlier_count: usize,
    pub inlier_ratio: f64,
}

impl From<&FitResult> for FitRecord {
    fn from(f: &FitResult) -> Self {
        Self {
            center_mm: f.circle.center.to_array(),
            normal: f.circle.normal.get().to_array(),
            radius_mm: f.circle.radius,
            inlier_count: f.inlier_count,
            inlier_ratio: f.inlier_ratio,
        }
    }
}

fn count_inliers(points: &[Point3], c: &Circle3, radius: f64) -> usize {
    points.iter().filter(|p| point_to_circle_distance(**p, c) <= radius).count()
}

/// Runs exactly `params.iterations` rounds of 3-point sampling and keeps the
/// earliest candidate with the most inliers.
pub fn ransac_circle(cloud: &PointCloud, params: &RansacParams) -> Result<FitResult, FitError> {
    params.validate()?;
    let points = &cloud.points;
    let n = points.len();
    if n < 3 {
        return Err(FitError::TooFewPoints(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(usize, Circle3)> = None;
    for _ in 0..params.iterations {
        let idx = sample_indices(&mut rng, n, 3);
        let Ok(candidate) = circle_from_three_points(points[idx.index(0)], points[idx.index(1)], points[idx.index(2)])
        else {
            continue;
        };
        let count = count_inliers(points, &candidate, params.inlier_radius);
        if best.is_none_or(|(c, _)| count > c) {
            best = Some((count, candidate));
        }
    }
    let (count, winner) = best.ok_or(FitError::NoValidCandidate)?;
    let inliers: Vec<usize> =
        (0..n).filter(|&i| point_to_circle_distance(points[i], &winner) <= params.inlier_radius).collect();
    debug_assert_eq!(inliers.len(), count);

    let circle = if params.refine {
        let support: Vec<Point3> = inliers.iter().map(|&i| points[i]).collect();
        refine_circle(&support, winner, 20, 1e-9)
    } else {
        winner
    };
    Ok(FitResult { circle, sample_circle: winner, inlier_count: count, inlier_ratio: count as f64 / n as f64, inliers })
}

/// Sum of squared point-to-circle distances.
pub fn circle_cost(points: &[Point3], c: &Circle3) -> f64 {
    points.iter().map(|p| point_to_circle_distance(*p, c).powi(2)).sum()
}

/// Gauss-Newton least squares of `sum point_to_circle_distance^2`.
///
/// Parameters are the centre, a two-dimensional tangent perturbation of the
/// normal and the radius. A step is accepted only if it lowers the cost
/// (halving up to 30 times); iteration stops after `max_steps` or once the
/// step norm drops below `step_tol`.
pub fn refine_circle(points: &[Point3], start: Circle3, max_steps: usize, step_tol: f64) -> Circle3 {
    if points.len() < 3 {
        return start;
    }
    let mut cur = start;
    let mut cost = circle_cost(points, &cur);
    for _ in 0..max_steps {
        let (t1, t2) = cur.plane_axes();
        let mut jtj = [[0.0; 6]; 6];
        let mut jtr = [0.0; 6];
        for &p in points {
            for (res, row) in residual_rows(p, &cur, t1, t2) {
                for i in 0..6 {
                    jtr[i] += row[i] * res;
                    for j in 0..6 {
                        jtj[i][j] += row[i] * row[j];
                    }
                }
            }
        }
        let Some(delta) = solve6(jtj, jtr.map(|v| -v)) else { break };
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand = apply_step(&cur, t1, t2, &delta, scale);
            if let Some(c) = cand {
                let cc = circle_cost(points, &c);
                if cc < cost {
                    accepted = Some((c, cc));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((next, next_cost)) = accepted else { break };
        cur = next;
        cost = next_cost;
        let step_norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt() * scale;
        if step_norm < step_tol {
            break;
        }
    }
    Circle3 { normal: cur.normal.canonical(), ..cur }
}

/// Residual pair `(rho - r, h)` whose squared norm is the squared
/// point-to-circle distance, with Jacobian rows over
/// `(centre, normal tangent t1, normal tangent t2, radius)`.
fn residual_rows(p: Point3, c: &Circle3, t1: UnitVec3, t2: UnitVec3) -> [(f64, [f64; 6]); 2] {
    let d = p - c.center;
    let n = c.normal;
    let h = n.dot(d);
    let w = d - n * h;
    let rho = w.norm();
    if rho < 1e-12 {
        return [(rho - c.radius, [0.0; 6]), (h, [0.0; 6])];
    }
    let (a1, a2) = (t1.dot(d), t2.dot(d));
    let dc = w * (-1.0 / rho);
    let radial = [dc.x, dc.y, dc.z, -h * a1 / rho, -h * a2 / rho, -1.0];
    let nv = n.get();
    let height = [-nv.x, -nv.y, -nv.z, a1, a2, 0.0];
    [(rho - c.radius, radial), (h, height)]
}

fn apply_step(c: &Circle3, t1: UnitVec3, t2: UnitVec3, delta: &[f64; 6], scale: f64) -> Option<Circle3> {
    let s = |i: usize| delta[i] * scale;
    let center = c.center + Vec3::new(s(0), s(1), s(2));
    let normal = (c.normal.get() + t1 * s(3) + t2 * s(4)).normalize()?;
    Circle3::new(center, normal, c.radius + s(5)).ok()
}

/// Gaussian elimination with partial pivoting.
fn solve6(mut a: [[f64; 6]; 6], mut b: [f64; 6]) -> Option<[f64; 6]> {
    for col in 0..6 {
        let pivot = (col..6).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let top = a[col];
        for row in col + 1..6 {
            let f = a[row][col] / top[col];
            for (x, t) in a[row][col..].iter_mut().zip(&top[col..]) {
                *x -= f * t;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 6];
    for row in (0..6).rev() {
        let tail: f64 = (row + 1..6).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
