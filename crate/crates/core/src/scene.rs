//! Synthetic vessel-rim scenes and a point-splatting RGBD renderer.
//!
//! The rim is a torus whose centreline is the ground-truth rim circle. The
//! renderer projects surface samples through a pinhole camera with a
//! z-buffer, snaps each winning splat onto its pixel-centre ray, fills the
//! rest of the image with a background plane at world z = 0, then applies
//! depth noise and box outliers.

use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{PointCloud, PointLabel};
use crate::geometry::{point_on_circle, Circle3, Frame, Point3, UnitVec3, Vec3};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
    #[error("no rim sample projects inside the image")]
    EmptyRender,
    #[error("image i/o error: {0}")]
    Image(#[from] image::ImageError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("image is {found_w}x{found_h}, expected {expected_w}x{expected_h}")]
    DimensionMismatch { expected_w: u32, expected_h: u32, found_w: u32, found_h: u32 },
}

/// Axis-aligned box in world millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min.x <= self.max.x && self.min.y <= self.max.y && self.min.z <= self.max.z
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point3 {
        let mut axis = |lo: f64, hi: f64| if hi > lo { rng.gen_range(lo..hi) } else { lo };
        Point3::new(axis(self.min.x, self.max.x), axis(self.min.y, self.max.y), axis(self.min.z, self.max.z))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    /// Inner radius of the undilated vessel opening (mm).
    pub vessel_inner_radius: f64,
    pub rim_thickness: f64,
    /// Degrees from horizontal, about the world y-axis.
    pub rim_tilt: f64,
    pub rim_center: Point3,
    /// Rim angles of the two externally held points, degrees.
    pub fixed_point_angles: [f64; 2],
    pub rim_color: [u8; 3],
    pub background_color: [u8; 3],
    pub rim_sample_count: usize,
    pub depth_noise_sigma: f64,
    pub outlier_fraction: f64,
    pub outlier_box: Aabb,
    /// Camera override; `None` uses [`CameraModel::default_for`] at the rim centre.
    pub camera: Option<CameraModel>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            vessel_inner_radius: 7.5,
            rim_thickness: 1.5,
            rim_tilt: 0.0,
            rim_center: Point3::new(0.0, 0.0, 20.0),
            fixed_point_angles: [0.0, 120.0],
            rim_color: [230, 200, 40],
            background_color: [60, 60, 70],
            rim_sample_count: 4000,
            depth_noise_sigma: 0.3,
            outlier_fraction: 0.1,
            outlier_box: Aabb { min: Point3::new(-30.0, -30.0, 0.0), max: Point3::new(30.0, 30.0, 40.0) },
            camera: None,
        }
    }
}

impl SceneConfig {
    /// A configuration with depth noise and outliers disabled.
    pub fn noise_free() -> Self {
        Self { depth_noise_sigma: 0.0, outlier_fraction: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: &str| Err(SceneError::InvalidConfig(m.to_string()));
        let half = self.rim_thickness / 2.0;
        if !(half > 0.0 && self.vessel_inner_radius > half && self.vessel_inner_radius.is_finite()) {
            return bad("require vessel_inner_radius > rim_thickness/2 > 0");
        }
        if !self.rim_tilt.is_finite() || !self.rim_center.is_finite() {
            return bad("rim_tilt and rim_center must be finite");
        }
        let [a, b] = self.fixed_point_angles;
        if !a.is_finite() || !b.is_finite() {
            return bad("fixed point angles must be finite");
        }
        let diff = (a - b).rem_euclid(360.0);
        if diff < 1e-9 || 360.0 - diff < 1e-9 {
            return bad("fixed point angles must be distinct modulo 360 degrees");
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad("outlier_fraction must lie in [0, 1)");
        }
        if !(self.depth_noise_sigma >= 0.0 && self.depth_noise_sigma.is_finite()) {
            return bad("depth_noise_sigma must be non-negative");
        }
        if self.rim_sample_count == 0 {
            return bad("rim_sample_count must be positive");
        }
        if !self.outlier_box.is_valid() {
            return bad("outlier_box must have min <= max on every axis");
        }
        if let Some(cam) = &self.camera {
            cam.validate()?;
        }
        Ok(())
    }

    /// Torus centreline radius: inner radius plus half the rim thickness.
    pub fn rim_major_radius(&self) -> f64 {
        self.vessel_inner_radius + self.rim_thickness / 2.0
    }

    pub fn rim_normal(&self) -> UnitVec3 {
        UnitVec3::Z.rotated(UnitVec3::Y, self.rim_tilt.to_radians())
    }

    pub fn camera(&self) -> CameraModel {
        self.camera.clone().unwrap_or_else(|| CameraModel::default_for(self.rim_center))
    }
}

/// Pinhole camera. The pose maps camera coordinates (x right, y down, z
/// forward) to world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub pose: Frame,
}

impl CameraModel {
    pub const DEFAULT_HEIGHT_MM: f64 = 500.0;
    pub const DEFAULT_INCLINE_DEG: f64 = 50.0;

    /// 480x300 camera 0.5 m above `target`, optical axis inclined 50 degrees
    /// from vertical, looking at `target` from the +x side.
    pub fn default_for(target: Point3) -> Self {
        let incline = Self::DEFAULT_INCLINE_DEG.to_radians();
        let h = Self::DEFAULT_HEIGHT_MM;
        let position = target + Vec3::new(h * incline.tan(), 0.0, h);
        Self::looking_at(position, target, 5200.0, 480, 300)
    }

    pub fn looking_at(position: Point3, target: Point3, focal: f64, width: u32, height: u32) -> Self {
        let z = UnitVec3::new(target - position).expect("camera position equals target");
        let x = z
            .cross(UnitVec3::Z.get())
            .normalize()
            .or_else(|| z.cross(UnitVec3::X.get()).normalize())
            .expect("non-zero fallback axis");
        Self {
            fx: focal,
            fy: focal,
            cx: f64::from(width) / 2.0,
            cy: f64::from(height) / 2.0,
            width,
            height,
            pose: Frame::from_xz(position, x, z),
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: &str| Err(SceneError::InvalidCamera(m.to_string()));
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad("focal lengths must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("resolution must be non-zero");
        }
        if !(self.cx >= 0.0 && self.cx < f64::from(self.width) && self.cy >= 0.0 && self.cy < f64::from(self.height)) {
            return bad("principal point must lie inside the image");
        }
        if self.pose.orthonormality_error() > 1e-9 || (self.pose.determinant() - 1.0).abs() > 1e-9 {
            return bad("pose basis must be right-handed orthonormal");
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Sub-pixel image coordinates and camera depth of a world point, or
    /// `None` when it lies behind the camera.
    pub fn project(&self, p: Point3) -> Option<(f64, f64, f64)> {
        let pc = self.pose.inverse_transform_point(p);
        if pc.z <= 0.0 {
            return None;
        }
        Some((self.fx * pc.x / pc.z + self.cx, self.fy * pc.y / pc.z + self.cy, pc.z))
    }

    /// Nearest pixel to a world point, if it projects inside the image.
    pub fn project_to_pixel(&self, p: Point3) -> Option<(u32, u32, f64)> {
        let (u, v, d) = self.project(p)?;
        let (ui, vi) = (u.round(), v.round());
        if ui < 0.0 || vi < 0.0 || ui >= f64::from(self.width) || vi >= f64::from(self.height) {
            return None;
        }
        Some((ui as u32, vi as u32, d))
    }

    /// Camera-frame point with unit z on the ray through pixel centre `(u, v)`.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// World point seen at pixel `(u, v)` with camera depth `depth`.
    pub fn deproject_pixel(&self, u: f64, v: f64, depth: f64) -> Point3 {
        self.pose.transform_point(self.pixel_ray(u, v) * depth)
    }
}

/// Torus around a centreline circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Torus {
    pub centerline: Circle3,
    pub minor_radius: f64,
}

impl Torus {
    /// Signed distance to the surface (negative inside the tube).
    pub fn signed_distance(&self, p: Point3) -> f64 {
        let c = &self.centerline;
        let d = p - c.center;
        let h = c.normal.dot(d);
        let rho = (d - c.normal * h).norm();
        (rho - c.radius).hypot(h) - self.minor_radius
    }

    /// Point at torus angles `(theta, phi)`: `theta` around the centreline,
    /// `phi` around the tube.
    pub fn point(&self, theta: f64, phi: f64) -> Point3 {
        let c = &self.centerline;
        let (u, v) = c.plane_axes();
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let radial = u * ct + v * st;
        c.center + radial * (c.radius + self.minor_radius * cp) + c.normal * (self.minor_radius * sp)
    }

    /// Newton root of the quartic implicit form along `origin + t dir`,
    /// started at `t0`. Returns `t` when it converges onto the surface.
    pub fn intersect_ray_near(&self, origin: Point3, dir: Vec3, t0: f64) -> Option<f64> {
        let c = &self.centerline;
        let (u, v) = c.plane_axes();
        let n = c.normal;
        let o = origin - c.center;
        let q0 = Vec3::new(u.dot(o), v.dot(o), n.dot(o));
        let qd = Vec3::new(u.dot(dir), v.dot(dir), n.dot(dir));
        let big = c.radius * c.radius;
        let k = big - self.minor_radius * self.minor_radius;
        let mut t = t0;
        for _ in 0..64 {
            let q = q0 + qd * t;
            let s = q.norm_squared() + k;
            let f = s * s - 4.0 * big * (q.x * q.x + q.y * q.y);
            let df = 4.0 * s * q.dot(qd) - 8.0 * big * (q.x * qd.x + q.y * qd.y);
            if df == 0.0 || !df.is_finite() {
                return None;
            }
            let step = f / df;
            t -= step;
            if step.abs() < 1e-13 * t.abs().max(1.0) {
                break;
            }
        }
        let p = origin + dir * t;
        (self.signed_distance(p).abs() < 1e-9).then_some(t)
    }
}

/// What the simulator knows and the robot must estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub rim_circle: Circle3,
    pub fixed_points: [Point3; 2],
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub truth: GroundTruth,
    pub torus: Torus,
    pub samples: Vec<Point3>,
}

/// Ground-truth rim and uniformly drawn torus angle pairs.
pub fn build_scene<R: Rng + ?Sized>(cfg: &SceneConfig, rng: &mut R) -> Result<Scene, SceneError> {
    cfg.validate()?;
    let rim_circle = Circle3::new(cfg.rim_center, cfg.rim_normal(), cfg.rim_major_radius())
        .map_err(|e| SceneError::InvalidConfig(e.to_string()))?;
    let fixed_points = cfg.fixed_point_angles.map(|a| point_on_circle(&rim_circle, a.to_radians()));
    let torus = Torus { centerline: rim_circle, minor_radius: cfg.rim_thickness / 2.0 };
    let tau = std::f64::consts::TAU;
    let samples = (0..cfg.rim_sample_count)
        .map(|_| {
            let theta = rng.gen_range(0.0..tau);
            let phi = rng.gen_range(0.0..tau);
            torus.point(theta, phi)
        })
        .collect();
    Ok(Scene { truth: GroundTruth { rim_circle, fixed_points }, torus, samples })
}

/// Colour plus depth (mm along the optical axis, 0 = no return), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbdImage {
    pub width: u32,
    pub height: u32,
    pub color: Vec<[u8; 3]>,
    pub depth: Vec<f64>,
}

impl RgbdImage {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self { width, height, color: vec![[0; 3]; n], depth: vec![0.0; n] }
    }

    pub fn index(&self, u: u32, v: u32) -> usize {
        v as usize * self.width as usize + u as usize
    }

    pub fn save_color_png(&self, path: &Path) -> Result<(), SceneError> {
        let buf: Vec<u8> = self.color.iter().flatten().copied().collect();
        let img = image::RgbImage::from_raw(self.width, self.height, buf).expect("buffer sized to image");
        img.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    /// Depth as 16-bit grayscale in 0.1 mm units (saturating).
    pub fn save_depth_png(&self, path: &Path) -> Result<(), SceneError> {
        let buf: Vec<u16> = self.depth.iter().map(|&d| depth_to_u16(d)).collect();
        let img: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
            image::ImageBuffer::from_raw(self.width, self.height, buf).expect("buffer sized to image");
        img.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    /// Loads colour and 0.1 mm depth PNGs into one image.
    pub fn load_png(color: Option<&Path>, depth: &Path) -> Result<Self, SceneError> {
        let d = image::open(depth)?.into_luma16();
        let mut img = RgbdImage::new(d.width(), d.height());
        img.depth = d.pixels().map(|p| f64::from(p.0[0]) / 10.0).collect();
        if let Some(path) = color {
            let c = image::open(path)?.into_rgb8();
            if c.dimensions() != (img.width, img.height) {
                return Err(SceneError::DimensionMismatch {
                    expected_w: img.width,
                    expected_h: img.height,
                    found_w: c.width(),
                    found_h: c.height(),
                });
            }
            img.color = c.pixels().map(|p| p.0).collect();
        }
        Ok(img)
    }
}

fn depth_to_u16(d: f64) -> u16 {
    (d * 10.0).round().clamp(0.0, f64::from(u16::MAX)) as u16
}

/// Per-pixel provenance of a rendered image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelLabel {
    Rim,
    Outlier,
    Background,
    Empty,
}

impl PixelLabel {
    pub fn point_label(self) -> Option<PointLabel> {
        match self {
            PixelLabel::Rim => Some(PointLabel::Rim),
            PixelLabel::Outlier => Some(PointLabel::Outlier),
            PixelLabel::Background => Some(PointLabel::Background),
            PixelLabel::Empty => None,
        }
    }

    /// Rim-coloured pixels, outliers included.
    pub fn is_rim_colored(self) -> bool {
        matches!(self, PixelLabel::Rim | PixelLabel::Outlier)
    }
}

#[derive(Debug, Clone)]
pub struct Render {
    pub image: RgbdImage,
    pub labels: Vec<PixelLabel>,
}

impl Render {
    pub fn rim_pixel_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_rim_colored()).count()
    }

    /// Deprojects every pixel with a return, labeled by provenance.
    pub fn labeled_cloud(&self, cam: &CameraModel) -> PointCloud {
        let mut cloud = PointCloud::new();
        for v in 0..self.image.height {
            for u in 0..self.image.width {
                let i = self.image.index(u, v);
                let d = self.image.depth[i];
                if let (Some(label), true) = (self.labels[i].point_label(), d > 0.0) {
                    cloud.push(cam.deproject_pixel(f64::from(u), f64::from(v), d), label);
                }
            }
        }
        cloud
    }
}

/// Renders rim samples through `cam`.
pub fn render_splat<R: Rng + ?Sized>(
    cfg: &SceneConfig,
    scene: &Scene,
    cam: &CameraModel,
    rng: &mut R,
) -> Result<Render, SceneError> {
    cam.validate()?;
    let mut image = RgbdImage::new(cam.width, cam.height);
    let n = cam.pixel_count();
    let mut labels = vec![PixelLabel::Empty; n];

    let mut zbuf: Vec<Option<(f64, usize)>> = vec![None; n];
    let mut projected = 0usize;
    for (k, &p) in scene.samples.iter().enumerate() {
        if let Some((u, v, d)) = cam.project_to_pixel(p) {
            projected += 1;
            let slot = &mut zbuf[image.index(u, v)];
            if slot.is_none_or(|(best, _)| d < best) {
                *slot = Some((d, k));
            }
        }
    }
    if projected == 0 {
        return Err(SceneError::EmptyRender);
    }

    let origin = cam.pose.origin;
    for v in 0..cam.height {
        for u in 0..cam.width {
            let i = image.index(u, v);
            let dir = cam.pose.transform_vector(cam.pixel_ray(f64::from(u), f64::from(v)));
            let rim_depth = zbuf[i].and_then(|(d0, _)| {
                scene
                    .torus
                    .intersect_ray_near(origin, dir, d0)
                    .filter(|t| *t > 0.0 && (t - d0).abs() < 1.0)
            });
            if let Some(d) = rim_depth {
                image.depth[i] = d;
                image.color[i] = cfg.rim_color;
                labels[i] = PixelLabel::Rim;
            } else {
                image.color[i] = cfg.background_color;
                // Background plane z = 0.
                if dir.z < 0.0 {
                    let t = -origin.z / dir.z;
                    if t > 0.0 {
                        image.depth[i] = t;
                        labels[i] = PixelLabel::Background;
                    }
                }
            }
        }
    }

    if cfg.depth_noise_sigma > 0.0 {
        let noise = Normal::new(0.0, cfg.depth_noise_sigma).expect("validated sigma");
        for d in image.depth.iter_mut().filter(|d| **d > 0.0) {
            *d = (*d + noise.sample(rng)).max(f64::MIN_POSITIVE);
        }
    }

    if cfg.outlier_fraction > 0.0 {
        let rim: Vec<usize> = (0..n).filter(|&i| labels[i] == PixelLabel::Rim).collect();
        let count = (cfg.outlier_fraction * rim.len() as f64).round() as usize;
        for pick in sample_indices(rng, rim.len(), count.min(rim.len())).into_vec() {
            let i = rim[pick];
            let target = cfg.outlier_box.sample(rng);
            let depth = cam.pose.inverse_transform_point(target).z;
            if depth > 0.0 {
                image.depth[i] = depth;
            }
            labels[i] = PixelLabel::Outlier;
        }
    }

    Ok(Render { image, labels })
}
