//! Millimetre-scale 3-D primitives: vectors, frames, circles and triangles.
//!
//! Everything here is a plain value type; lengths are in millimetres and
//! angles in radians.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance on `|a x b| / (|a| |b|)` below which three points are collinear.
pub const COLLINEAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("points are collinear, no circle passes through them")]
    Collinear,
    #[error("grasp point coincides with the circle centre")]
    DegenerateGrasp,
    #[error("triangle vertices are collinear")]
    DegenerateTriangle,
    #[error("circle radius must be positive and finite")]
    InvalidRadius,
    #[error("vector has zero length")]
    ZeroVector,
}

/// A vector or point in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Positions share the vector representation.
pub type Point3 = Vec3;

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn normalize(self) -> Option<UnitVec3> {
        UnitVec3::new(self)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A direction with unit Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec3", into = "Vec3")]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub const X: UnitVec3 = UnitVec3(Vec3::new(1.0, 0.0, 0.0));
    pub const Y: UnitVec3 = UnitVec3(Vec3::new(0.0, 1.0, 0.0));
    pub const Z: UnitVec3 = UnitVec3(Vec3::new(0.0, 0.0, 1.0));

    /// Normalizes `v`; `None` for zero or non-finite input.
    pub fn new(v: Vec3) -> Option<Self> {
        let n = v.norm();
        if n > 0.0 && n.is_finite() {
            Some(Self(v / n))
        } else {
            None
        }
    }

    pub fn get(self) -> Vec3 {
        self.0
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.0.dot(o)
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        self.0.cross(o)
    }

    /// Angle to another direction in radians, robust near 0 and pi.
    pub fn angle_to(self, o: UnitVec3) -> f64 {
        let c = self.0.cross(o.0).norm();
        let d = self.0.dot(o.0);
        c.atan2(d)
    }

    /// Rotates the direction by `angle` about `axis` (right-hand rule).
    pub fn rotated(self, axis: UnitVec3, angle: f64) -> UnitVec3 {
        Self(rotate_about(self.0, axis, angle))
    }

    /// Flips the sign so that z >= 0; ties fall back to y, then x.
    pub fn canonical(self) -> UnitVec3 {
        const TIE: f64 = 1e-12;
        let v = self.0;
        let flip = if v.z.abs() > TIE {
            v.z < 0.0
        } else if v.y.abs() > TIE {
            v.y < 0.0
        } else {
            v.x < 0.0
        };
        if flip {
            -self
        } else {
            self
        }
    }
}

impl Neg for UnitVec3 {
    type Output = UnitVec3;
    fn neg(self) -> UnitVec3 {
        UnitVec3(-self.0)
    }
}

impl Mul<f64> for UnitVec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        self.0 * s
    }
}

impl From<UnitVec3> for Vec3 {
    fn from(u: UnitVec3) -> Vec3 {
        u.0
    }
}

impl TryFrom<Vec3> for UnitVec3 {
    type Error = GeometryError;
    fn try_from(v: Vec3) -> Result<Self, Self::Error> {
        UnitVec3::new(v).ok_or(GeometryError::ZeroVector)
    }
}

/// Rodrigues rotation of `v` about a unit axis.
pub fn rotate_about(v: Vec3, axis: UnitVec3, angle: f64) -> Vec3 {
    let k = axis.get();
    let (s, c) = angle.sin_cos();
    v * c + k.cross(v) * s + k * (k.dot(v) * (1.0 - c))
}

/// A right-handed orthonormal frame placed at `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub origin: Point3,
    pub x: UnitVec3,
    pub y: UnitVec3,
    pub z: UnitVec3,
}

impl Frame {
    pub fn identity() -> Self {
        Self::from_xz(Vec3::ZERO, UnitVec3::X, UnitVec3::Z)
    }

    /// Builds a frame from a z-axis and an x-axis assumed orthogonal to it; y = z x x.
    pub fn from_xz(origin: Point3, x: UnitVec3, z: UnitVec3) -> Self {
        let y = UnitVec3(z.cross(x.get()));
        Self { origin, x, y, z }
    }

    /// Columns are the x, y and z axes.
    pub fn basis(&self) -> [[f64; 3]; 3] {
        let (x, y, z) = (self.x.get(), self.y.get(), self.z.get());
        [[x.x, y.x, z.x], [x.y, y.y, z.y], [x.z, y.z, z.z]]
    }

    pub fn determinant(&self) -> f64 {
        self.x.get().dot(self.y.get().cross(self.z.get()))
    }

    /// Largest deviation of `B^T B` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let axes = [self.x.get(), self.y.get(), self.z.get()];
        let mut worst: f64 = 0.0;
        for (i, a) in axes.iter().enumerate() {
            for (j, b) in axes.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.dot(*b) - expect).abs());
            }
        }
        worst
    }

    /// Maps a point from frame coordinates to the parent frame.
    pub fn transform_point(&self, local: Vec3) -> Point3 {
        self.origin + self.transform_vector(local)
    }

    pub fn transform_vector(&self, local: Vec3) -> Vec3 {
        self.x * local.x + self.y * local.y + self.z * local.z
    }

    /// Maps a parent-frame point into frame coordinates.
    pub fn inverse_transform_point(&self, world: Point3) -> Vec3 {
        let d = world - self.origin;
        Vec3::new(self.x.dot(d), self.y.dot(d), self.z.dot(d))
    }

    /// Rotates all axes by `angle` about `axis`, keeping the origin.
    pub fn rotated(&self, axis: UnitVec3, angle: f64) -> Frame {
        Frame {
            origin: self.origin,
            x: self.x.rotated(axis, angle),
            y: self.y.rotated(axis, angle),
            z: self.z.rotated(axis, angle),
        }
    }

    pub fn with_origin(&self, origin: Point3) -> Frame {
        Frame { origin, ..*self }
    }
}

/// A circle in 3-D: centre, plane normal and radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle3 {
    pub center: Point3,
    pub normal: UnitVec3,
    pub radius: f64,
}

impl Circle3 {
    pub fn new(center: Point3, normal: UnitVec3, radius: f64) -> Result<Self, GeometryError> {
        if radius > 0.0 && radius.is_finite() && center.is_finite() {
            Ok(Self { center, normal, radius })
        } else {
            Err(GeometryError::InvalidRadius)
        }
    }

    /// In-plane reference axes `(u, v)` used to parameterize the curve.
    ///
    /// `u` is the world x-axis projected into the plane (world y when that
    /// projection is shorter than 1e-6) and `v = n x u`.
    pub fn plane_axes(&self) -> (UnitVec3, UnitVec3) {
        let n = self.normal;
        let project = |a: Vec3| a - n * n.dot(a);
        let px = project(UnitVec3::X.get());
        let u = if px.norm() < 1e-6 {
            UnitVec3(project(UnitVec3::Y.get()) / project(UnitVec3::Y.get()).norm())
        } else {
            UnitVec3(px / px.norm())
        };
        let v = UnitVec3(n.cross(u.get()));
        (u, v)
    }

    /// Curve angle of the in-plane projection of `p`, in `[0, 2pi)`.
    ///
    /// `None` when `p` lies on the circle axis.
    pub fn angle_of(&self, p: Point3) -> Option<f64> {
        let (u, v) = self.plane_axes();
        let d = p - self.center;
        let (a, b) = (u.dot(d), v.dot(d));
        if a.hypot(b) < 1e-12 {
            return None;
        }
        Some(b.atan2(a).rem_euclid(std::f64::consts::TAU))
    }

    /// Nearest point of the circle curve to `p`; `None` on the axis.
    pub fn closest_point(&self, p: Point3) -> Option<Point3> {
        self.angle_of(p).map(|a| point_on_circle(self, a))
    }

    /// The same circle with a different radius.
    pub fn with_radius(&self, radius: f64) -> Result<Circle3, GeometryError> {
        Circle3::new(self.center, self.normal, radius)
    }
}

/// A non-degenerate triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triangle3 {
    pub a: Point3,
    pub b: Point3,
    pub c: Point3,
}

impl Triangle3 {
    pub const MIN_AREA: f64 = 1e-9;

    pub fn new(a: Point3, b: Point3, c: Point3) -> Result<Self, GeometryError> {
        let t = Self { a, b, c };
        if t.area() > Self::MIN_AREA {
            Ok(t)
        } else {
            Err(GeometryError::DegenerateTriangle)
        }
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.b - self.a).cross(self.c - self.a).norm()
    }

    pub fn side_lengths(&self) -> [f64; 3] {
        [self.b.distance(self.c), self.c.distance(self.a), self.a.distance(self.b)]
    }

    pub fn perimeter(&self) -> f64 {
        self.side_lengths().iter().sum()
    }

    pub fn centroid(&self) -> Point3 {
        (self.a + self.b + self.c) / 3.0
    }
}

/// Circumcircle of three points.
///
/// The normal is canonicalized so z >= 0 (ties broken by y, then x).
pub fn circle_from_three_points(p1: Point3, p2: Point3, p3: Point3) -> Result<Circle3, GeometryError> {
    let a = p1 - p3;
    let b = p2 - p3;
    let axb = a.cross(b);
    let cross_norm = axb.norm();
    let scale = a.norm() * b.norm();
    if scale == 0.0 || cross_norm <= COLLINEAR_TOL * scale || !cross_norm.is_finite() {
        return Err(GeometryError::Collinear);
    }
    let denom = 2.0 * axb.norm_squared();
    let offset = (b * a.norm_squared() - a * b.norm_squared()).cross(axb) / denom;
    let center = p3 + offset;
    let normal = UnitVec3(axb / cross_norm).canonical();
    Circle3::new(center, normal, offset.norm())
}

/// Euclidean distance from `p` to the nearest point of the circle curve.
pub fn point_to_circle_distance(p: Point3, c: &Circle3) -> f64 {
    let d = p - c.center;
    let h = c.normal.dot(d);
    let in_plane = (d - c.normal * h).norm();
    ((in_plane - c.radius).powi(2) + h * h).sqrt()
}

/// `c_p + r (cos(angle) u + sin(angle) v)` with the axes from [`Circle3::plane_axes`].
pub fn point_on_circle(c: &Circle3, angle: f64) -> Point3 {
    let (u, v) = c.plane_axes();
    let (s, co) = angle.sin_cos();
    c.center + (u * co + v * s) * c.radius
}

/// Frame at `origin` with z along the circle normal and x pointing radially
/// outward (the in-plane part of `origin - c_p`).
pub fn radial_frame(origin: Point3, c: &Circle3) -> Result<Frame, GeometryError> {
    let d = origin - c.center;
    let radial = d - c.normal * c.normal.dot(d);
    if radial.norm() < 1e-9 {
        return Err(GeometryError::DegenerateGrasp);
    }
    let x = UnitVec3(radial / radial.norm());
    Ok(Frame::from_xz(origin, x, c.normal))
}

/// End-effector frame for grasping the rim at `g`: z = c_n, x = (g - c_p)/|g - c_p|, y = z x x.
pub fn grasp_frame(g: Point3, c: &Circle3) -> Result<Frame, GeometryError> {
    if (g - c.center).norm() < 1e-9 {
        return Err(GeometryError::DegenerateGrasp);
    }
    radial_frame(g, c)
}

/// Incircle radius `Area / s` with `s` the semi-perimeter.
pub fn triangle_incircle_radius(t: &Triangle3) -> f64 {
    t.area() / (0.5 * t.perimeter())
}
