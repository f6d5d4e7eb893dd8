//! Gripper trajectories for grasping, dilating and inserting, computed from
//! the estimated rim circle.
//!
//! A waypoint's `speed_fraction` is the fraction of the arm's maximum speed
//! used for the motion that ends at that waypoint.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    grasp_frame, point_to_circle_distance, radial_frame, Circle3, Frame, GeometryError, Point3, UnitVec3,
};

/// Height of the pre-grasp hover above the rim along the circle normal (mm).
pub const HOVER_OFFSET_MM: f64 = 5.0;
/// Outward pull as a fraction of the fitted diameter.
pub const DILATION_DIAMETER_FRACTION: f64 = 2.0 / 3.0;
/// Speed limit during the dilation pull.
pub const DILATION_SPEED_FRACTION: f64 = 0.25;
/// Allowed distance between a fixed point and the estimated circle (mm).
pub const FIXED_POINT_SLACK_MM: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PlanError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("fixed points project to the same rim angle")]
    AmbiguousGrasp,
    #[error("fixed point is {0:.3} mm from the estimated circle")]
    FixedPointOffCircle(f64),
    #[error("invalid insertion parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gripper {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    DilatingArm,
    InsertingArm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub pose: Frame,
    pub gripper: Gripper,
    pub speed_fraction: f64,
}

impl Waypoint {
    pub fn new(pose: Frame, gripper: Gripper, speed_fraction: f64) -> Self {
        debug_assert!(speed_fraction > 0.0 && speed_fraction <= 1.0);
        Self { pose, gripper, speed_fraction }
    }

    pub fn position(&self) -> Point3 {
        self.pose.origin
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub actor: Actor,
    pub waypoints: Vec<Waypoint>,
}

/// Flat JSON form of one waypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointRecord {
    pub actor: Actor,
    pub position_mm: [f64; 3],
    /// Row-major rotation matrix; columns are the frame axes.
    pub basis: [[f64; 3]; 3],
    pub gripper: Gripper,
    pub speed_fraction: f64,
}

impl Trajectory {
    pub fn first(&self) -> &Waypoint {
        &self.waypoints[0]
    }

    pub fn last(&self) -> &Waypoint {
        self.waypoints.last().expect("trajectories are non-empty")
    }

    pub fn records(&self) -> Vec<WaypointRecord> {
        self.waypoints
            .iter()
            .map(|w| WaypointRecord {
                actor: self.actor,
                position_mm: w.pose.origin.to_array(),
                basis: w.pose.basis(),
                gripper: w.gripper,
                speed_fraction: w.speed_fraction,
            })
            .collect()
    }
}

/// Point on `c` equidistant from `f1` and `f2`, on the major arc.
///
/// The perpendicular bisector plane of `f1 f2` cuts the circle in two
/// points; the one farther from `f1` wins, and an exact tie goes to the
/// smaller circle angle.
pub fn plan_grasp_point(c: &Circle3, f1: Point3, f2: Point3) -> Result<Point3, PlanError> {
    for f in [f1, f2] {
        let d = point_to_circle_distance(f, c);
        if d > FIXED_POINT_SLACK_MM {
            return Err(PlanError::FixedPointOffCircle(d));
        }
    }
    let (Some(a1), Some(a2)) = (c.angle_of(f1), c.angle_of(f2)) else {
        return Err(PlanError::AmbiguousGrasp);
    };
    let sep = (a1 - a2).rem_euclid(std::f64::consts::TAU);
    if sep.min(std::f64::consts::TAU - sep) < 1e-6 {
        return Err(PlanError::AmbiguousGrasp);
    }

    // (x - m).e = 0 with x = c_p + r (cos t u + sin t v)  =>  A cos t + B sin t = -C.
    let (u, v) = c.plane_axes();
    let e = f2 - f1;
    let m = (f1 + f2) * 0.5;
    let a = c.radius * u.dot(e);
    let b = c.radius * v.dot(e);
    let k = (c.center - m).dot(e);
    let amp = a.hypot(b);
    if amp < 1e-12 {
        return Err(PlanError::AmbiguousGrasp);
    }
    let phase = b.atan2(a);
    let spread = (-k / amp).clamp(-1.0, 1.0).acos();
    let tau = std::f64::consts::TAU;
    let mut sols = [(phase + spread).rem_euclid(tau), (phase - spread).rem_euclid(tau)];
    sols.sort_by(f64::total_cmp);
    let pts = sols.map(|t| crate::geometry::point_on_circle(c, t));
    let (d0, d1) = (pts[0].distance(f1), pts[1].distance(f1));
    Ok(if d1 > d0 + 1e-9 { pts[1] } else { pts[0] })
}

/// Hover `HOVER_OFFSET_MM` above `g` along the normal, descend, close.
pub fn plan_approach(g: Point3, c: &Circle3) -> Result<Trajectory, PlanError> {
    let frame = grasp_frame(g, c)?;
    let hover = frame.with_origin(g + c.normal * HOVER_OFFSET_MM);
    Ok(Trajectory {
        actor: Actor::DilatingArm,
        waypoints: vec![
            Waypoint::new(hover, Gripper::Open, 1.0),
            Waypoint::new(frame, Gripper::Open, 1.0),
            Waypoint::new(frame, Gripper::Closed, 1.0),
        ],
    })
}

/// `g` moved radially outward by two thirds of the fitted diameter.
pub fn dilation_target(g: Point3, c: &Circle3) -> Result<Point3, PlanError> {
    let frame = grasp_frame(g, c)?;
    Ok(g + frame.x * (DILATION_DIAMETER_FRACTION * 2.0 * c.radius))
}

/// Single slow pull from `g` to [`dilation_target`] with the gripper closed.
pub fn plan_dilation(g: Point3, c: &Circle3) -> Result<Trajectory, PlanError> {
    let frame = grasp_frame(g, c)?;
    let target = dilation_target(g, c)?;
    Ok(Trajectory {
        actor: Actor::DilatingArm,
        waypoints: vec![Waypoint::new(frame.with_origin(target), Gripper::Closed, DILATION_SPEED_FRACTION)],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InsertionParams {
    /// Tilt of the shunt axis from the rim normal while entering, degrees.
    pub chamfer_tilt_angle: f64,
    /// Clearance between shunt wall and rim at the staging point, mm.
    pub staging_offset: f64,
    pub descend_depth: f64,
    /// Counter-clockwise about the rim normal, degrees.
    pub screw_rotation: f64,
    pub screw_descent: f64,
    /// Dilating-arm tension release: lift along the normal, mm.
    pub release_lift: f64,
    /// Dilating-arm tension release: move toward the opening centroid, mm.
    pub release_inward: f64,
    /// Retreat along the normal after opening the gripper, mm.
    pub retract_distance: f64,
    pub use_screw: bool,
    pub use_dilation: bool,
}

impl Default for InsertionParams {
    fn default() -> Self {
        Self {
            chamfer_tilt_angle: 30.0,
            staging_offset: 10.0,
            descend_depth: 5.0,
            screw_rotation: 90.0,
            screw_descent: 5.0,
            release_lift: 3.0,
            release_inward: 3.0,
            retract_distance: 10.0,
            use_screw: true,
            use_dilation: true,
        }
    }
}

impl InsertionParams {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.chamfer_tilt_angle > 0.0 && self.chamfer_tilt_angle < 90.0) {
            return Err(PlanError::InvalidParams("chamfer tilt must lie in (0, 90) degrees"));
        }
        if !(self.screw_rotation > 0.0 && self.screw_rotation <= 360.0) {
            return Err(PlanError::InvalidParams("screw rotation must lie in (0, 360] degrees"));
        }
        let lengths = [
            self.staging_offset,
            self.descend_depth,
            self.screw_descent,
            self.release_lift,
            self.release_inward,
            self.retract_distance,
        ];
        if lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(PlanError::InvalidParams("lengths must be positive"));
        }
        Ok(())
    }
}

/// Inserting-arm trajectory plus the dilating arm's tension release.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionPlan {
    pub inserting: Trajectory,
    /// Absent when the vessel was not dilated.
    pub release: Option<Trajectory>,
    /// Index of the inserting waypoint (the untilt) that the release starts with.
    pub release_after: usize,
    pub opening_centroid: Point3,
}

/// Chamfer-tilt insertion followed by an optional screw motion.
///
/// `g_dilated` is the dilating gripper's position after the pull; `None`
/// means no dilation took place and the opening is centred on the circle.
pub fn plan_insertion(
    c: &Circle3,
    fixed: [Point3; 2],
    g_dilated: Option<Point3>,
    shunt_radius: f64,
    p: &InsertionParams,
) -> Result<InsertionPlan, PlanError> {
    p.validate()?;
    let n = c.normal;
    let centroid = match g_dilated {
        Some(gd) => (fixed[0] + fixed[1] + gd) / 3.0,
        None => c.center,
    };

    // Approach from the side of the fixed points, away from the dilating arm.
    let mid = (fixed[0] + fixed[1]) * 0.5;
    let base = radial_frame(mid, c).or_else(|_| Ok::<_, PlanError>(Frame::from_xz(mid, c.plane_axes().0, n)))?;
    let out = base.x;
    let base = base.with_origin(centroid);
    let tilted = base.rotated(base.y, p.chamfer_tilt_angle.to_radians());

    let staging = c.center + out * (c.radius + shunt_radius + p.staging_offset);
    let mut wps = vec![
        Waypoint::new(base.with_origin(staging), Gripper::Closed, 1.0),
        Waypoint::new(tilted.with_origin(centroid + n * p.descend_depth), Gripper::Closed, 1.0),
        Waypoint::new(tilted.with_origin(centroid), Gripper::Closed, 1.0),
        Waypoint::new(base, Gripper::Closed, 1.0),
    ];
    let release_after = wps.len() - 1;
    let mut last = base;
    if p.use_screw {
        last = base
            .rotated(n, p.screw_rotation.to_radians())
            .with_origin(centroid - n * p.screw_descent);
        wps.push(Waypoint::new(last, Gripper::Closed, 1.0));
    }
    wps.push(Waypoint::new(last, Gripper::Open, 1.0));
    wps.push(Waypoint::new(last.with_origin(last.origin + n * p.retract_distance), Gripper::Open, 1.0));

    let release = match g_dilated {
        Some(gd) => {
            let frame = radial_frame(gd, c)?;
            let inward = UnitVec3::new(centroid - gd).map_or(crate::geometry::Vec3::ZERO, |d| d * p.release_inward);
            let eased = gd + n * p.release_lift + inward;
            let up = eased + n * p.retract_distance;
            Some(Trajectory {
                actor: Actor::DilatingArm,
                waypoints: vec![
                    Waypoint::new(frame.with_origin(eased), Gripper::Closed, 1.0),
                    Waypoint::new(frame.with_origin(eased), Gripper::Open, 1.0),
                    Waypoint::new(frame.with_origin(up), Gripper::Open, 1.0),
                ],
            })
        }
        None => None,
    };

    Ok(InsertionPlan {
        inserting: Trajectory { actor: Actor::InsertingArm, waypoints: wps },
        release,
        release_after,
        opening_centroid: centroid,
    })
}
