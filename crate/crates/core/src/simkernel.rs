//! Quasi-static surrogate of the deformable vessel rim and the end-to-end
//! trial runner.
//!
//! The latex rim is not simulated mechanically. After dilation the opening
//! is the triangle of the three held points on the rim's inner edge, and a
//! shunt of radius `s` is captured when
//!
//! ```text
//! incircle(opening) + eta_tilt(theta) + eta_screw * [screw] + eps >= s,   eps ~ N(0, sigma_m)
//! ```
//!
//! Without dilation the opening is the undilated inner radius minus a
//! buckling penalty. Grasp calibration error is isotropic Gaussian; a grasp
//! farther than the jaw half-width from the true rim is a dilation failure.
//!
//! All defaults below are calibration values, not measured physical
//! constants.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fitting::{ransac_circle, RansacParams};
use crate::geometry::{
    point_to_circle_distance, triangle_incircle_radius, Circle3, GeometryError, Point3, Triangle3, Vec3,
};
use crate::perception::{deproject, segment_threshold, ColorBand};
use crate::planning::{
    plan_approach, plan_dilation, plan_grasp_point, plan_insertion, Gripper, InsertionParams, Trajectory,
};
use crate::scene::{build_scene, render_splat, SceneConfig};

/// Half-width of the RGB band used to segment the rim colour.
pub const SEGMENT_TOLERANCE: u8 = 30;

const STREAM_SCENE: u64 = 1;
const STREAM_FIT: u64 = 2;
const STREAM_GRASP: u64 = 3;
const STREAM_MARGIN: u64 = 4;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed: `splitmix64(master ^ splitmix64(index))`.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid trial configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RimModel {
    /// Max distance (mm) between the closed jaws and the rim for a hold.
    pub jaw_halfwidth: f64,
    /// Per-axis grasp calibration error (mm).
    pub grasp_noise_sigma: f64,
    /// Chamfer-tilt capture bonus at low rim tilt (mm).
    pub eta_tilt0: f64,
    pub eta_screw: f64,
    /// Rim tilt (deg) up to which the full tilt bonus applies.
    pub tilt_full_angle: f64,
    /// Rim tilt (deg) at which the tilt bonus has decayed to zero.
    pub tilt_zero_angle: f64,
    /// Aperture lost to rim buckling when not dilated (mm).
    pub beta_buckle: f64,
    pub margin_noise_sigma: f64,
    /// Max Cartesian speed (mm/s).
    pub v_max: f64,
    /// Seconds per gripper open or close.
    pub t_grip: f64,
    /// Dilating-arm rest pose height above the pre-grasp hover (mm).
    pub dilating_home_clearance: f64,
    /// Inserting-arm rest pose height above the staging point (mm).
    pub inserting_home_clearance: f64,
}

impl Default for RimModel {
    fn default() -> Self {
        Self {
            jaw_halfwidth: 2.5,
            grasp_noise_sigma: 1.0,
            eta_tilt0: 1.0,
            eta_screw: 1.5,
            tilt_full_angle: 20.0,
            tilt_zero_angle: 45.0,
            beta_buckle: 5.0,
            margin_noise_sigma: 0.3,
            v_max: 40.0,
            t_grip: 1.0,
            dilating_home_clearance: 30.0,
            inserting_home_clearance: 150.0,
        }
    }
}

impl RimModel {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("jaw_halfwidth", self.jaw_halfwidth),
            ("eta_tilt0", self.eta_tilt0),
            ("eta_screw", self.eta_screw),
            ("tilt_zero_angle", self.tilt_zero_angle),
            ("beta_buckle", self.beta_buckle),
            ("v_max", self.v_max),
            ("t_grip", self.t_grip),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        let non_negative = [
            ("grasp_noise_sigma", self.grasp_noise_sigma),
            ("margin_noise_sigma", self.margin_noise_sigma),
            ("tilt_full_angle", self.tilt_full_angle),
            ("dilating_home_clearance", self.dilating_home_clearance),
            ("inserting_home_clearance", self.inserting_home_clearance),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::InvalidConfig(format!("{name} must be non-negative")));
            }
        }
        if self.tilt_full_angle >= self.tilt_zero_angle {
            return Err(SimError::InvalidConfig("tilt_full_angle must be below tilt_zero_angle".into()));
        }
        Ok(())
    }

    /// Chamfer-tilt bonus: `eta_tilt0` up to `tilt_full_angle`, linear to 0 at `tilt_zero_angle`.
    pub fn eta_tilt(&self, tilt_deg: f64) -> f64 {
        let t = tilt_deg.abs();
        if t <= self.tilt_full_angle {
            self.eta_tilt0
        } else if t >= self.tilt_zero_angle {
            0.0
        } else {
            self.eta_tilt0 * (self.tilt_zero_angle - t) / (self.tilt_zero_angle - self.tilt_full_angle)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Pipeline {
    pub use_dilation: bool,
    pub use_screw: bool,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self { use_dilation: true, use_screw: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub shunt_outer_diameter: f64,
    pub scene: SceneConfig,
    pub pipeline: Pipeline,
    pub rim_model: RimModel,
    pub ransac: RansacParams,
    pub insertion: InsertionParams,
    pub seed: u64,
    /// Replaces the sampled grasp error with a fixed offset (mm).
    pub grasp_offset_override: Option<Vec3>,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            shunt_outer_diameter: 8.0,
            scene: SceneConfig::default(),
            pipeline: Pipeline::default(),
            rim_model: RimModel::default(),
            ransac: RansacParams::default(),
            insertion: InsertionParams::default(),
            seed: 0,
            grasp_offset_override: None,
        }
    }
}

impl TrialConfig {
    pub fn shunt_radius(&self) -> f64 {
        self.shunt_outer_diameter / 2.0
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let cfg = |e: &dyn std::fmt::Display| SimError::InvalidConfig(e.to_string());
        self.scene.validate().map_err(|e| cfg(&e))?;
        self.rim_model.validate()?;
        self.ransac.validate().map_err(|e| cfg(&e))?;
        self.insertion.validate().map_err(|e| cfg(&e))?;
        let r = self.shunt_radius();
        if !(r > 0.0 && r <= self.scene.vessel_inner_radius) {
            return Err(SimError::InvalidConfig(
                "shunt radius must be positive and no larger than the vessel inner radius".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureMode {
    #[serde(rename = "none")]
    None,
    /// Dilation failure: the rim was not grasped or the plan could not be made.
    D,
    /// Shunt insertion failure: the shunt rim is not enclosed after release.
    S,
}

impl FailureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureMode::None => "none",
            FailureMode::D => "D",
            FailureMode::S => "S",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub fit_center_err_mm: Option<f64>,
    pub grasp_rim_dist_mm: Option<f64>,
    pub capture_radius_mm: Option<f64>,
    pub margin_mm: Option<f64>,
    /// Why a D outcome happened before the grasp test, if it did.
    pub tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub success: bool,
    pub failure_mode: FailureMode,
    pub time_s: f64,
    pub diagnostics: Diagnostics,
}

/// The three held points of the dilated rim.
///
/// `f1` and `f2` are snapped radially onto `aperture` (the rim's inner edge);
/// `g_final` is the dilating gripper's hold after the pull.
pub fn stretched_opening(aperture: &Circle3, f1: Point3, f2: Point3, g_final: Point3) -> Result<Triangle3, GeometryError> {
    let snap = |p: Point3| aperture.closest_point(p).ok_or(GeometryError::DegenerateTriangle);
    Triangle3::new(snap(f1)?, snap(f2)?, g_final)
}

/// Shape of the vessel opening at insertion time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Opening {
    Dilated(Triangle3),
    Undilated,
}

pub fn capture_radius(opening: &Opening, cfg: &TrialConfig) -> f64 {
    let m = &cfg.rim_model;
    let base = match opening {
        Opening::Dilated(t) => triangle_incircle_radius(t),
        Opening::Undilated => cfg.scene.vessel_inner_radius - m.beta_buckle,
    };
    let screw = if cfg.pipeline.use_screw { m.eta_screw } else { 0.0 };
    base + m.eta_tilt(cfg.scene.rim_tilt) + screw
}

/// Accumulates straight-line travel and gripper actuations for one arm.
#[derive(Debug, Clone)]
struct ArmClock {
    position: Point3,
    gripper: Gripper,
    seconds: f64,
    v_max: f64,
    t_grip: f64,
}

impl ArmClock {
    fn new(home: Point3, gripper: Gripper, model: &RimModel) -> Self {
        Self { position: home, gripper, seconds: 0.0, v_max: model.v_max, t_grip: model.t_grip }
    }

    fn move_to(&mut self, p: Point3, speed_fraction: f64) {
        self.seconds += self.position.distance(p) / (speed_fraction * self.v_max);
        self.position = p;
    }

    fn follow(&mut self, t: &Trajectory) {
        for w in &t.waypoints {
            self.move_to(w.position(), w.speed_fraction);
            if w.gripper != self.gripper {
                self.seconds += self.t_grip;
                self.gripper = w.gripper;
            }
        }
    }
}

fn fail_d(time_s: f64, mut diagnostics: Diagnostics, tag: impl Into<String>) -> TrialOutcome {
    diagnostics.tag = Some(tag.into());
    TrialOutcome { success: false, failure_mode: FailureMode::D, time_s, diagnostics }
}

/// Perceive, fit, grasp, dilate, insert; then classify the outcome.
pub fn execute_trial(cfg: &TrialConfig) -> Result<TrialOutcome, SimError> {
    cfg.validate()?;
    let model = &cfg.rim_model;
    let mut diag = Diagnostics::default();

    // Perception.
    let mut scene_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, STREAM_SCENE));
    let scene = build_scene(&cfg.scene, &mut scene_rng).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let truth = scene.truth;
    let cam = cfg.scene.camera();
    let render = match render_splat(&cfg.scene, &scene, &cam, &mut scene_rng) {
        Ok(r) => r,
        Err(e) => return Ok(fail_d(0.0, diag, format!("render: {e}"))),
    };
    let mask = segment_threshold(&render.image, &ColorBand::around(cfg.scene.rim_color, SEGMENT_TOLERANCE));
    let cloud = deproject(&mask, &render.image, &cam).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let ransac = RansacParams { seed: mix_seed(cfg.seed, STREAM_FIT) ^ cfg.ransac.seed, ..cfg.ransac };
    let fit = match ransac_circle(&cloud, &ransac) {
        Ok(f) => f.circle,
        Err(e) => return Ok(fail_d(0.0, diag, format!("fit: {e}"))),
    };
    diag.fit_center_err_mm = Some(fit.center.distance(truth.rim_circle.center));

    let [f1, f2] = truth.fixed_points;
    let aperture = truth
        .rim_circle
        .with_radius(cfg.scene.vessel_inner_radius)
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let mut seconds = 0.0;

    // Grasp and dilation on the dilating arm.
    let (opening, g_dilated, release_from) = if cfg.pipeline.use_dilation {
        let g = match plan_grasp_point(&fit, f1, f2) {
            Ok(g) => g,
            Err(e) => return Ok(fail_d(0.0, diag, format!("grasp plan: {e}"))),
        };
        let approach = match plan_approach(g, &fit) {
            Ok(t) => t,
            Err(e) => return Ok(fail_d(0.0, diag, format!("approach plan: {e}"))),
        };
        let home = approach.first().position() + fit.normal * model.dilating_home_clearance;
        let mut arm = ArmClock::new(home, Gripper::Open, model);
        arm.follow(&approach);

        let offset = match cfg.grasp_offset_override {
            Some(o) => o,
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, STREAM_GRASP));
                if model.grasp_noise_sigma > 0.0 {
                    let n = Normal::new(0.0, model.grasp_noise_sigma).expect("validated sigma");
                    Vec3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng))
                } else {
                    Vec3::ZERO
                }
            }
        };
        let executed = g + offset;
        let dist = point_to_circle_distance(executed, &truth.rim_circle);
        diag.grasp_rim_dist_mm = Some(dist);
        if dist > model.jaw_halfwidth {
            // Missed grasp: open and return.
            arm.seconds += arm.t_grip;
            arm.move_to(home, 1.0);
            return Ok(fail_d(arm.seconds, diag, "grasp missed rim"));
        }

        let dilation = match plan_dilation(g, &fit) {
            Ok(t) => t,
            Err(e) => return Ok(fail_d(arm.seconds, diag, format!("dilation plan: {e}"))),
        };
        let g_planned = dilation.last().position();
        arm.follow(&dilation);

        let Some(held) = aperture.closest_point(executed) else {
            return Ok(fail_d(arm.seconds, diag, "grasp on rim axis"));
        };
        let g_final = held + (g_planned - g);
        let opening = match stretched_opening(&aperture, f1, f2, g_final) {
            Ok(t) => t,
            Err(e) => return Ok(fail_d(arm.seconds, diag, format!("opening: {e}"))),
        };
        (Opening::Dilated(opening), Some(g_planned), Some((arm, home)))
    } else {
        (Opening::Undilated, None, None)
    };

    // Insertion.
    let insertion = InsertionParams {
        use_screw: cfg.pipeline.use_screw,
        use_dilation: cfg.pipeline.use_dilation,
        ..cfg.insertion
    };
    let plan = match plan_insertion(&fit, [f1, f2], g_dilated, cfg.shunt_radius(), &insertion) {
        Ok(p) => p,
        Err(e) => return Ok(fail_d(release_from.map_or(0.0, |(a, _)| a.seconds), diag, format!("insertion plan: {e}"))),
    };
    let ins_home = plan.inserting.first().position() + fit.normal * model.inserting_home_clearance;
    let mut ins_arm = ArmClock::new(ins_home, Gripper::Closed, model);
    ins_arm.follow(&plan.inserting);
    ins_arm.move_to(ins_home, 1.0);
    seconds += ins_arm.seconds;
    if let (Some((mut arm, home)), Some(release)) = (release_from, plan.release.as_ref()) {
        arm.follow(release);
        arm.move_to(home, 1.0);
        seconds += arm.seconds;
    }

    let capture = capture_radius(&opening, cfg);
    let eps = if model.margin_noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, STREAM_MARGIN));
        Normal::new(0.0, model.margin_noise_sigma).expect("validated sigma").sample(&mut rng)
    } else {
        0.0
    };
    let margin = capture + eps - cfg.shunt_radius();
    diag.capture_radius_mm = Some(capture);
    diag.margin_mm = Some(margin);
    let success = margin >= 0.0;
    Ok(TrialOutcome {
        success,
        failure_mode: if success { FailureMode::None } else { FailureMode::S },
        time_s: seconds,
        diagnostics: diag,
    })
}
