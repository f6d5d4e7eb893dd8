//! Desk-scale simulator for automated vascular shunt insertion.
//!
//! The pipeline mirrors a two-arm surgical robot inserting a shunt into a
//! vessel phantom:
//!
//! 1. [`scene`] builds a synthetic rim (a torus) and renders RGBD images.
//! 2. [`perception`] segments the rim and deprojects it into a point cloud.
//! 3. [`fitting`] estimates the rim circle with RANSAC.
//! 4. [`planning`] computes the grasp, the dilation pull and the chamfer-tilt
//!    plus screw insertion.
//! 5. [`simkernel`] runs a whole trial against a quasi-static rim model.
//! 6. [`harness`] runs seeded experiment grids and formats reports.
//!
//! Lengths are millimetres and angles radians, except in configuration
//! files and the CLI where angles are degrees.

pub mod cloud;
pub mod fitting;
pub mod geometry;
pub mod harness;
pub mod perception;
pub mod planning;
pub mod scene;
pub mod simkernel;

pub use cloud::{PointCloud, PointLabel};
pub use fitting::{ransac_circle, FitResult, RansacParams};
pub use geometry::{Circle3, Frame, Point3, Triangle3, UnitVec3, Vec3};
pub use simkernel::{execute_trial, TrialConfig, TrialOutcome};
