//! Deterministic antipodal grasp planning on point clouds.
//!
//! The pipeline runs preprocess, normal estimation, planar region growing,
//! antiparallel patch pairing, contact-force modelling and a stability
//! optimisation, then ranks two-finger grasp candidates. A Monte Carlo
//! robustness evaluator scores a grasp under contact perturbations.
//!
//! Every stage is deterministic: ties break on point index and random draws
//! come from seeded, per-trial counter streams.

pub mod candidate;
pub mod cloud;
pub mod error;
pub mod geometry;
pub mod mechanics;
pub mod par;
pub mod planner;
pub mod region;
pub mod report;
pub mod robustness;
pub mod stability;
pub mod synthetic;

pub use cloud::{PointCloud, SpatialIndex};
pub use error::{GraspError, Result};
pub use geometry::Vec3;
