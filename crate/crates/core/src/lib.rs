//! Multi-object tracking of small aerial targets.
//!
//! The crate couples a three-stage tracker (joint association cost plus
//! mixture-model recovery of lost tracks) with a global/local detection
//! scheduler, a seeded scenario simulator standing in for the detectors, MOT
//! evaluation metrics, and a forward-only reference of the spatio-temporal
//! fusion block used by the global detector.

pub mod assoc;
pub mod config;
pub mod error;
pub mod geometry;
pub mod glsched;
pub mod io;
pub mod metrics;
pub mod motion;
pub mod pipeline;
pub mod pmr;
pub mod runner;
pub mod sim;
pub mod stff;
pub mod track;
pub mod trajectory;

pub use config::TrackerConfig;
pub use error::{Error, Result};
pub use geometry::{iou, BBox, Detection, DetectionSource};
pub use trajectory::TrajectorySet;
