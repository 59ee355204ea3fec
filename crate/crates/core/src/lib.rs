//! Pseudo segmentation masks for infrared small targets from single-point labels.
//!
//! The pipeline has three stages:
//!
//! - [`p2b`] estimates a bounding box around each point label from
//!   directional intensity profiles,
//! - [`b2m`] turns each box into a mask by fusing a global and two
//!   direction-split probability maps,
//! - [`pmu`] filters network predictions against the point labels and merges
//!   them with the initial masks.
//!
//! [`metrics`] scores masks with IoU, Pd and Fa, and [`synth`] builds scenes
//! with exact ground truth for testing.

pub mod b2m;
pub mod config;
pub mod error;
#[cfg(feature = "io")]
pub mod io;
pub mod metrics;
pub mod model;
pub mod p2b;
pub mod pmu;
pub mod synth;

pub use b2m::point_to_mask;
pub use config::{EvalConfig, PmgConfig, UpdateConfig};
pub use error::{Error, Result};
pub use metrics::{evaluate_dataset, EvalReport, SizeCategory};
pub use model::{clamp_box, BinaryMask, BoundingBox, Connectivity, GrayImage, PointLabel, ProbMap};
pub use p2b::point_to_box;
pub use pmu::{false_alarm_filter, missed_detection_retrieve, update_masks};
