//! Multi-object tracking by detection, tuned for sparse (low-frequency)
//! detections.

pub mod assignment;
pub mod association;
pub mod bbd;
pub mod cli;
pub mod error;
pub mod io;
pub mod kalman;
pub mod metrics;
pub mod model;
pub mod run;
pub mod synth;
pub mod tracker;
pub mod visual;

pub use error::{Error, Result};
pub use model::{BBox, Detection, Embedding};
