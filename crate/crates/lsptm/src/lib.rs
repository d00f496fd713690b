//! File formats, dataset IO and experiment drivers on top of `lsptm-core`.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod experiment;
pub mod frames;
pub mod manifest;
pub mod ppm;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
pub use lsptm_core as core;
