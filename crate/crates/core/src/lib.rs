//! Core of the laryngoscopic video classification toolkit.
//!
//! `no_std` + `alloc`: a small reverse-mode autodiff engine, three 3D video
//! backbones (C3D, divided space-time attention, 3D shifted-window
//! attention), clip preprocessing math, stratified k-fold evaluation and the
//! fine-tuning loop. File formats and the CLI live in the `lsptm` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baseline;
pub mod clip;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod kernels;
pub mod kfold;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod optim;
pub mod params;
pub mod real;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use graph::{Graph, Var};
pub use params::ModelParams;
pub use real::Real;
pub use tensor::Tensor;
