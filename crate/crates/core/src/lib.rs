//! Allocation-only core for PIR-sensor multi-person device-free localization.
//!
//! Everything in this crate is pure computation over owned buffers: the
//! radiometric PIR simulator, the preprocessing and augmentation pipeline,
//! a small reverse-mode neural substrate, the two-stage counting and
//! localization networks with their permutation-invariant losses, the
//! single-channel ICA baseline, and the evaluation metrics. File formats,
//! configuration and the command line live in the `pirdfl` crate.
#![no_std]

extern crate alloc;

pub mod error;
pub mod geometry;
pub mod math;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod radiometry;
pub mod rng;
pub mod scica;

pub use error::{Error, Result};
pub use geometry::{Point2, SensorModel, SensorPose, ZonePattern, ZoneSign};
