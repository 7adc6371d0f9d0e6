//! Hyperspectral chemical plume detection built around Iterative Filtering.

pub mod data;
pub mod error;
pub mod io;
pub mod classifiers;
pub mod cli;
pub mod config;
pub mod evaluation;
pub mod mif;
pub mod pipeline;
pub mod synth;

pub use data::{DetectionMap, Grid, GroundTruthMask, Hypercube, Label, Signature};
pub use error::{Error, Result};
