//! Synthetic-population laboratory for assortative mating, inequality and
//! intergenerational educational mobility.

pub mod calibration;
pub mod checks;
pub mod config;
pub mod coresidence;
pub mod data_io;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod regional;
pub mod rng;
pub mod synth;
pub mod trends;

pub use error::{Error, Result};
