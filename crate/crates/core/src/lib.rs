//! Coarse-to-fine segmentation of lithography SEM images.

pub mod coarse;
pub mod error;
pub mod fine;
pub mod imgcore;
pub mod metrics;
pub mod nnet;
pub mod rng;
pub mod synthgen;

pub use error::{Error, Result};
pub use rng::Rng;
