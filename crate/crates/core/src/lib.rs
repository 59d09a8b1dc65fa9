//! Core of the long/short-term aspect interest recommender.
//!
//! The crate is `no_std` with `alloc`. It holds the aspect extraction rules,
//! the user–item–aspect graph, interest-sequence selection, the encoders, the
//! rating predictor, training and metrics. File formats, the command line and
//! threading live in the `lsa` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod graph;
pub mod model;
pub mod params;
pub mod predictor;
pub mod rng;
pub mod selection;
pub mod synth;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
