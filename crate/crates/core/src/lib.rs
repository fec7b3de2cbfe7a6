//! Multi-dimensional counter-speech effectiveness classification.

pub mod agreement;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod model;
pub mod stats;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
