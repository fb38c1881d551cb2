//! Spoiler-annotated corpus construction and desk-scale transformer spoiler
//! classifiers.

pub mod classifier;
pub mod corpus;
pub mod encoding;
pub mod error;
pub mod extraction;
pub mod interpret;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
