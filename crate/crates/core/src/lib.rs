//! Toolkit for human-vs-AI code stylometry: building labeled multilingual
//! datasets by LLM code translation, training transformer and classical
//! classifiers, and evaluating them.

pub mod baselines;
pub mod classifier;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod generation;
pub mod lang;
pub mod pipeline;
pub mod record;
pub mod sampling;
pub mod synth;

pub use error::{Error, Result};
