//! Prompt generation, response scoring and saturation experiments for
//! in-context learning on partially ordered sets.

pub mod cli;
pub mod client;
pub mod error;
pub mod meta_opt;
pub mod metrics;
pub mod poset;
pub mod prompt;
pub mod rng;
pub mod tsne;

pub use error::{Error, Result};
