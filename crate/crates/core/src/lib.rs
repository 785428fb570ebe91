//! Uncertain-threshold model of generalization language.

pub mod baselines;
pub mod cli;
pub mod data;
pub mod error;
pub mod fixtures;
pub mod inference;
pub mod numerics;
pub mod pragmatics;
pub mod priors;
pub mod replicate;
pub mod semantics;
pub mod simulate;

pub use error::{Error, Result};
