//! Implicit-feedback recommendation training with automated selection of the
//! negative sampler.
//!
//! The library trains inner-product models (plain matrix factorization or a
//! light graph convolution) with the pairwise ranking loss, drawing negatives
//! from one of four candidate samplers. Instead of committing to a sampler up
//! front, the search stage learns a mixture weight per candidate through a
//! temperature-annealed Gumbel-softmax relaxation, then retrains with the
//! winning sampler warm-started from the best search-stage tables. A grid
//! baseline, full-ranking metrics, deterministic seeding and a CLI round out
//! the toolkit.

pub mod alias;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod rng;
pub mod samplers;
pub mod search;
pub mod trainer;

pub use error::{Error, Result};
