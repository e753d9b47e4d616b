//! Information-aware bidding for pCTR model improvement.
//!
//! Advertisers buy impressions whose labels carry the most information for
//! a logistic pCTR model. The crate provides the model, a gradient-coverage
//! utility over a validation gradient bank, label-free gradient proxies, a
//! multiplicative dual pacing controller, an auction simulator and the
//! experiment pipelines that exercise them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auction;
pub mod coverage;
pub mod error;
pub mod experiments;
pub mod gradest;
pub mod linalg;
pub mod model;
pub mod pacing;
pub mod rng;

pub use error::{Error, Result};
