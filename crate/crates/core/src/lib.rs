//! Design and verification toolkit for allpass-warped non-uniform DFT filter
//! banks used in subband acoustic echo cancellation.

// NaN-rejecting `!(x > 0.0)` guards are intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bank;
pub mod cepstrum;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod reference;
pub mod reproduce;
pub mod sim;
pub mod solver;
pub mod synthesis;
pub mod warp;

pub use error::{Error, Result};
