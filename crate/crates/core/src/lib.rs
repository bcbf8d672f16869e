//! Symmetries, conservation laws and learning dynamics of small neural
//! networks.
//!
//! The crate builds differentiable networks from declarative specs, finds
//! their translation, scale and rescale symmetries, integrates continuous
//! learning flows, trains with SGD and momentum, and compares measured
//! symmetry quantities against their closed-form predictions.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flows;
pub mod harness;
pub mod net;
pub mod optim;
pub mod oscillator;
pub mod predict;
pub mod symmetry;
pub mod tensor;

pub use error::{Error, Result};
