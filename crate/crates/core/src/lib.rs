//! Numerical laboratory for two-layer ReLU/GeLU networks trained from small
//! initialization.
//!
//! The crate builds up from synthetic regression datasets with analytic
//! ground truth ([`data`]), through exact network gradients and
//! initialization schemes ([`network`]) and discrete-time training
//! ([`optim`]), to the activation-pattern geometry that drives the early
//! directional phase ([`geometry`]): the gradient field at the origin, cell
//! enumeration of the induced hyperplane arrangement, extremal-direction
//! search and certification, and concentration measurements. [`analysis`]
//! provides the OLS references, the two-ReLU limit profile, Monte-Carlo test
//! metrics and neuron-geometry summaries. [`harness`] wires everything into
//! reproducible experiment drivers with CSV/SVG/JSONL outputs.
//!
//! Everything is deterministic in explicit seeds: random streams are keyed
//! by `(seed, purpose)` and results do not depend on thread count.

pub mod analysis;
pub mod data;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod network;
pub mod optim;
pub mod rng;
pub mod vecops;

pub use error::{Error, Result};
