//! Finite-horizon adaptive optimal distributed power allocation for a
//! cognitive radio network of primary (PU) and secondary (SU) users.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: path loss, log-normal shadowing and Rayleigh fading, with
//!   a Gauss-Markov evolution that preserves the stationary marginals.
//! - [`network`]: node placement, gain table, interference and SIR.
//! - [`dynamics`]: the augmented SIR-error system `E = [e, γ]` and the exact
//!   per-step `(φ, ρ, ν)` coefficients used as a simulator-side oracle.
//! - [`estimator`]: the model-free, time-varying quadratic Q-function
//!   estimator with terminal constraint.
//! - [`controller`]: per-user power policy built on the estimator, plus the
//!   classical SIR-balancing baseline.
//! - [`riccati`]: backward Riccati recursion for known, frozen dynamics.
//! - [`sim`]: scenario configuration, the stepping loop, metrics and I/O.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod estimator;
pub mod network;
pub mod riccati;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
