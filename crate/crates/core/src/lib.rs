//! Gradient-sampling optimization for variational quantum circuits.
//!
//! The crate bundles a small dense statevector simulator, Pauli-sum
//! observables, parameter-shift gradients, an exact circuit/shot ledger with
//! cloud pricing, a binary-classification problem builder, and four
//! optimizers that share one step interface: gradient sampling (ideal and
//! practical variants), parameter-shift gradient descent, randomized
//! coordinate descent and SPSA.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gradients;
pub mod objective;
pub mod observables;
pub mod optimizers;
pub mod qml;
pub mod rng;
pub mod shots_cost;
pub mod statevector;

pub use error::{QgsaError, Result};
pub use objective::{Evaluator, Objective};
