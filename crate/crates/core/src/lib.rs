//! Parametric quantum-state tomography of transverse-field Ising ground
//! states with a field-conditioned restricted Boltzmann machine.

// `!(x > 0.0)` style checks are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimators;
pub mod exact_diag;
pub mod exec;
pub mod gibbs;
pub mod hyperrbm;
pub mod io;
pub mod lattice;
pub mod pipeline;
pub mod rng;
pub mod spins;
pub mod suites;
pub mod training;

pub use error::{Error, Result};
