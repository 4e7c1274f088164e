//! Quantum-jump simulation of Markovian open quantum systems.
//!
//! The state of the reduced system is sampled as a piecewise deterministic
//! process on pure states: a non-Hermitian linear flow generated by the
//! effective Hamiltonian, interrupted by jumps whose waiting time is read off
//! the decaying squared norm. Running the same process on pairs of state
//! vectors (the doubled space `H ⊕ H`) gives matrix elements of reduced
//! Heisenberg operators and, with operator insertions along the path,
//! arbitrary time-ordered multitime correlation functions.
//!
//! Modules:
//!
//! - [`linalg`]: dense complex vectors/matrices, 2×2 Hermitian eigensolver, RK4.
//! - [`model`]: environment correlation matrix, jump channels, effective Hamiltonian
//!   and the three two-level scenarios (driven vacuum, squeezed vacuum, thermal).
//! - [`pdp`]: the trajectory engine in the single and doubled space.
//! - [`correlators`]: symmetric and general correlation estimators, polarization
//!   identity, matrix elements.
//! - [`oracle`]: dense master-equation and quantum-regression ground truth.
//! - [`analysis`]: ensemble statistics, steady states and fluorescence spectra.
//! - [`cli`]: configuration, task execution and CSV tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod correlators;
mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod pdp;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
