//! Dissipative quantum dynamics driven by the nonlinear thermodynamic quantum
//! master equation.
//!
//! The crate is organized bottom-up:
//!
//! - [`operator`]: Hermitian operator algebra, spectral decompositions and the
//!   conditional operator `A_ρ = ∫₀¹ ρ^λ A ρ^{1-λ} dλ`.
//! - [`master`]: right-hand sides of the thermodynamic, linearized and
//!   Caldeira-Leggett master equations for a heat bath.
//! - [`solver`]: fixed-step RK4 propagation, either of ρ directly or of its
//!   eigenvalues and eigenvectors.
//! - [`two_level`]: closed-form Bloch-vector version of the dynamics.
//! - [`oscillator`]: truncated damped harmonic oscillator and the temperature
//!   quench experiment.
//! - [`diagnostics`]: entropy production, free energy and energy exchange
//!   with the bath.
//!
//! Units: `ħ` is carried explicitly where it appears, `k_B = 1` throughout, so
//! every temperature is an energy `kT`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod master;
pub mod operator;
pub mod oscillator;
pub mod solver;
pub mod two_level;

pub use error::{Error, Result};
pub use operator::{CMatrix, DensityMatrix, HermitianOperator, SpectralDecomposition};
