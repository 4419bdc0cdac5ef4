//! Desk-scale numerics for critical anisotropic p-Laplace equations.
//!
//! The library computes, in exact rational arithmetic where the math is exact,
//! the exponent zoo attached to an anisotropy vector p⃗ = (p₁,…,pₙ) — harmonic
//! mean, critical and Serrin exponents, the vanishing thresholds p̄₀ and q₀ —
//! together with the coordinate scaling maps that relate the different forms of
//! the anisotropic Sobolev inequality, the bookkeeping of the Moser-type
//! iteration scheme (exponent recursion, stopping sets, iteration-count
//! bounds), and floating-point machinery to compute discrete extremal
//! functions on tensor grids and verify their decay envelopes and support.
//!
//! Entry points by topic:
//!
//! - [`exponents`]: [`ExponentVector`], [`DerivedExponents`], regime tags.
//! - [`transforms`]: [`DiagonalMap`], the scale family, τ_θ / σ_θ maps.
//! - [`closed_forms`]: the isotropic extremal, decay envelopes, the
//!   anisotropic quasi-distance, annular domain membership.
//! - [`moser`]: exponent recursion γ → ((n−p)/n)γ + pᵢ − p and everything
//!   built on it.
//! - [`grid`]: tensor grids, scalar fields, forward differences, power
//!   integrals, field file I/O.
//! - [`solver`]: projected gradient descent for the constrained energy.
//! - [`decay`]: tail-slope fits, envelope constants, support detection.
//! - [`cli`]: the batch front door used by the `anisodecay` binary.
//!
//! The `examples/` directory contains one runnable example per capability;
//! `cargo run --example derive_exponents` is a good starting point.

pub mod cli;
pub mod closed_forms;
pub mod decay;
mod error;
pub mod exponents;
pub mod grid;
pub mod moser;
pub mod rational;
pub mod solver;
pub mod transforms;

pub use error::{Error, Result};
pub use exponents::{DerivedExponents, ExponentVector, Regime};
pub use grid::{ScalarField, TensorGrid};
pub use moser::IterationTrace;
pub use solver::{SolverConfig, SolverReport};
pub use transforms::DiagonalMap;

/// Exact rational scalar used throughout the exponent calculus.
pub type Rational = num::BigRational;
