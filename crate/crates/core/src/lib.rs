//! Truncated Fock-space models of three-photon quantum illumination and the
//! hypothesis-testing quantities used to judge it: `Q_s`, the quantum Chernoff
//! exponent, Bhattacharyya and Helstrom errors, closed-form error bounds, and
//! an audit of the sign-chosen square-root trace against the principal one.
//!
//! Layout:
//!
//! - [`fock`]: spaces, ladder operators, kets, structured density operators.
//! - [`spectral`]: dense `eigh`, support-restricted powers, rank-one secular solver.
//! - [`states`]: three-photon states, backgrounds, the two hypotheses.
//! - [`engine`]: interchangeable `Q_s`/Helstrom evaluators behind a name registry.
//! - [`bounds`]: Chernoff minimization, closed-form bounds, reports.
//! - [`appendix`]: sign-chosen vs principal square-root traces.
//! - [`experiments`]: sweeps, presets, CSV / structured-text output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fock;
pub mod spectral;
pub mod states;
pub mod engine;
pub mod bounds;
pub mod appendix;
pub mod experiments;
pub mod report;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
