//! Numerical verification toolkit for Hamiltonian and bi-Hamiltonian
//! structures of (1+1)-dimensional systems of hydrodynamic type
//! `u^i_t = V^i_j(u) u^j_x`.
//!
//! Fields are given as coordinate expressions ([`expr`]); pointwise tensor
//! calculus lives in [`tensorcalc`]; the sampled checks that turn pointwise
//! residuals into verdicts live in [`criteria`] and [`diag`]; [`corpus`]
//! ships reference fields with known outcomes.

pub mod checks;
pub mod corpus;
pub mod criteria;
pub mod diag;
pub mod error;
pub mod expr;
pub mod fields;
pub mod report;
pub mod sampling;
pub mod tensor;
pub mod tensorcalc;

pub use error::{Error, Result};
