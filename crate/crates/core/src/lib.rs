//! q-Normal distributions and their Markov chains.
//!
//! The crate evaluates the q-Normal density `f_N(x|q)` and the conditional
//! density `f_CN(x|y,rho,q)`, the q-Hermite and Al-Salam-Chihara polynomials
//! orthogonal with respect to them, multivariate q-Normal laws built from
//! Markov chains, and the two-sided conditional (Askey-Wilson) expansions.
//! `q` ranges over `(-1, 1]`; `q = 1` is the Gaussian case.

pub mod cli;
pub mod densities;
pub mod error;
pub mod expansions;
pub mod multivariate;
pub mod orthopoly;
pub mod qseries;
pub mod quadrature;
pub mod sampling;
pub mod verify;

pub use error::{QError, Result};
pub use qseries::{QParam, TruncationPolicy};
