//! Lowest-degree rank analysis of polynomial restrictions and divergence
//! rates of the Wald statistic.
//!
//! The pipeline runs bottom-up:
//!
//! - [`poly`]: exact sparse polynomials over ℚ or ℚ(√d).
//! - [`restriction`]: recentering, Jacobian, echelon transformation and the
//!   FRALD-T verdict.
//! - [`rates`]: characteristic-polynomial degrees and divergence exponents.
//! - [`simulate`]: seeded Monte Carlo checks of the predicted rates.
//! - [`cli`]: spec-file parsing, reports and the command implementations.

pub mod cli;
pub mod matrix;
pub mod poly;
pub mod rates;
pub mod restriction;
pub mod simulate;
pub mod verify;
