//! Worst-case dependence search for Monte Carlo quantile estimates.

pub mod copula;
pub mod error;
pub mod estimation;
pub mod margins;
pub mod models;
pub mod numeric;
pub mod rng;
pub mod search;
pub mod vine;

pub use error::{Error, Result};
