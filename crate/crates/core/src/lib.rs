pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod ledger;
pub mod multipliers;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
