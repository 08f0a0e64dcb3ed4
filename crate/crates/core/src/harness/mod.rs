//! Configuration, data generation, experiment orchestration and the
//! acceptance battery.

pub mod config;
pub mod data;
pub mod experiment;
pub mod fit;
pub mod sweep;
pub mod verify;

pub use config::{DataSpec, RunConfig, SizeRule, TimeStep, WindowPlan};
pub use data::generate_hs_data;
pub use experiment::{run_experiment, run_experiment_in, RunRecord};
pub use fit::{fit_power_law, SlopeFit};
pub use sweep::{sweep_n, Quantity, SweepReport};

/// Version stamp written into every run record.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
