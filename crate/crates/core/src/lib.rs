//! Strong approximation laboratory for the log-Heston SDE.

pub mod acceptance;
pub mod bridge_lab;
pub mod config;
pub mod error;
pub mod error_lab;
pub mod experiments;
pub mod grid_paths;
pub mod model;
pub mod optimal_estimators;
pub mod rng;
pub mod schemes;
pub mod stats;

pub use error::{LabError, Result};
