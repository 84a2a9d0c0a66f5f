//! File formats, configuration, experiment runner and command line for the
//! deep partially linear Cox model in `dplc-core`.

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod model_io;

pub use error::{AppError, AppResult};
