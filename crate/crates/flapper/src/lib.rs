//! File formats, scenario configuration and the `flapper` command line built
//! on [`flapper_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod report;

pub use error::{AppError, AppResult, EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK};
