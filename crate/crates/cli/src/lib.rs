//! File formats, scenario configuration and commands of the `icent` tool.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod fixtures;
pub mod io;
pub mod parallel;
pub mod validate;

pub use error::{CliError, Result};
