//! Command-line front end for the `glam-core` solver: array and marginal
//! file formats plus the `fit`, `predict`, `simulate` and `bench` commands.

pub mod alloc;
pub mod args;
pub mod arrayfile;
pub mod bench;
pub mod error;
pub mod fit;
pub mod marginal;
pub mod predict;
pub mod simulate;

pub use error::{CliError, Result};

/// Process exit code when the path stopped at a non-converged model.
pub const EXIT_TRUNCATED: i32 = 3;
/// Process exit code for input, format and model errors.
pub const EXIT_ERROR: i32 = 1;
