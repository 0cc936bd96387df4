//! Command-line front end: file formats, run manifests and subcommands.

pub mod commands;
pub mod error;
pub mod formats;
pub mod io;
pub mod manifest;

pub use commands::{execute, Cli, Command, Outcome, OUT_DIR_ENV};
pub use error::{CliError, Result};
pub use io::{load_image, load_label_map, write_label_map};
pub use manifest::RunManifest;
