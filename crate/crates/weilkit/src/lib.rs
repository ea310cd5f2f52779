//! JSON formats, run manifests and subcommands of the `weilkit` tool, on top
//! of the `no_std` core.

pub mod commands;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod verify;

pub use commands::{run, Inputs, Outcome};
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
