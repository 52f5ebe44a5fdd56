//! Command-line pipelines around the principal graph library: configuration,
//! data loading, JSON/CSV/SVG outputs and the subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod schema;
pub mod svg;
