//! Command-line driver: named cases, refinement studies, the dynamics
//! comparison and the dual-density lab, all emitting CSV.

pub mod config;
pub mod run;

pub use config::{parse_config, Cli, RunConfig};
pub use run::{run, RunError, RunSummary};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub mod guide_cli {}
