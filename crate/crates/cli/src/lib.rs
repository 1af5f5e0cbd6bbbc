//! Configuration, artifact layout and stages of the `varfuse` command.

pub mod config;
pub mod error;
pub mod layout;
pub mod pipeline;
pub mod synth;

pub use config::ExperimentConfig;
pub use error::{Category, CliError, Result};
pub use layout::Layout;
pub use pipeline::{
    cmd_analyze, cmd_evaluate, cmd_experiment, cmd_fuse, cmd_generate, cmd_index, cmd_retrieve, Context, Outcome,
    RunOptions, Stage,
};
