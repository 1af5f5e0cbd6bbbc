use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("missing output of the {stage} stage: {} (run `varfuse {stage}` first)", path.display())]
    MissingStage { stage: &'static str, path: PathBuf },

    #[error(transparent)]
    Core(#[from] varfuse_core::Error),
}

/// Broad failure class, reported through the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Io,
    Transport,
    Parse,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Io => 3,
            Category::Transport => 4,
            Category::Parse => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Io => "I/O",
            Category::Transport => "transport",
            Category::Parse => "parse",
        }
    }
}

impl CliError {
    pub fn category(&self) -> Category {
        use varfuse_core::Error as E;
        match self {
            CliError::Config(_) => Category::Config,
            CliError::MissingStage { .. } => Category::Io,
            CliError::Core(e) => match e {
                E::Io { .. } => Category::Io,
                E::Transport(_) => Category::Transport,
                E::Invalid { .. } => Category::Config,
                E::Parse { .. }
                | E::EmptyReply { .. }
                | E::Validation { .. }
                | E::DuplicateDocument(_)
                | E::FormatVersion { .. }
                | E::Format(_)
                | E::Integrity(_) => Category::Parse,
            },
        }
    }
}
