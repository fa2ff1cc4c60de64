use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    Convergence { sweeps: usize, off_norm: f64 },

    /// The graph splits into several components; each entry lists the nodes of one component.
    #[error("graph is disconnected into {} components (sizes {:?}){}", .components.len(), component_sizes(.components), .hint.as_deref().map(|h| format!("; {h}")).unwrap_or_default())]
    Disconnected {
        components: Vec<Vec<usize>>,
        hint: Option<String>,
    },

    #[error("non-finite value in forward pass{}", .param_index.map(|i| format!(" (parameter index {i} is not finite)")).unwrap_or_default())]
    NonFinite { param_index: Option<usize> },

    #[error("training diverged at epoch {epoch}: mean query loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("format error in {path:?}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn component_sizes(components: &[Vec<usize>]) -> Vec<usize> {
    components.iter().map(Vec::len).collect()
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
