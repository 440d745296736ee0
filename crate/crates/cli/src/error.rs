//! Data-level command errors with a stable machine-readable surface.
//!
//! Every failure past argument parsing carries a short kind slug and a
//! human-readable message, printed to stderr as one JSON object and mapped
//! to exit code 2. Usage errors never reach this type; clap reports them
//! and the process exits with code 1.

use s2m_core::archive::ArchiveError;
use s2m_core::attention::AttentionError;
use s2m_core::compositor::CompositorError;
use s2m_core::consensus::ConsensusError;
use s2m_core::grid::GridError;
use s2m_core::harness::HarnessError;
use s2m_core::metrics::MetricsError;
use s2m_core::rankeval::RankError;
use s2m_core::raster::RasterError;
use s2m_core::sinkhorn::SinkhornError;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn data(kind: &'static str, message: impl Into<String>) -> CliError {
        CliError {
            kind,
            message: message.into(),
        }
    }

    pub fn missing_file(path: &Path) -> CliError {
        CliError::data("missing_file", format!("file not found: {}", path.display()))
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind, "message": self.message }
        })
        .to_string()
    }
}

impl From<ArchiveError> for CliError {
    fn from(e: ArchiveError) -> CliError {
        CliError::data("archive", e.to_string())
    }
}

impl From<AttentionError> for CliError {
    fn from(e: AttentionError) -> CliError {
        let kind = match &e {
            AttentionError::EmptyTokenSet { .. } => "empty_token_set",
            AttentionError::GridMismatch | AttentionError::MaskDimensionMismatch { .. } => {
                "grid_mismatch"
            }
            _ => "attention",
        };
        CliError::data(kind, e.to_string())
    }
}

impl From<CompositorError> for CliError {
    fn from(e: CompositorError) -> CliError {
        let kind = match &e {
            CompositorError::OutOfBounds { .. } => "out_of_bounds",
            _ => "compositor",
        };
        CliError::data(kind, e.to_string())
    }
}

impl From<ConsensusError> for CliError {
    fn from(e: ConsensusError) -> CliError {
        CliError::data("consensus", e.to_string())
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> CliError {
        CliError::data("grid", e.to_string())
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> CliError {
        CliError::data("harness", e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> CliError {
        CliError::data("metrics", e.to_string())
    }
}

impl From<RankError> for CliError {
    fn from(e: RankError) -> CliError {
        CliError::data("rank", e.to_string())
    }
}

impl From<RasterError> for CliError {
    fn from(e: RasterError) -> CliError {
        CliError::data("raster", e.to_string())
    }
}

impl From<SinkhornError> for CliError {
    fn from(e: SinkhornError) -> CliError {
        CliError::data("transport", e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::data("io", e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> CliError {
        CliError::data("json", e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> CliError {
        CliError::data("csv", e.to_string())
    }
}

impl From<image::ImageError> for CliError {
    fn from(e: image::ImageError) -> CliError {
        CliError::data("image", e.to_string())
    }
}
