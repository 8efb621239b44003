//! Miniature convolutional classifiers for multi-family resemblance.

mod checkpoint;
mod layers;
mod network;
mod resample;
mod spec;
mod tensor;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use network::{tiles_to_batch, EpochRecord, TrainedModel};
pub use resample::area_resample;
pub use spec::{BlockFamily, ModelSpec, Stage};
pub use tensor::{output_extent, Tensor};
pub use train::{history_csv, train, LabeledBatch, Optimizer, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },
    #[error("non-finite values: {0}")]
    NonFinite(String),
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("invalid labels: {0}")]
    Label(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training diverged (non-finite loss) in epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("{0}")]
    Empty(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
