//! Gated graph network over bond graphs, its GCN comparator, and masked
//! multitask training with per-task best-epoch checkpoints.
//!
//! For K stages, with one linear message map per bond type and stage:
//!
//! ```text
//! h⁰ᵢ   = xᵢ
//! mᵢ    = Σₑ Σ_{j ∈ Nₑ(i)} NNₑ,ₖ(hᵏ⁻¹ⱼ)
//! hᵏᵢ   = GRUₖ(hᵏ⁻¹ᵢ, mᵢ)
//! gᵢ    = σ(i([hᴷᵢ ‖ xᵢ])) ⊙ j(hᴷᵢ)
//! y     = FC(Σᵢ gᵢ)
//! ```

mod batch;
mod config;
mod model;
mod optim;
mod train;

use thiserror::Error;

pub use batch::BatchedGraphs;
pub use config::{Architecture, ModelConfig};
pub use model::{masked_loss, Model};
pub use optim::Adam;
pub use train::{
    predict, predict_with_raw, train_multitask, TaskCheckpoint, TaskTable, TrainingRun,
};

use crate::tensor::container::ContainerError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum PotentialNetError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("feature schema hash {found:#018x} does not match the model's {expected:#018x}")]
    SchemaMismatch { expected: u64, found: u64 },
    #[error("stored parameters do not fit the config: {0}")]
    ParamMismatch(String),
    #[error("no tasks to train")]
    NoTasks,
    #[error("task {0} has no training labels")]
    NoTrainingLabels(String),
    #[error("task {0} needs at least two distinct validation labels")]
    DegenerateValidation(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
