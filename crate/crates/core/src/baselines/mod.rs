//! Fixed-descriptor comparators: a CART random forest and a dropout MLP,
//! both on atom-pair / donor-acceptor count matrices.

mod forest;
mod matrix;
mod mlp;

use thiserror::Error;

pub use forest::{
    best_split_in_column, fit_rf, fit_tree, MtryMode, RandomForestModel, RegressionTree, RfConfig,
    Split,
};
pub use matrix::DescriptorMatrix;
pub use mlp::{fit_mlp, MlpConfig, MlpModel};

use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("no molecules given")]
    EmptyInput,
    #[error("need at least two training rows, got {0}")]
    TooFewRows(usize),
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("training labels must be finite")]
    NonFiniteTarget,
    #[error("descriptor columns differ from the training schema")]
    SchemaMismatch,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn check_training_data(x: &DescriptorMatrix, y: &[f64]) -> Result<(), BaselineError> {
    if x.n_rows() != y.len() {
        return Err(BaselineError::LengthMismatch {
            rows: x.n_rows(),
            labels: y.len(),
        });
    }
    if y.len() < 2 {
        return Err(BaselineError::TooFewRows(y.len()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(BaselineError::NonFiniteTarget);
    }
    Ok(())
}
