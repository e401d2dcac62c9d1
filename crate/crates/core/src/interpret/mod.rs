//! Input-gradient atom importance and the best-scoring connected
//! substructure.
//!
//! ```text
//! Imp(atom_i) = Σ_j ∂y/∂X_ij
//! G* = argmax over connected induced subgraphs G' with |G'| = S of Σ_{i∈G'} Imp(atom_i)
//! ```

mod importance;
mod substructure;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use importance::{atom_importance, feature_matrix, output_at, AtomImportance};
pub use substructure::{
    for_each_connected_subset, top_substructure, SearchMode, SubgraphResult, EXACT_MAX_ATOMS,
    EXACT_MAX_SIZE,
};

use crate::potentialnet::PotentialNetError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum InterpretError {
    #[error("feature schema {found:#x} does not match the checkpoint's {expected:#x}")]
    SchemaMismatch { expected: u64, found: u64 },
    #[error("SizeOutOfRange: subgraph size {size} outside 1..={n_atoms}")]
    SizeOutOfRange { size: usize, n_atoms: usize },
    #[error(
        "ExactModeLimitExceeded: exact search allows at most {EXACT_MAX_ATOMS} atoms and size {EXACT_MAX_SIZE} \
         (got {n_atoms} atoms, size {size}); rerun in greedy mode"
    )]
    ExactModeLimitExceeded { size: usize, n_atoms: usize },
    #[error("no connected subgraph of {size} atoms")]
    NoConnectedSubgraph { size: usize },
    #[error("{importances} importances for {atoms} atoms")]
    LengthMismatch { atoms: usize, importances: usize },
    #[error("feature matrix is {found:?}, expected {expected:?}")]
    FeatureShape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("importance is not finite")]
    NonFinite,
    #[error(transparent)]
    Model(PotentialNetError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl InterpretError {
    pub fn name(&self) -> &'static str {
        match self {
            InterpretError::SchemaMismatch { .. } => "SchemaMismatch",
            InterpretError::SizeOutOfRange { .. } => "SizeOutOfRange",
            InterpretError::ExactModeLimitExceeded { .. } => "ExactModeLimitExceeded",
            InterpretError::NoConnectedSubgraph { .. } => "NoConnectedSubgraph",
            InterpretError::LengthMismatch { .. } => "LengthMismatch",
            InterpretError::FeatureShape { .. } => "FeatureShape",
            InterpretError::NonFinite => "NonFinite",
            InterpretError::Model(_) => "Model",
            InterpretError::Tensor(_) => "Tensor",
        }
    }
}

/// The JSON document written by the `interpret` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpretation {
    pub smiles: String,
    pub task: String,
    /// Rescaled prediction for the task.
    pub prediction: f64,
    pub importance: Vec<f64>,
    pub abs_importance: Vec<f64>,
    pub size: usize,
    pub mode: SearchMode,
    pub substructure: Vec<usize>,
    pub score: f64,
}
