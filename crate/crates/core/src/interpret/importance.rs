use serde::{Deserialize, Serialize};

use super::InterpretError;
use crate::featurize::atom_features;
use crate::molgraph::MolecularGraph;
use crate::potentialnet::{BatchedGraphs, PotentialNetError, TaskCheckpoint};
use crate::tensor::{Tape, Tensor};

/// Signed per-atom gradient sums, in graph atom order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomImportance(pub Vec<f64>);

impl AtomImportance {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Magnitudes, for display.
    pub fn absolute(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.abs()).collect()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

fn schema_error(e: PotentialNetError) -> InterpretError {
    match e {
        PotentialNetError::SchemaMismatch { expected, found } => {
            InterpretError::SchemaMismatch { expected, found }
        }
        other => InterpretError::Model(other),
    }
}

/// The checkpoint's rescaled task prediction for `graph` with its atom
/// features replaced by `features` (`num_atoms × feature_dim`).
pub fn output_at(
    ck: &TaskCheckpoint,
    graph: &MolecularGraph,
    features: &Tensor,
) -> Result<f64, InterpretError> {
    let batch = BatchedGraphs::new(&[graph]);
    if features.shape() != batch.x.shape() {
        return Err(InterpretError::FeatureShape {
            expected: batch.x.shape(),
            found: features.shape(),
        });
    }
    let mut tape = Tape::inference();
    let bound = ck.model.params().bind(&mut tape);
    let x = tape.leaf(features.clone());
    let out = ck
        .model
        .forward_on(&mut tape, &bound, x, &batch)
        .map_err(schema_error)?;
    Ok(ck.label_mean + ck.label_std * tape.value(out).get(0, ck.task_index))
}

/// `Imp(atom_i) = Σ_j ∂y/∂X_ij` where `y` is the checkpoint's rescaled
/// prediction for its task.
pub fn atom_importance(
    ck: &TaskCheckpoint,
    graph: &MolecularGraph,
) -> Result<AtomImportance, InterpretError> {
    let batch = BatchedGraphs::new(&[graph]);
    let mut tape = Tape::new();
    let bound = ck.model.params().bind(&mut tape);
    let x = tape.leaf(batch.x.clone());
    let out = ck
        .model
        .forward_on(&mut tape, &bound, x, &batch)
        .map_err(schema_error)?;
    let y = tape.select_col(out, ck.task_index)?;
    let y = tape.scale(y, ck.label_std)?;
    let y = tape.sum_all(y)?;
    let grads = tape.backward(y)?;
    let gx = grads.get_or_zeros(x);
    let imp: Vec<f64> = (0..graph.num_atoms())
        .map(|i| gx.row(i).iter().sum())
        .collect();
    if imp.iter().any(|v| !v.is_finite()) {
        return Err(InterpretError::NonFinite);
    }
    Ok(AtomImportance(imp))
}

/// Atom features of `graph` as a dense matrix.
pub fn feature_matrix(graph: &MolecularGraph) -> Tensor {
    let f = atom_features(graph);
    Tensor::from_vec(f.rows, f.cols(), f.values).expect("feature matrix shape")
}
