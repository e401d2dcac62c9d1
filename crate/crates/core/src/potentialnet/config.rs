use serde::{Deserialize, Serialize};

use super::PotentialNetError;
use crate::featurize::ATOM_FEATURE_DIM;
use crate::molgraph::BondOrder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Gated graph stages with GRU updates and a gated gather.
    PotentialNet,
    /// `ReLU((A + I)·H·W)` stages with a plain sum gather.
    Gcnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub k_layers: usize,
    pub state_dim: usize,
    pub gather_dim: usize,
    /// Widths of the fully connected head; the last entry is the task count.
    pub fc_dims: Vec<usize>,
    pub n_edge_types: usize,
    /// Linear map from the atom features to `state_dim` before the first
    /// stage. Off means `h⁰ = X` and `state_dim` must equal the feature width.
    pub input_embedding: bool,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            architecture: Architecture::PotentialNet,
            k_layers: 2,
            state_dim: ATOM_FEATURE_DIM,
            gather_dim: 64,
            fc_dims: vec![64, 1],
            n_edge_types: BondOrder::COUNT,
            input_embedding: false,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            epsilon: 1e-8,
            epochs: 100,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn n_tasks(&self) -> usize {
        self.fc_dims.last().copied().unwrap_or(0)
    }

    /// Copy of this config whose output layer has `n` units.
    pub fn with_tasks(&self, n: usize) -> Self {
        let mut c = self.clone();
        match c.fc_dims.last_mut() {
            Some(last) => *last = n,
            None => c.fc_dims.push(n),
        }
        c
    }

    pub fn validate(&self, feature_dim: usize) -> Result<(), PotentialNetError> {
        let bad = |msg: String| Err(PotentialNetError::InvalidConfig(msg));
        if self.k_layers == 0 {
            return bad("k_layers must be at least 1".into());
        }
        if self.state_dim == 0 || self.gather_dim == 0 {
            return bad("state_dim and gather_dim must be positive".into());
        }
        if self.fc_dims.is_empty() || self.fc_dims.contains(&0) {
            return bad("fc_dims must be non-empty with positive widths".into());
        }
        if self.n_edge_types != BondOrder::COUNT {
            return bad(format!("n_edge_types must be {}", BondOrder::COUNT));
        }
        if self.architecture == Architecture::PotentialNet
            && !self.input_embedding
            && self.state_dim != feature_dim
        {
            return bad(format!(
                "state_dim {} must equal the feature width {feature_dim} without input_embedding",
                self.state_dim
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)".into());
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("epsilon must be positive".into());
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive".into());
        }
        Ok(())
    }
}
