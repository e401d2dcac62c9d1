use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_data, BaselineError, DescriptorMatrix};
use crate::potentialnet::Adam;
use crate::tensor::{dropout, glorot_uniform, linear, ParamSet, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![1000, 500],
            dropout: 0.25,
            epochs: 75,
            batch_size: 32,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

/// ReLU network on max-scaled descriptor counts. The output layer starts
/// with zero weights and its bias at the training mean, so an untrained
/// model predicts that mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub columns: Vec<String>,
    /// Per-column divisor `max(1, training max)`.
    pub scale: Vec<f64>,
    pub config: MlpConfig,
    /// `(weight, bias)` per layer, input side first.
    pub layers: Vec<(Tensor, Tensor)>,
}

impl MlpModel {
    pub(crate) fn scaled(&self, x: &DescriptorMatrix, rows: &[usize]) -> Tensor {
        let m = self.scale.len();
        let mut data = Vec::with_capacity(rows.len() * m);
        for &i in rows {
            data.extend(x.rows[i].iter().zip(&self.scale).map(|(v, s)| v / s));
        }
        Tensor::from_vec(rows.len(), m, data).expect("row width")
    }

    fn params(&self) -> ParamSet {
        let mut p = ParamSet::new();
        for (l, (w, b)) in self.layers.iter().enumerate() {
            p.push(format!("mlp{l}.w"), w.clone());
            p.push(format!("mlp{l}.b"), b.clone());
        }
        p
    }

    /// Network output on `tape` with layer weights bound at `bound`
    /// (weight, bias alternating).
    pub fn forward_on(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        x: Var,
        training: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Var, BaselineError> {
        let last = self.layers.len() - 1;
        let mut h = x;
        for l in 0..self.layers.len() {
            h = linear(tape, h, bound[2 * l], Some(bound[2 * l + 1]))?;
            if l < last {
                h = tape.relu(h)?;
                h = dropout(tape, h, self.config.dropout, training, rng)?;
            }
        }
        Ok(h)
    }

    pub fn predict(&self, x: &DescriptorMatrix) -> Result<Vec<f64>, BaselineError> {
        if x.columns != self.columns {
            return Err(BaselineError::SchemaMismatch);
        }
        let mut tape = Tape::inference();
        let params = self.params();
        let bound = params.bind(&mut tape);
        let rows: Vec<usize> = (0..x.n_rows()).collect();
        let xv = tape.leaf(self.scaled(x, &rows));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = self.forward_on(&mut tape, &bound, xv, false, &mut rng)?;
        Ok(tape.value(out).data().to_vec())
    }
}

pub fn fit_mlp(
    x: &DescriptorMatrix,
    y: &[f64],
    config: &MlpConfig,
) -> Result<MlpModel, BaselineError> {
    check_training_data(x, y)?;
    if !(0.0..1.0).contains(&config.dropout) || config.batch_size == 0 || config.hidden.contains(&0)
    {
        return Err(BaselineError::InvalidConfig(
            "dropout must lie in [0, 1); batch_size and widths must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let m = x.n_cols();
    let scale: Vec<f64> = (0..m)
        .map(|c| x.rows.iter().map(|r| r[c]).fold(1.0, f64::max))
        .collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut layers = Vec::new();
    let mut fan_in = m;
    for &w in &config.hidden {
        layers.push((glorot_uniform(&mut rng, fan_in, w), Tensor::zeros(1, w)));
        fan_in = w;
    }
    layers.push((Tensor::zeros(fan_in, 1), Tensor::scalar(mean)));
    let mut model = MlpModel {
        columns: x.columns.clone(),
        scale,
        config: config.clone(),
        layers,
    };

    let mut params = model.params();
    let mut adam = Adam::new(
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.epsilon,
    );
    let mut order: Vec<usize> = (0..x.n_rows()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for idx in order.chunks(config.batch_size) {
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let xv = tape.leaf(model.scaled(x, idx));
            let out = model.forward_on(&mut tape, &bound, xv, true, &mut rng)?;
            let target = Tensor::from_vec(idx.len(), 1, idx.iter().map(|&i| y[i]).collect())?;
            let diff = tape.sub_const(out, &target)?;
            let sq = tape.hadamard(diff, diff)?;
            let total = tape.sum_all(sq)?;
            let loss = tape.scale(total, 1.0 / idx.len() as f64)?;
            let grads = tape.backward(loss)?;
            params.zero_grad();
            params.accumulate(&grads, &bound);
            adam.step(&mut params);
        }
    }
    for (l, layer) in model.layers.iter_mut().enumerate() {
        layer.0 = params.get(2 * l).value.clone();
        layer.1 = params.get(2 * l + 1).value.clone();
    }
    Ok(model)
}
