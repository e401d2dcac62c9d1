use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{masked_loss, Adam, BatchedGraphs, Model, ModelConfig, PotentialNetError};
use crate::evalharness::metrics::pearson_r2;
use crate::featurize::{atom_features, AtomFeatureMatrix};
use crate::molgraph::MolecularGraph;
use crate::tensor::{container, Tape, Tensor};

const PREDICT_CHUNK: usize = 256;

/// Molecules with a possibly sparse label matrix, one column per task.
#[derive(Debug, Clone, Default)]
pub struct TaskTable {
    pub tasks: Vec<String>,
    pub molecules: Vec<MolecularGraph>,
    /// `labels[molecule][task]`, `None` where unmeasured.
    pub labels: Vec<Vec<Option<f64>>>,
}

impl TaskTable {
    pub fn len(&self) -> usize {
        self.molecules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.molecules.is_empty()
    }

    fn column(&self, t: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter_map(move |(i, row)| row[t].map(|v| (i, v)))
    }

    /// The single-task table of column `t`, keeping only labelled molecules.
    pub fn single_task(&self, t: usize) -> TaskTable {
        let mut out = TaskTable {
            tasks: vec![self.tasks[t].clone()],
            ..Default::default()
        };
        for (i, v) in self.column(t) {
            out.molecules.push(self.molecules[i].clone());
            out.labels.push(vec![Some(v)]);
        }
        out
    }
}

/// Weights frozen at the epoch where one task validated best.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskCheckpoint {
    pub task: String,
    pub task_index: usize,
    /// Validation Pearson R² at `best_epoch`.
    pub best_score: f64,
    pub best_epoch: usize,
    pub label_mean: f64,
    pub label_std: f64,
    pub model: Model,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub checkpoints: Vec<TaskCheckpoint>,
    /// `validation_curves[task][epoch]`.
    pub validation_curves: Vec<Vec<f64>>,
    /// Mean mini-batch loss per epoch on the standardized scale.
    pub train_loss: Vec<f64>,
}

fn featurize_all(graphs: &[MolecularGraph]) -> Vec<AtomFeatureMatrix> {
    graphs.iter().map(atom_features).collect()
}

fn batch_of(
    graphs: &[MolecularGraph],
    feats: &[AtomFeatureMatrix],
    idx: &[usize],
) -> BatchedGraphs {
    let items: Vec<_> = idx.iter().map(|&i| (&graphs[i], &feats[i])).collect();
    BatchedGraphs::from_featurized(&items)
}

fn standardization(table: &TaskTable, t: usize) -> Result<(f64, f64), PotentialNetError> {
    let vals: Vec<f64> = table.column(t).map(|(_, v)| v).collect();
    if vals.is_empty() {
        return Err(PotentialNetError::NoTrainingLabels(table.tasks[t].clone()));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    Ok((mean, if std > 0.0 { std } else { 1.0 }))
}

fn predict_standardized(
    model: &Model,
    graphs: &[MolecularGraph],
    feats: &[AtomFeatureMatrix],
) -> Result<Tensor, PotentialNetError> {
    let n_tasks = model.n_tasks();
    let mut data = Vec::with_capacity(graphs.len() * n_tasks);
    let idx: Vec<usize> = (0..graphs.len()).collect();
    for chunk in idx.chunks(PREDICT_CHUNK) {
        let out = model.forward(&batch_of(graphs, feats, chunk))?;
        data.extend_from_slice(out.data());
    }
    Ok(Tensor::from_vec(graphs.len(), n_tasks, data)?)
}

/// Trains one shared network on every task of `train` and keeps, per task,
/// the weights of the epoch with the highest validation Pearson R².
///
/// Labels are standardized per task on training statistics. An epoch whose
/// predictions are constant on a task scores 0 for that task.
pub fn train_multitask(
    train: &TaskTable,
    valid: &TaskTable,
    config: &ModelConfig,
) -> Result<TrainingRun, PotentialNetError> {
    let n_tasks = train.tasks.len();
    if n_tasks == 0 {
        return Err(PotentialNetError::NoTasks);
    }
    if valid.tasks != train.tasks {
        return Err(PotentialNetError::InvalidConfig(
            "train and validation task lists differ".into(),
        ));
    }
    if config.n_tasks() != n_tasks {
        return Err(PotentialNetError::InvalidConfig(format!(
            "fc_dims ends in {} but the data has {n_tasks} tasks",
            config.n_tasks()
        )));
    }
    let stats: Vec<(f64, f64)> = (0..n_tasks)
        .map(|t| standardization(train, t))
        .collect::<Result<_, _>>()?;
    let mut valid_cols: Vec<(Vec<usize>, Vec<f64>)> = Vec::with_capacity(n_tasks);
    for t in 0..n_tasks {
        let (rows, vals): (Vec<usize>, Vec<f64>) = valid.column(t).unzip();
        let distinct = vals.iter().any(|v| *v != vals[0]);
        if vals.len() < 2 || !distinct {
            return Err(PotentialNetError::DegenerateValidation(
                train.tasks[t].clone(),
            ));
        }
        valid_cols.push((rows, vals));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::with_rng(config, &mut rng)?;
    let mut adam = Adam::new(
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.epsilon,
    );
    let train_feats = featurize_all(&train.molecules);
    let valid_feats = featurize_all(&valid.molecules);

    let mut labels = Tensor::zeros(train.len(), n_tasks);
    let mut mask = Tensor::zeros(train.len(), n_tasks);
    for (i, row) in train.labels.iter().enumerate() {
        for (t, v) in row.iter().enumerate() {
            if let Some(v) = v {
                let (mu, sd) = stats[t];
                labels.set(i, t, (v - mu) / sd);
                mask.set(i, t, 1.0);
            }
        }
    }

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut curves = vec![Vec::with_capacity(config.epochs); n_tasks];
    let mut best: Vec<Option<TaskCheckpoint>> = vec![None; n_tasks];
    let mut train_loss = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for idx in order.chunks(config.batch_size) {
            let batch = batch_of(&train.molecules, &train_feats, idx);
            let mut y = Tensor::zeros(idx.len(), n_tasks);
            let mut m = Tensor::zeros(idx.len(), n_tasks);
            for (r, &i) in idx.iter().enumerate() {
                for t in 0..n_tasks {
                    y.set(r, t, labels.get(i, t));
                    m.set(r, t, mask.get(i, t));
                }
            }
            let mut tape = Tape::new();
            let bound = model.params().bind(&mut tape);
            let x = tape.leaf(batch.x.clone());
            let pred = model.forward_on(&mut tape, &bound, x, &batch)?;
            let loss = masked_loss(&mut tape, pred, &y, &m)?;
            loss_sum += tape.value(loss).item().unwrap_or(0.0);
            batches += 1;
            let grads = tape.backward(loss)?;
            model.params_mut().zero_grad();
            model.params_mut().accumulate(&grads, &bound);
            adam.step(model.params_mut());
        }
        train_loss.push(loss_sum / batches.max(1) as f64);

        let preds = predict_standardized(&model, &valid.molecules, &valid_feats)?;
        for t in 0..n_tasks {
            let (rows, actual) = &valid_cols[t];
            let p: Vec<f64> = rows.iter().map(|&i| preds.get(i, t)).collect();
            let score = pearson_r2(&p, actual).unwrap_or(0.0);
            curves[t].push(score);
            let improved = best[t].as_ref().is_none_or(|b| score > b.best_score);
            if improved {
                let (mu, sd) = stats[t];
                let mut snapshot = model.clone();
                snapshot.params_mut().zero_grad();
                best[t] = Some(TaskCheckpoint {
                    task: train.tasks[t].clone(),
                    task_index: t,
                    best_score: score,
                    best_epoch: epoch,
                    label_mean: mu,
                    label_std: sd,
                    model: snapshot,
                });
            }
        }
        log::debug!("epoch {epoch}: loss {:.5}", train_loss[epoch]);
    }

    Ok(TrainingRun {
        checkpoints: best.into_iter().map(|b| b.expect("epochs >= 1")).collect(),
        validation_curves: curves,
        train_loss,
    })
}

/// Predictions for `graphs` in assay units: `μ + σ·ŷ`.
pub fn predict(
    checkpoint: &TaskCheckpoint,
    graphs: &[MolecularGraph],
) -> Result<Vec<f64>, PotentialNetError> {
    Ok(predict_with_raw(checkpoint, graphs)?
        .into_iter()
        .map(|(_, y)| y)
        .collect())
}

/// `(standardized, rescaled)` prediction pairs.
pub fn predict_with_raw(
    checkpoint: &TaskCheckpoint,
    graphs: &[MolecularGraph],
) -> Result<Vec<(f64, f64)>, PotentialNetError> {
    let feats = featurize_all(graphs);
    let out = predict_standardized(&checkpoint.model, graphs, &feats)?;
    let t = checkpoint.task_index;
    Ok((0..graphs.len())
        .map(|i| {
            let raw = out.get(i, t);
            (raw, checkpoint.label_mean + checkpoint.label_std * raw)
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointMeta {
    task: String,
    task_index: usize,
    best_validation_r2: f64,
    best_epoch: usize,
    label_mean: f64,
    label_std: f64,
    feature_schema_hash: u64,
    config: ModelConfig,
}

fn sidecar_path(params_path: &Path) -> PathBuf {
    params_path.with_extension("json")
}

impl TaskCheckpoint {
    /// Writes `<stem>.params` (binary container) and `<stem>.json` (metadata)
    /// into `dir`; returns the container path.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<PathBuf, PotentialNetError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{stem}.params"));
        fs::write(
            &path,
            container::encode(self.model.params(), self.model.schema_hash()),
        )?;
        let meta = CheckpointMeta {
            task: self.task.clone(),
            task_index: self.task_index,
            best_validation_r2: self.best_score,
            best_epoch: self.best_epoch,
            label_mean: self.label_mean,
            label_std: self.label_std,
            feature_schema_hash: self.model.schema_hash(),
            config: self.model.config().clone(),
        };
        let mut json = serde_json::to_string_pretty(&meta)?;
        json.push('\n');
        fs::write(sidecar_path(&path), json)?;
        Ok(path)
    }

    /// Loads a checkpoint from its `.params` path (the sidecar sits next to it).
    pub fn load(params_path: &Path) -> Result<Self, PotentialNetError> {
        let meta: CheckpointMeta =
            serde_json::from_str(&fs::read_to_string(sidecar_path(params_path))?)?;
        let bytes = fs::read(params_path)?;
        let (params, hash) = container::decode(&bytes)?;
        if hash != meta.feature_schema_hash {
            return Err(PotentialNetError::SchemaMismatch {
                expected: meta.feature_schema_hash,
                found: hash,
            });
        }
        let model = Model::from_params(&meta.config, params)?;
        if model.schema_hash() != hash {
            return Err(PotentialNetError::SchemaMismatch {
                expected: model.schema_hash(),
                found: hash,
            });
        }
        if meta.task_index >= model.n_tasks() {
            return Err(PotentialNetError::InvalidConfig(format!(
                "task_index {} beyond {} outputs",
                meta.task_index,
                model.n_tasks()
            )));
        }
        Ok(TaskCheckpoint {
            task: meta.task,
            task_index: meta.task_index,
            best_score: meta.best_validation_r2,
            best_epoch: meta.best_epoch,
            label_mean: meta.label_mean,
            label_std: meta.label_std,
            model,
        })
    }
}
