use std::cell::Cell;
use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::AssayDataset;
use crate::featurize::{circular_fingerprint, tanimoto, Fingerprint};

/// Fingerprint radius used by the Tanimoto split.
pub const TANIMOTO_RADIUS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Temporal,
    TemporalMw,
    TemporalTanimoto,
    Ablation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub date_i: NaiveDate,
    pub date_j: NaiveDate,
    #[serde(default = "default_train_max_mw")]
    pub train_max_mw: f64,
    #[serde(default = "default_test_min_mw")]
    pub test_min_mw: f64,
    #[serde(default = "default_tanimoto_cutoff")]
    pub tanimoto_cutoff: f64,
    #[serde(default = "default_keep_fraction")]
    pub ablation_keep_fraction: f64,
}

fn default_train_max_mw() -> f64 {
    500.0
}

fn default_test_min_mw() -> f64 {
    600.0
}

fn default_tanimoto_cutoff() -> f64 {
    0.5
}

fn default_keep_fraction() -> f64 {
    0.6
}

impl SplitSpec {
    pub fn temporal(date_i: NaiveDate, date_j: NaiveDate) -> Self {
        SplitSpec {
            kind: SplitKind::Temporal,
            date_i,
            date_j,
            train_max_mw: default_train_max_mw(),
            test_min_mw: default_test_min_mw(),
            tanimoto_cutoff: default_tanimoto_cutoff(),
            ablation_keep_fraction: default_keep_fraction(),
        }
    }

    pub fn validate(&self) -> Result<(), SplitError> {
        let bad = |m: &str| Err(SplitError::InvalidSpec(m.to_string()));
        if self.date_i >= self.date_j {
            return bad("date_i must precede date_j");
        }
        if !(self.tanimoto_cutoff > 0.0 && self.tanimoto_cutoff <= 1.0) {
            return bad("tanimoto_cutoff must lie in (0, 1]");
        }
        if !(self.ablation_keep_fraction > 0.0 && self.ablation_keep_fraction <= 1.0) {
            return bad("ablation_keep_fraction must lie in (0, 1]");
        }
        if !(self.train_max_mw.is_finite() && self.test_min_mw.is_finite()) {
            return bad("molecular weight thresholds must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("invalid split spec: {0}")]
    InvalidSpec(String),
    #[error("{0} partition is empty")]
    EmptyPartition(&'static str),
}

/// Test indices behind an access counter.
#[derive(Debug)]
pub struct TestPartition {
    indices: Vec<usize>,
    accesses: Cell<usize>,
}

impl TestPartition {
    /// The test indices; every call is counted.
    pub fn open(&self) -> &[usize] {
        self.accesses.set(self.accesses.get() + 1);
        &self.indices
    }

    pub fn access_count(&self) -> usize {
        self.accesses.get()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Record indices of the three partitions.
#[derive(Debug)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: TestPartition,
}

/// `(train, valid, test)` by date alone: before `date_i`, in
/// `[date_i, date_j)`, and from `date_j` on.
fn temporal(ds: &AssayDataset, spec: &SplitSpec) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let (mut tr, mut va, mut te) = (Vec::new(), Vec::new(), Vec::new());
    for (i, r) in ds.records.iter().enumerate() {
        if r.date < spec.date_i {
            tr.push(i);
        } else if r.date < spec.date_j {
            va.push(i);
        } else {
            te.push(i);
        }
    }
    (tr, va, te)
}

/// Largest Tanimoto similarity of each test record to any train record.
pub fn max_train_similarity(ds: &AssayDataset, train: &[usize], test: &[usize]) -> Vec<f64> {
    let mut cache: HashMap<&str, Fingerprint> = HashMap::new();
    let mut fp = |i: usize| {
        let r = &ds.records[i];
        cache
            .entry(r.smiles.as_str())
            .or_insert_with(|| circular_fingerprint(&r.graph, TANIMOTO_RADIUS))
            .clone()
    };
    let mut train_fps: Vec<Fingerprint> = train.iter().map(|&i| fp(i)).collect();
    train_fps.sort_by(|a, b| a.bits().cmp(b.bits()));
    train_fps.dedup();
    test.iter()
        .map(|&i| {
            let f = fp(i);
            train_fps
                .iter()
                .map(|t| tanimoto(&f, t))
                .fold(0.0, f64::max)
        })
        .collect()
}

pub fn split(ds: &AssayDataset, spec: &SplitSpec) -> Result<DatasetSplit, SplitError> {
    spec.validate()?;
    let (mut train, mut valid, mut test) = temporal(ds, spec);
    let mw = |i: usize| ds.records[i].graph.molecular_weight();
    match spec.kind {
        SplitKind::Temporal => {}
        SplitKind::TemporalMw => {
            train.retain(|&i| mw(i) <= spec.train_max_mw);
            valid.retain(|&i| mw(i) <= spec.train_max_mw);
            test.retain(|&i| mw(i) >= spec.test_min_mw);
        }
        SplitKind::TemporalTanimoto => {
            let sims = max_train_similarity(ds, &train, &test);
            test = test
                .into_iter()
                .zip(sims)
                .filter(|&(_, s)| s < spec.tanimoto_cutoff)
                .map(|(i, _)| i)
                .collect();
        }
        SplitKind::Ablation => {
            let mut pool: Vec<usize> = train.iter().chain(&valid).copied().collect();
            pool.sort_by_key(|&i| (ds.records[i].date, i));
            // the epsilon keeps e.g. (1 − 0.9)·10 = 0.99999… from flooring to 0
            let exact = (1.0 - spec.ablation_keep_fraction) * pool.len() as f64;
            let drop = ((exact + 1e-9).floor() as usize).min(pool.len());
            let removed: std::collections::HashSet<usize> =
                pool[pool.len() - drop..].iter().copied().collect();
            train.retain(|i| !removed.contains(i));
            valid.retain(|i| !removed.contains(i));
        }
    }
    for (name, part) in [("train", &train), ("valid", &valid), ("test", &test)] {
        if part.is_empty() {
            return Err(SplitError::EmptyPartition(name));
        }
    }
    Ok(DatasetSplit {
        train,
        valid,
        test: TestPartition {
            indices: test,
            accesses: Cell::new(0),
        },
    })
}
