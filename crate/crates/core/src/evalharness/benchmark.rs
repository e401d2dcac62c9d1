use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use thiserror::Error;

use super::config::{MethodKind, ResolvedConfig};
use super::report::{
    aggregate, improvement_pair, AssayReport, EvalReport, MethodScore, SkippedAssay, CI_METHOD,
};
use super::split::{split, DatasetSplit, SplitError, SplitKind, TANIMOTO_RADIUS};
use super::{AssayDataset, DatasetError};
use crate::baselines::{fit_mlp, fit_rf, BaselineError, DescriptorMatrix};
use crate::featurize::{apdp_descriptors, DescriptorBag, FINGERPRINT_BITS};
use crate::molgraph::MolecularGraph;
use crate::potentialnet::{
    predict_with_raw, train_multitask, ModelConfig, PotentialNetError, TaskCheckpoint, TaskTable,
};

pub const PREDICTION_COLUMNS: [&str; 6] = [
    "molecule_id",
    "assay",
    "split",
    "actual",
    "predicted_raw",
    "predicted_rescaled",
];

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error("assay {0:?} is not in the dataset")]
    UnknownAssay(String),
    #[error("no assay has enough data in every partition")]
    NoEligibleAssays,
    #[error("{method}: {source}")]
    PotentialNet {
        method: MethodKind,
        source: PotentialNetError,
    },
    #[error("{method} on {assay}: {source}")]
    Baseline {
        method: MethodKind,
        assay: String,
        source: BaselineError,
    },
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Record indices of one assay in each partition.
#[derive(Debug, Clone)]
struct AssayPartition {
    assay: String,
    train: Vec<usize>,
    valid: Vec<usize>,
    test: Vec<usize>,
}

/// A fitted method: per-assay predictors.
enum Fitted {
    Graph(BTreeMap<String, TaskCheckpoint>),
    Descriptor(BTreeMap<String, DescriptorPredictor>),
}

type PredictFn = Box<dyn Fn(&DescriptorMatrix) -> Result<Vec<f64>, BaselineError>>;

struct DescriptorPredictor {
    columns: DescriptorMatrix,
    predict: PredictFn,
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// File stem for an assay: its position in the sorted eligible list plus a
/// filesystem-safe version of its name.
fn assay_stem(index: usize, assay: &str) -> String {
    format!("{index:03}_{}", sanitize(assay))
}

fn partition_by_assay(
    ds: &AssayDataset,
    sp: &DatasetSplit,
    test: Option<&[usize]>,
) -> BTreeMap<String, AssayPartition> {
    let mut out: BTreeMap<String, AssayPartition> = BTreeMap::new();
    let lists: [(&[usize], usize); 3] = [(&sp.train, 0), (&sp.valid, 1), (test.unwrap_or(&[]), 2)];
    for (idx, which) in lists {
        for &i in idx {
            let a = &ds.records[i].assay;
            let p = out.entry(a.clone()).or_insert_with(|| AssayPartition {
                assay: a.clone(),
                train: Vec::new(),
                valid: Vec::new(),
                test: Vec::new(),
            });
            [&mut p.train, &mut p.valid, &mut p.test][which].push(i);
        }
    }
    out
}

fn distinct_values(ds: &AssayDataset, idx: &[usize]) -> usize {
    let mut v: Vec<u64> = idx.iter().map(|&i| ds.records[i].value.to_bits()).collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// Why an assay cannot be scored, if it cannot.
fn ineligibility(ds: &AssayDataset, p: &AssayPartition, check_test: bool) -> Option<String> {
    if p.train.len() < 2 {
        return Some(format!("{} training records (need 2)", p.train.len()));
    }
    if distinct_values(ds, &p.valid) < 2 {
        return Some("validation labels have fewer than 2 distinct values".into());
    }
    if check_test && p.test.len() < 4 {
        return Some(format!(
            "{} test records (need 4 for a confidence interval)",
            p.test.len()
        ));
    }
    None
}

fn task_table(ds: &AssayDataset, idx: &[usize], tasks: &[String]) -> TaskTable {
    let pos: HashMap<&str, usize> = tasks
        .iter()
        .enumerate()
        .map(|(t, a)| (a.as_str(), t))
        .collect();
    let mut row_of: HashMap<&str, usize> = HashMap::new();
    let mut table = TaskTable {
        tasks: tasks.to_vec(),
        ..Default::default()
    };
    for &i in idx {
        let r = &ds.records[i];
        let Some(&t) = pos.get(r.assay.as_str()) else {
            continue;
        };
        let m = *row_of.entry(r.id.as_str()).or_insert_with(|| {
            table.molecules.push(MolecularGraph::clone(&r.graph));
            table.labels.push(vec![None; tasks.len()]);
            table.labels.len() - 1
        });
        table.labels[m][t] = Some(r.value);
    }
    table
}

/// Per-epoch validation curve rows: `(method, run, task, epoch, r2, train_loss)`.
type CurveRow = (MethodKind, String, String, usize, f64, f64);

struct Session<'a> {
    config: &'a ResolvedConfig,
    ds: &'a AssayDataset,
    parts: Vec<AssayPartition>,
    bags: HashMap<usize, DescriptorBag>,
    curves: Vec<CurveRow>,
}

impl Session<'_> {
    fn tasks(&self) -> Vec<String> {
        self.parts.iter().map(|p| p.assay.clone()).collect()
    }

    fn fit_graph_multitask(
        &mut self,
        method: MethodKind,
        cfg: &ModelConfig,
    ) -> Result<Fitted, BenchmarkError> {
        let tasks = self.tasks();
        let train_idx: Vec<usize> = merged(self.parts.iter().map(|p| &p.train));
        let valid_idx: Vec<usize> = merged(self.parts.iter().map(|p| &p.valid));
        let train = task_table(self.ds, &train_idx, &tasks);
        let valid = task_table(self.ds, &valid_idx, &tasks);
        info!(
            "{method}: {} tasks, {} training molecules",
            tasks.len(),
            train.len()
        );
        let run = train_multitask(&train, &valid, &cfg.with_tasks(tasks.len()))
            .map_err(|source| BenchmarkError::PotentialNet { method, source })?;
        for (t, curve) in run.validation_curves.iter().enumerate() {
            for (e, &r2) in curve.iter().enumerate() {
                self.curves.push((
                    method,
                    "multitask".into(),
                    tasks[t].clone(),
                    e,
                    r2,
                    run.train_loss[e],
                ));
            }
        }
        Ok(Fitted::Graph(
            run.checkpoints
                .into_iter()
                .map(|c| (c.task.clone(), c))
                .collect(),
        ))
    }

    fn fit_graph_singletask(
        &mut self,
        method: MethodKind,
        cfg: &ModelConfig,
    ) -> Result<Fitted, BenchmarkError> {
        let mut out = BTreeMap::new();
        for p in &self.parts {
            let tasks = vec![p.assay.clone()];
            let train = task_table(self.ds, &p.train, &tasks);
            let valid = task_table(self.ds, &p.valid, &tasks);
            let run = train_multitask(&train, &valid, &cfg.with_tasks(1))
                .map_err(|source| BenchmarkError::PotentialNet { method, source })?;
            for (e, &r2) in run.validation_curves[0].iter().enumerate() {
                self.curves.push((
                    method,
                    p.assay.clone(),
                    p.assay.clone(),
                    e,
                    r2,
                    run.train_loss[e],
                ));
            }
            let ck = run.checkpoints.into_iter().next().expect("one task");
            out.insert(p.assay.clone(), ck);
        }
        Ok(Fitted::Graph(out))
    }

    fn bag_rows(&mut self, idx: &[usize]) -> Vec<DescriptorBag> {
        idx.iter()
            .map(|&i| {
                self.bags
                    .entry(i)
                    .or_insert_with(|| apdp_descriptors(&self.ds.records[i].graph))
                    .clone()
            })
            .collect()
    }

    fn fit_descriptor(&mut self, method: MethodKind) -> Result<Fitted, BenchmarkError> {
        let mut out = BTreeMap::new();
        let run = &self.config.run;
        for p in self.parts.clone() {
            let err = |source| BenchmarkError::Baseline {
                method,
                assay: p.assay.clone(),
                source,
            };
            let bags = self.bag_rows(&p.train);
            let x = DescriptorMatrix::build(&bags).map_err(err)?;
            let y: Vec<f64> = p.train.iter().map(|&i| self.ds.records[i].value).collect();
            let predict: PredictFn = match method {
                MethodKind::RfSklearn | MethodKind::RfMix => {
                    let cfg = if method == MethodKind::RfSklearn {
                        &run.rf_sklearn
                    } else {
                        &run.rf_mix
                    };
                    let model = fit_rf(&x, &y, cfg).map_err(err)?;
                    let dir = run.output_dir.join("models").join(method.name());
                    fs::create_dir_all(&dir)?;
                    let stem = assay_stem(self.index_of(&p.assay), &p.assay);
                    fs::write(
                        dir.join(format!("{stem}.json")),
                        model.to_json().map_err(err)?,
                    )?;
                    Box::new(move |m| model.predict(m))
                }
                MethodKind::Mlp => {
                    let model = fit_mlp(&x, &y, &run.mlp).map_err(err)?;
                    Box::new(move |m| model.predict(m))
                }
                _ => unreachable!("graph methods are fitted elsewhere"),
            };
            out.insert(
                p.assay.clone(),
                DescriptorPredictor {
                    columns: DescriptorMatrix {
                        columns: x.columns,
                        rows: Vec::new(),
                    },
                    predict,
                },
            );
        }
        Ok(Fitted::Descriptor(out))
    }

    fn index_of(&self, assay: &str) -> usize {
        self.parts
            .iter()
            .position(|p| p.assay == assay)
            .expect("eligible assay")
    }

    fn fit(&mut self, method: MethodKind) -> Result<Fitted, BenchmarkError> {
        let run = &self.config.run;
        let fitted = match method {
            MethodKind::Potentialnet => {
                let cfg = run.potentialnet.clone();
                self.fit_graph_multitask(method, &cfg)?
            }
            MethodKind::Gcnn => {
                let cfg = run.gcnn.clone();
                self.fit_graph_multitask(method, &cfg)?
            }
            MethodKind::PotentialnetSingletask => {
                let cfg = run.potentialnet.clone();
                self.fit_graph_singletask(method, &cfg)?
            }
            MethodKind::RfSklearn | MethodKind::RfMix | MethodKind::Mlp => {
                self.fit_descriptor(method)?
            }
        };
        if let Fitted::Graph(cks) = &fitted {
            let dir = self
                .config
                .run
                .output_dir
                .join("checkpoints")
                .join(method.name());
            for (assay, ck) in cks {
                ck.save(&dir, &assay_stem(self.index_of(assay), assay))
                    .map_err(|source| BenchmarkError::PotentialNet { method, source })?;
            }
        }
        Ok(fitted)
    }

    /// `(raw, rescaled)` predictions of `method` for records `idx` of `assay`.
    fn predict(
        &mut self,
        method: MethodKind,
        fitted: &Fitted,
        assay: &str,
        idx: &[usize],
    ) -> Result<Vec<(f64, f64)>, BenchmarkError> {
        match fitted {
            Fitted::Graph(cks) => {
                let graphs: Vec<MolecularGraph> = idx
                    .iter()
                    .map(|&i| MolecularGraph::clone(&self.ds.records[i].graph))
                    .collect();
                predict_with_raw(&cks[assay], &graphs)
                    .map_err(|source| BenchmarkError::PotentialNet { method, source })
            }
            Fitted::Descriptor(models) => {
                let m = &models[assay];
                let bags = self.bag_rows(idx);
                let x = m.columns.transform(&bags);
                let y = (m.predict)(&x).map_err(|source| BenchmarkError::Baseline {
                    method,
                    assay: assay.to_string(),
                    source,
                })?;
                Ok(y.into_iter().map(|v| (v, v)).collect())
            }
        }
    }

    fn write_curves(&self) -> Result<(), BenchmarkError> {
        let mut w = csv::Writer::from_path(self.config.run.output_dir.join("curves.csv"))?;
        w.write_record([
            "method",
            "run",
            "task",
            "epoch",
            "validation_r2",
            "train_loss",
        ])?;
        for (m, run, task, e, r2, loss) in &self.curves {
            w.write_record([
                m.name(),
                run,
                task,
                &e.to_string(),
                &r2.to_string(),
                &loss.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn merged<'a>(lists: impl Iterator<Item = &'a Vec<usize>>) -> Vec<usize> {
    let mut v: Vec<usize> = lists.flatten().copied().collect();
    v.sort_unstable();
    v
}

fn load_dataset(config: &ResolvedConfig) -> Result<AssayDataset, BenchmarkError> {
    let mut ds = AssayDataset::load(&config.run.dataset)?;
    if let Some(wanted) = &config.run.assays {
        let present = ds.assays();
        for a in wanted {
            if !present.contains(a) {
                return Err(BenchmarkError::UnknownAssay(a.clone()));
            }
        }
        ds.records.retain(|r| wanted.contains(&r.assay));
    }
    Ok(ds)
}

fn write_common(config: &ResolvedConfig, ds: &AssayDataset) -> Result<(), BenchmarkError> {
    let out = &config.run.output_dir;
    fs::create_dir_all(out)?;
    fs::write(out.join("run_config.json"), config.to_json())?;
    fs::write(out.join("rejections.csv"), ds.rejections_csv()?)?;
    Ok(())
}

fn prepare<'a>(
    config: &'a ResolvedConfig,
    ds: &'a AssayDataset,
    sp: &DatasetSplit,
    test: Option<&[usize]>,
) -> Result<(Session<'a>, Vec<SkippedAssay>), BenchmarkError> {
    let mut parts = Vec::new();
    let mut skipped = Vec::new();
    for (assay, p) in partition_by_assay(ds, sp, test) {
        match ineligibility(ds, &p, test.is_some()) {
            Some(reason) => skipped.push(SkippedAssay { assay, reason }),
            None => parts.push(p),
        }
    }
    if parts.is_empty() {
        return Err(BenchmarkError::NoEligibleAssays);
    }
    let session = Session {
        config,
        ds,
        parts,
        bags: HashMap::new(),
        curves: Vec::new(),
    };
    Ok((session, skipped))
}

/// Fits every configured method on the train/valid partitions, writing
/// checkpoints, model files and `curves.csv`; the test partition is never
/// opened.
pub fn run_training(config: &ResolvedConfig) -> Result<Vec<SkippedAssay>, BenchmarkError> {
    let ds = load_dataset(config)?;
    let sp = split(&ds, &config.run.split)?;
    write_common(config, &ds)?;
    let (mut session, skipped) = prepare(config, &ds, &sp, None)?;
    for &m in &config.run.methods {
        session.fit(m)?;
    }
    session.write_curves()?;
    Ok(skipped)
}

/// Trains every configured method on identical splits, scores each once on
/// the test partition and writes the report, prediction dumps, curves and
/// checkpoints under the output directory.
pub fn run_benchmark(config: &ResolvedConfig) -> Result<EvalReport, BenchmarkError> {
    let run = &config.run;
    let ds = load_dataset(config)?;
    let sp = split(&ds, &run.split)?;
    write_common(config, &ds)?;
    let test: Vec<usize> = sp.test.open().to_vec();
    let (mut session, skipped) = prepare(config, &ds, &sp, Some(&test))?;
    for s in &skipped {
        info!("skipping assay {}: {}", s.assay, s.reason);
    }

    let methods: Vec<String> = run.methods.iter().map(|m| m.name().to_string()).collect();
    let mut scores: BTreeMap<String, Vec<MethodScore>> = BTreeMap::new();
    for &method in &run.methods {
        let fitted = session.fit(method)?;
        let path = run
            .output_dir
            .join(format!("predictions_{}.csv", method.name()));
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(PREDICTION_COLUMNS)?;
        for p in session.parts.clone() {
            let pred = session.predict(method, &fitted, &p.assay, &p.test)?;
            let actual: Vec<f64> = p.test.iter().map(|&i| ds.records[i].value).collect();
            let rescaled: Vec<f64> = pred.iter().map(|x| x.1).collect();
            scores
                .entry(p.assay.clone())
                .or_default()
                .push(MethodScore::compute(method.name(), &rescaled, &actual));
            for (k, &i) in p.test.iter().enumerate() {
                w.write_record([
                    ds.records[i].id.as_str(),
                    &p.assay,
                    "test",
                    &actual[k].to_string(),
                    &pred[k].0.to_string(),
                    &pred[k].1.to_string(),
                ])?;
            }
        }
        w.flush()?;
    }
    session.write_curves()?;

    let pair = improvement_pair(&methods);
    let assays: Vec<AssayReport> = session
        .parts
        .iter()
        .map(|p| {
            AssayReport {
                assay: p.assay.clone(),
                n_train: p.train.len(),
                n_valid: p.valid.len(),
                n_test: p.test.len(),
                scores: scores.remove(&p.assay).unwrap_or_default(),
                improvement: None,
            }
            .with_improvement(pair)
        })
        .collect();
    let report = EvalReport {
        aggregate: aggregate(&methods, &assays),
        methods,
        split: run.split.clone(),
        ci_method: CI_METHOD.to_string(),
        fingerprint: (run.split.kind == SplitKind::TemporalTanimoto)
            .then(|| format!("circular, radius {TANIMOTO_RADIUS}, {FINGERPRINT_BITS} bits")),
        seed: run.seed,
        seed_source: config.seed_source.clone(),
        test_accesses: sp.test.access_count(),
        assays,
        skipped,
        config: config.to_json_value(),
    };
    fs::write(run.output_dir.join("report.json"), report.to_json())?;
    fs::write(run.output_dir.join("report.csv"), report.to_csv())?;
    Ok(report)
}

/// Paths of the files a benchmark run writes, relative to the output directory.
pub fn output_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d)? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).expect("under dir").to_path_buf());
            }
        }
    }
    out.sort();
    Ok(out)
}
