use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training_data, BaselineError, DescriptorMatrix};

/// Candidate columns drawn at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MtryMode {
    /// `floor(sqrt(M))`
    Sqrt,
    /// `floor(M / 3)`
    Third,
    All,
}

impl MtryMode {
    pub fn count(self, m: usize) -> usize {
        let k = match self {
            MtryMode::Sqrt => (m as f64).sqrt().floor() as usize,
            MtryMode::Third => m / 3,
            MtryMode::All => m,
        };
        k.clamp(1, m.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfConfig {
    pub n_trees: usize,
    pub mtry_mode: MtryMode,
    pub min_leaf: usize,
    #[serde(default = "default_true")]
    pub bootstrap: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

impl RfConfig {
    /// 500 trees, sqrt(M) candidates, leaves of one.
    pub fn sklearn(seed: u64) -> Self {
        RfConfig {
            n_trees: 500,
            mtry_mode: MtryMode::Sqrt,
            min_leaf: 1,
            bootstrap: true,
            seed,
        }
    }

    /// 100 trees, M/3 candidates, leaves of at least five.
    pub fn mix(seed: u64) -> Self {
        RfConfig {
            n_trees: 100,
            mtry_mode: MtryMode::Third,
            min_leaf: 5,
            bootstrap: true,
            seed,
        }
    }

    fn validate(&self) -> Result<(), BaselineError> {
        if self.n_trees == 0 || self.min_leaf == 0 {
            return Err(BaselineError::InvalidConfig(
                "n_trees and min_leaf must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Regression tree as parallel node arrays. A node is a leaf when
/// `feature[n] < 0`; otherwise rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
    pub samples: Vec<u32>,
}

impl RegressionTree {
    fn push_leaf(&mut self, value: f64, samples: usize) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.samples.push(samples as u32);
        self.feature.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.feature.iter().filter(|&&f| f < 0).count()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut n = 0;
        while self.feature[n] >= 0 {
            n = if row[self.feature[n] as usize] <= self.threshold[n] {
                self.left[n] as usize
            } else {
                self.right[n] as usize
            };
        }
        self.value[n]
    }
}

/// Best split found for one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub column: usize,
    pub threshold: f64,
    pub score: f64,
}

const TIE_TOLERANCE: f64 = 1e-12;

fn sse(sum: f64, sum_sq: f64, n: f64) -> f64 {
    (sum_sq - sum * sum / n).max(0.0)
}

/// Scans one column for the threshold minimising `SSE_left + SSE_right`,
/// with both sides holding at least `min_leaf` samples. Thresholds are
/// midpoints between consecutive distinct values. Returns `None` when the
/// column is constant on `idx` or no threshold respects `min_leaf`.
pub fn best_split_in_column(
    x: &[Vec<f64>],
    y: &[f64],
    idx: &[usize],
    column: usize,
    min_leaf: usize,
) -> Option<Split> {
    let mut pairs: Vec<(f64, f64)> = idx.iter().map(|&i| (x[i][column], y[i])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    if n < 2 || pairs[0].0 == pairs[n - 1].0 {
        return None;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let total_sq: f64 = pairs.iter().map(|p| p.1 * p.1).sum();
    let (mut s, mut sq) = (0.0, 0.0);
    let mut best: Option<Split> = None;
    for k in 0..n - 1 {
        s += pairs[k].1;
        sq += pairs[k].1 * pairs[k].1;
        let left = k + 1;
        if pairs[k].0 == pairs[k + 1].0 || left < min_leaf || n - left < min_leaf {
            continue;
        }
        let score = sse(s, sq, left as f64) + sse(total - s, total_sq - sq, (n - left) as f64);
        if best.is_none_or(|b| score < b.score - TIE_TOLERANCE * b.score.abs().max(1.0)) {
            best = Some(Split {
                column,
                threshold: 0.5 * (pairs[k].0 + pairs[k + 1].0),
                score,
            });
        }
    }
    best
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    /// Column indices in name order; positions in this list are the ranks
    /// used for candidate draws and tie-breaks.
    ranked: &'a [usize],
    mtry: usize,
    min_leaf: usize,
    rng: ChaCha8Rng,
    tree: RegressionTree,
}

impl TreeBuilder<'_> {
    /// Visits column ranks in a random order until `mtry` non-constant
    /// columns have been scored; the winner is the lowest score, ties going
    /// to the lower rank.
    fn choose_split(&mut self, idx: &[usize]) -> Option<Split> {
        let m = self.ranked.len();
        let mut ranks: Vec<usize> = (0..m).collect();
        if self.mtry < m {
            ranks.shuffle(&mut self.rng);
        }
        let mut scored = 0;
        let mut best: Option<(usize, Split)> = None;
        for &rank in &ranks {
            if scored == self.mtry {
                break;
            }
            let c = self.ranked[rank];
            let first = self.x[idx[0]][c];
            if idx.iter().all(|&i| self.x[i][c] == first) {
                continue;
            }
            scored += 1;
            if let Some(s) = best_split_in_column(self.x, self.y, idx, c, self.min_leaf) {
                let better = match best {
                    None => true,
                    Some((r, b)) => {
                        let tol = TIE_TOLERANCE * b.score.abs().max(1.0);
                        s.score < b.score - tol || (s.score <= b.score + tol && rank < r)
                    }
                };
                if better {
                    best = Some((rank, s));
                }
            }
        }
        best.map(|(_, s)| s)
    }

    fn grow(&mut self, idx: &[usize]) -> usize {
        let n = idx.len();
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64;
        let constant = idx.iter().all(|&i| self.y[i] == self.y[idx[0]]);
        if n < 2 * self.min_leaf || constant {
            return self.tree.push_leaf(mean, n);
        }
        let Some(split) = self.choose_split(idx) else {
            return self.tree.push_leaf(mean, n);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x[i][split.column] <= split.threshold);
        let node = self.tree.push_leaf(mean, n);
        self.tree.feature[node] = split.column as i64;
        self.tree.threshold[node] = split.threshold;
        let left = self.grow(&l);
        let right = self.grow(&r);
        self.tree.left[node] = left as u32;
        self.tree.right[node] = right as u32;
        node
    }
}

/// Fits one CART tree on the rows listed in `idx` (repeats allowed), with
/// column `i` ranked `i`.
pub fn fit_tree(
    x: &[Vec<f64>],
    y: &[f64],
    idx: &[usize],
    mtry: usize,
    min_leaf: usize,
    rng: ChaCha8Rng,
) -> RegressionTree {
    let m = idx.first().map_or(0, |&i| x[i].len());
    let ranked: Vec<usize> = (0..m).collect();
    fit_tree_ranked(x, y, idx, &ranked, mtry, min_leaf, rng)
}

fn fit_tree_ranked(
    x: &[Vec<f64>],
    y: &[f64],
    idx: &[usize],
    ranked: &[usize],
    mtry: usize,
    min_leaf: usize,
    rng: ChaCha8Rng,
) -> RegressionTree {
    let mut b = TreeBuilder {
        x,
        y,
        ranked,
        mtry,
        min_leaf,
        rng,
        tree: RegressionTree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            value: Vec::new(),
            samples: Vec::new(),
        },
    };
    b.grow(idx);
    b.tree
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub columns: Vec<String>,
    pub config: RfConfig,
    pub trees: Vec<RegressionTree>,
    /// Out-of-bag mean squared error, when bootstrapping left some rows out.
    pub oob_mse: Option<f64>,
}

/// Fits a forest; tree `t` draws its bootstrap sample and candidate columns
/// from a generator seeded with `seed + t`. Columns are ranked by name, so a
/// consistent reordering of the columns yields the same forest.
pub fn fit_rf(
    x: &DescriptorMatrix,
    y: &[f64],
    config: &RfConfig,
) -> Result<RandomForestModel, BaselineError> {
    config.validate()?;
    check_training_data(x, y)?;
    let n = x.n_rows();
    let mtry = config.mtry_mode.count(x.n_cols());
    let mut ranked: Vec<usize> = (0..x.n_cols()).collect();
    ranked.sort_by(|&a, &b| x.columns[a].cmp(&x.columns[b]));
    let fitted: Vec<(RegressionTree, Vec<bool>)> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(t as u64));
            let idx: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut in_bag = vec![false; n];
            for &i in &idx {
                in_bag[i] = true;
            }
            let tree = fit_tree_ranked(&x.rows, y, &idx, &ranked, mtry, config.min_leaf, rng);
            (tree, in_bag)
        })
        .collect();

    let mut oob_sum = vec![0.0; n];
    let mut oob_count = vec![0usize; n];
    for (tree, in_bag) in &fitted {
        for i in (0..n).filter(|&i| !in_bag[i]) {
            oob_sum[i] += tree.predict_row(&x.rows[i]);
            oob_count[i] += 1;
        }
    }
    let covered: Vec<usize> = (0..n).filter(|&i| oob_count[i] > 0).collect();
    let oob_mse = (!covered.is_empty()).then(|| {
        covered
            .iter()
            .map(|&i| (oob_sum[i] / oob_count[i] as f64 - y[i]).powi(2))
            .sum::<f64>()
            / covered.len() as f64
    });

    Ok(RandomForestModel {
        columns: x.columns.clone(),
        config: config.clone(),
        trees: fitted.into_iter().map(|(t, _)| t).collect(),
        oob_mse,
    })
}

impl RandomForestModel {
    /// Mean over trees of the leaf value reached by each row.
    pub fn predict(&self, x: &DescriptorMatrix) -> Result<Vec<f64>, BaselineError> {
        if x.columns != self.columns {
            return Err(BaselineError::SchemaMismatch);
        }
        Ok(x.rows
            .par_iter()
            .map(|row| {
                self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String, BaselineError> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses and structurally checks a serialized forest.
    pub fn from_json(text: &str) -> Result<Self, BaselineError> {
        let model: RandomForestModel = serde_json::from_str(text)?;
        let m = model.columns.len();
        if model.trees.is_empty() {
            return Err(BaselineError::InvalidModel("forest has no trees".into()));
        }
        for (t, tree) in model.trees.iter().enumerate() {
            let n = tree.feature.len();
            let lens = [
                tree.threshold.len(),
                tree.left.len(),
                tree.right.len(),
                tree.value.len(),
                tree.samples.len(),
            ];
            if n == 0 || lens.iter().any(|&l| l != n) {
                return Err(BaselineError::InvalidModel(format!(
                    "tree {t}: ragged node arrays"
                )));
            }
            // children must point forward so prediction always terminates
            for k in 0..n {
                let f = tree.feature[k];
                if f >= 0 {
                    let (l, r) = (tree.left[k] as usize, tree.right[k] as usize);
                    if f as usize >= m || l <= k || r <= k || l >= n || r >= n {
                        return Err(BaselineError::InvalidModel(format!(
                            "tree {t}: bad node {k}"
                        )));
                    }
                }
            }
        }
        Ok(model)
    }
}
