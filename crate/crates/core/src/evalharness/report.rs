use serde::{Deserialize, Serialize};

use super::metrics::{
    correlation_confidence_interval, pearson_r2, r2_confidence_interval, spearman_rho,
};
use super::SplitSpec;

pub const CI_METHOD: &str =
    "fisher_z_95: z = atanh(sqrt(R2)) +/- 1.96/sqrt(n-3), tanh back, squared, clamped to [0,1]";

/// Columns of the flat report CSV.
pub const REPORT_CSV_COLUMNS: [&str; 8] = [
    "assay", "method", "r2", "ci_low", "ci_high", "rho", "n_train", "n_test",
];

/// `Option<f64>` written as a number or the string "n/a".
mod optional_number {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => x.serialize(s),
            None => "n/a".serialize(s),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumOrText {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match NumOrText::deserialize(d)? {
            NumOrText::Num(x) => Ok(Some(x)),
            NumOrText::Text(t) if t == "n/a" => Ok(None),
            NumOrText::Text(t) => Err(serde::de::Error::custom(format!(
                "expected number or n/a, got {t}"
            ))),
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| x.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: String,
    #[serde(with = "optional_number")]
    pub r2: Option<f64>,
    #[serde(with = "optional_number")]
    pub ci_low: Option<f64>,
    #[serde(with = "optional_number")]
    pub ci_high: Option<f64>,
    #[serde(with = "optional_number")]
    pub rho: Option<f64>,
    #[serde(with = "optional_number")]
    pub rho_ci_low: Option<f64>,
    #[serde(with = "optional_number")]
    pub rho_ci_high: Option<f64>,
}

impl MethodScore {
    /// Scores predictions against measured values; undefined correlations
    /// (constant series, too few points) are left as `None`.
    pub fn compute(method: &str, pred: &[f64], actual: &[f64]) -> Self {
        let n = actual.len();
        let r2 = pearson_r2(pred, actual).ok();
        let ci = r2.and_then(|r| r2_confidence_interval(r, n).ok());
        let rho = spearman_rho(pred, actual).ok();
        let rho_ci = rho.and_then(|r| correlation_confidence_interval(r, n).ok());
        MethodScore {
            method: method.to_string(),
            r2,
            ci_low: ci.map(|c| c.0),
            ci_high: ci.map(|c| c.1),
            rho,
            rho_ci_low: rho_ci.map(|c| c.0),
            rho_ci_high: rho_ci.map(|c| c.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub baseline: String,
    pub candidate: String,
    /// `candidate − baseline`.
    pub absolute: f64,
    /// `100·(candidate − baseline)/baseline`, unavailable when baseline ≤ 0.
    #[serde(with = "optional_number")]
    pub percentage: Option<f64>,
}

pub fn improvement(baseline_r2: f64, candidate_r2: f64) -> (f64, Option<f64>) {
    let absolute = candidate_r2 - baseline_r2;
    let pct = (baseline_r2 > 0.0).then(|| 100.0 * absolute / baseline_r2);
    (absolute, pct)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssayReport {
    pub assay: String,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub scores: Vec<MethodScore>,
    pub improvement: Option<Improvement>,
}

impl AssayReport {
    /// Fills `improvement` for `(baseline, candidate)` when both have an R².
    pub fn with_improvement(mut self, pair: Option<(&str, &str)>) -> Self {
        let r2_of = |m: &str| {
            self.scores
                .iter()
                .find(|s| s.method == m)
                .and_then(|s| s.r2)
        };
        self.improvement = pair.and_then(|(b, c)| {
            let (absolute, percentage) = improvement(r2_of(b)?, r2_of(c)?);
            Some(Improvement {
                baseline: b.to_string(),
                candidate: c.to_string(),
                absolute,
                percentage,
            })
        });
        self
    }
}

/// The compared pair: the first random forest against the first
/// PotentialNet variant, falling back to the first two methods in order.
pub fn improvement_pair(methods: &[String]) -> Option<(&str, &str)> {
    if methods.len() < 2 {
        return None;
    }
    let find = |p: &str| {
        methods
            .iter()
            .find(|m| m.starts_with(p))
            .map(String::as_str)
    };
    match (find("rf_"), find("potentialnet")) {
        (Some(b), Some(c)) => Some((b, c)),
        _ => Some((methods[0].as_str(), methods[1].as_str())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: String,
    #[serde(with = "optional_number")]
    pub mean_r2: Option<f64>,
    #[serde(with = "optional_number")]
    pub median_r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementAggregate {
    pub baseline: String,
    pub candidate: String,
    #[serde(with = "optional_number")]
    pub mean_absolute: Option<f64>,
    #[serde(with = "optional_number")]
    pub median_absolute: Option<f64>,
    #[serde(with = "optional_number")]
    pub mean_percentage: Option<f64>,
    #[serde(with = "optional_number")]
    pub median_percentage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub methods: Vec<MethodAggregate>,
    pub improvement: Option<ImprovementAggregate>,
}

pub fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    })
}

/// Means and medians over assays; unavailable entries are skipped.
pub fn aggregate(methods: &[String], assays: &[AssayReport]) -> Aggregate {
    let per_method = methods
        .iter()
        .map(|m| {
            let r2: Vec<f64> = assays
                .iter()
                .filter_map(|a| a.scores.iter().find(|s| &s.method == m).and_then(|s| s.r2))
                .collect();
            MethodAggregate {
                method: m.clone(),
                mean_r2: mean(&r2),
                median_r2: median(&r2),
            }
        })
        .collect();
    let improvement = improvement_pair(methods).map(|(b, c)| {
        let imps: Vec<&Improvement> = assays
            .iter()
            .filter_map(|a| a.improvement.as_ref())
            .collect();
        let abs: Vec<f64> = imps.iter().map(|i| i.absolute).collect();
        let pct: Vec<f64> = imps.iter().filter_map(|i| i.percentage).collect();
        ImprovementAggregate {
            baseline: b.to_string(),
            candidate: c.to_string(),
            mean_absolute: mean(&abs),
            median_absolute: median(&abs),
            mean_percentage: mean(&pct),
            median_percentage: median(&pct),
        }
    });
    Aggregate {
        methods: per_method,
        improvement,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedAssay {
    pub assay: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub methods: Vec<String>,
    pub split: SplitSpec,
    pub ci_method: String,
    /// Set for Tanimoto splits.
    pub fingerprint: Option<String>,
    pub seed: u64,
    pub seed_source: String,
    pub test_accesses: usize,
    pub assays: Vec<AssayReport>,
    pub skipped: Vec<SkippedAssay>,
    pub aggregate: Aggregate,
    /// The fully resolved run configuration.
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per (assay, method).
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_CSV_COLUMNS).expect("in-memory write");
        for a in &self.assays {
            for s in &a.scores {
                w.write_record([
                    a.assay.clone(),
                    s.method.clone(),
                    fmt_opt(s.r2),
                    fmt_opt(s.ci_low),
                    fmt_opt(s.ci_high),
                    fmt_opt(s.rho),
                    a.n_train.to_string(),
                    a.n_test.to_string(),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}
