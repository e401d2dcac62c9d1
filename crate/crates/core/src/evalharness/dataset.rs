use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use chrono::NaiveDate;
use thiserror::Error;

use crate::molgraph::{parse_smiles, MolecularGraph};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("dataset has no usable records")]
    EmptyDataset,
    #[error("duplicate record ({id}, {assay}) on lines {first_line} and {second_line}")]
    DuplicateRecord {
        id: String,
        assay: String,
        first_line: u64,
        second_line: u64,
    },
}

/// One measurement of one molecule in one assay.
#[derive(Debug, Clone)]
pub struct AssayRecord {
    pub id: String,
    pub smiles: String,
    pub assay: String,
    pub value: f64,
    pub date: NaiveDate,
    /// 1-based line in the source file (the header is line 1).
    pub line: u64,
    pub graph: Arc<MolecularGraph>,
}

/// A row that could not be ingested.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRow {
    pub line: u64,
    pub smiles: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct AssayDataset {
    pub records: Vec<AssayRecord>,
    pub rejected: Vec<RejectedRow>,
}

pub const REQUIRED_COLUMNS: [&str; 4] = ["smiles", "assay", "value", "date"];

impl AssayDataset {
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    /// Parses CSV with header `smiles,assay,value,date` and an optional `id`
    /// column (the SMILES string stands in for a missing id). Rows whose
    /// SMILES, value or date do not parse are collected in `rejected`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        let col = |name: &str| header.iter().position(|h| h.trim() == name);
        let mut idx = [0usize; 4];
        for (k, name) in REQUIRED_COLUMNS.iter().enumerate() {
            idx[k] = col(name).ok_or_else(|| DatasetError::MissingColumn(name.to_string()))?;
        }
        let id_col = col("id");

        let mut parsed: HashMap<String, Arc<MolecularGraph>> = HashMap::new();
        let mut seen: BTreeMap<(String, String), u64> = BTreeMap::new();
        let mut records = Vec::new();
        let mut rejected = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let field = |i: usize| row.get(i).unwrap_or("").trim();
            let smiles = field(idx[0]).to_string();
            let reject = |reason: String| RejectedRow {
                line,
                smiles: smiles.clone(),
                reason,
            };
            let graph = match parsed.get(&smiles) {
                Some(g) => g.clone(),
                None => match parse_smiles(&smiles) {
                    Ok(g) => {
                        let g = Arc::new(g);
                        parsed.insert(smiles.clone(), g.clone());
                        g
                    }
                    Err(e) => {
                        rejected.push(reject(format!("{}: {e}", e.name())));
                        continue;
                    }
                },
            };
            let value = match field(idx[2]).parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ => {
                    rejected.push(reject(format!("invalid value {:?}", field(idx[2]))));
                    continue;
                }
            };
            let date = match NaiveDate::parse_from_str(field(idx[3]), "%Y-%m-%d") {
                Ok(d) => d,
                Err(_) => {
                    rejected.push(reject(format!("invalid date {:?}", field(idx[3]))));
                    continue;
                }
            };
            let assay = field(idx[1]).to_string();
            if assay.is_empty() {
                rejected.push(reject("empty assay name".into()));
                continue;
            }
            let id = match id_col.map(field) {
                Some(id) if !id.is_empty() => id.to_string(),
                _ => smiles.clone(),
            };
            if let Some(&first) = seen.get(&(id.clone(), assay.clone())) {
                return Err(DatasetError::DuplicateRecord {
                    id,
                    assay,
                    first_line: first,
                    second_line: line,
                });
            }
            seen.insert((id.clone(), assay.clone()), line);
            records.push(AssayRecord {
                id,
                smiles,
                assay,
                value,
                date,
                line,
                graph,
            });
        }
        if records.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        Ok(AssayDataset { records, rejected })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Assay names in sorted order.
    pub fn assays(&self) -> Vec<String> {
        let mut a: Vec<String> = self.records.iter().map(|r| r.assay.clone()).collect();
        a.sort();
        a.dedup();
        a
    }

    /// The rejected-row sidecar as CSV (`line,smiles,reason`).
    pub fn rejections_csv(&self) -> Result<String, DatasetError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["line", "smiles", "reason"])?;
        for r in &self.rejected {
            w.write_record([r.line.to_string().as_str(), &r.smiles, &r.reason])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8 input"))
    }
}
