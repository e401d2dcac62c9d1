use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::featurize::DescriptorBag;

/// Dense descriptor-count matrix with a fixed, sorted column schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DescriptorMatrix {
    /// Columns are the union of keys over `bags`, sorted by their text form.
    pub fn build(bags: &[DescriptorBag]) -> Result<Self, BaselineError> {
        if bags.is_empty() {
            return Err(BaselineError::EmptyInput);
        }
        let keys: BTreeSet<String> = bags
            .iter()
            .flat_map(|b| b.iter().map(|(k, _)| k.to_string()))
            .collect();
        let columns: Vec<String> = keys.into_iter().collect();
        Ok(Self::with_columns(columns, bags).0)
    }

    /// Projects `bags` onto this matrix's columns, dropping unseen keys.
    pub fn transform(&self, bags: &[DescriptorBag]) -> DescriptorMatrix {
        let (m, dropped) = Self::with_columns(self.columns.clone(), bags);
        if dropped > 0 {
            log::debug!("dropped {dropped} descriptor occurrences unseen in training");
        }
        m
    }

    fn with_columns(columns: Vec<String>, bags: &[DescriptorBag]) -> (DescriptorMatrix, usize) {
        let index: BTreeMap<&str, usize> = columns
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let mut dropped = 0;
        let rows = bags
            .iter()
            .map(|bag| {
                let mut row = vec![0.0; columns.len()];
                for (k, count) in bag.iter() {
                    match index.get(k.to_string().as_str()) {
                        Some(&c) => row[c] = f64::from(count),
                        None => dropped += 1,
                    }
                }
                row
            })
            .collect();
        (
            DescriptorMatrix {
                columns: columns.clone(),
                rows,
            },
            dropped,
        )
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }
}
