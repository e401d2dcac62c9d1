//! Dataset ingestion, temporal splits, correlation metrics with confidence
//! intervals, and benchmark reports.

pub mod benchmark;
pub mod config;
pub mod dataset;
pub mod metrics;
pub mod report;
pub mod split;
pub mod synthetic;

pub use benchmark::{run_benchmark, run_training, BenchmarkError};
pub use config::{ConfigError, MethodKind, ResolvedConfig, RunConfig};
pub use dataset::{AssayDataset, AssayRecord, DatasetError, RejectedRow};
pub use report::EvalReport;
pub use split::{split, DatasetSplit, SplitError, SplitKind, SplitSpec, TestPartition};

#[cfg(test)]
mod tests {
    use std::collections::HashSet;
    use std::path::PathBuf;

    use chrono::NaiveDate;

    use super::report::{aggregate, improvement, improvement_pair, AssayReport, MethodScore};
    use super::split::max_train_similarity;
    use super::synthetic::{synthetic_records, to_csv};
    use super::*;
    use crate::featurize::{circular_fingerprint, tanimoto};

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn fixture_path() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic_assays.csv")
    }

    fn fixture() -> AssayDataset {
        AssayDataset::load(&fixture_path()).unwrap()
    }

    fn spec(kind: SplitKind) -> SplitSpec {
        SplitSpec {
            kind,
            ..SplitSpec::temporal(d("2018-01-01"), d("2019-01-01"))
        }
    }

    #[test]
    fn fixture_matches_generator() {
        let expected = to_csv(&synthetic_records(2024, 300));
        if std::env::var_os("ADMET_BLESS").is_some() {
            std::fs::write(fixture_path(), &expected).unwrap();
        }
        assert_eq!(std::fs::read_to_string(fixture_path()).unwrap(), expected);
    }

    #[test]
    fn loads_valid_rows() {
        let csv = "smiles,assay,value,date\nCCO,a,1.5,2020-01-01\nc1ccccc1,a,2,2020-02-01\nCC,b,-3,2021-01-01\n";
        let ds = AssayDataset::from_reader(csv.as_bytes()).unwrap();
        assert_eq!(ds.len(), 3);
        assert!(ds.rejected.is_empty());
        assert_eq!(ds.records[0].id, "CCO");
        assert_eq!(ds.assays(), vec!["a", "b"]);
    }

    #[test]
    fn bad_smiles_goes_to_sidecar() {
        let csv =
            "smiles,assay,value,date\nCCO,a,1,2020-01-01\nC1CC,a,2,2020-01-02\nCC,a,x,2020-01-03\n";
        let ds = AssayDataset::from_reader(csv.as_bytes()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.rejected.len(), 2);
        assert_eq!(ds.rejected[0].line, 3);
        assert_eq!(ds.rejected[0].smiles, "C1CC");
        assert!(
            ds.rejected[0].reason.starts_with("UnclosedRing"),
            "{}",
            ds.rejected[0].reason
        );
        let side = ds.rejections_csv().unwrap();
        assert!(side.starts_with("line,smiles,reason\n3,C1CC,"));
    }

    #[test]
    fn duplicate_names_both_lines() {
        let csv = "id,smiles,assay,value,date\nm1,CCO,a,1,2020-01-01\nm2,CC,a,1,2020-01-01\nm1,CCO,a,2,2020-01-05\n";
        match AssayDataset::from_reader(csv.as_bytes()) {
            Err(DatasetError::DuplicateRecord {
                first_line,
                second_line,
                ..
            }) => assert_eq!((first_line, second_line), (2, 4)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_column_and_empty() {
        let r = AssayDataset::from_reader("smiles,assay,date\nC,a,2020-01-01\n".as_bytes());
        assert!(matches!(r, Err(DatasetError::MissingColumn(c)) if c == "value"));
        let r = AssayDataset::from_reader("smiles,assay,value,date\n".as_bytes());
        assert!(matches!(r, Err(DatasetError::EmptyDataset)));
    }

    #[test]
    fn all_before_date_i_leaves_test_empty() {
        let csv = "smiles,assay,value,date\nC,a,1,2010-01-01\nCC,a,2,2010-01-02\n";
        let ds = AssayDataset::from_reader(csv.as_bytes()).unwrap();
        let e = split(&ds, &SplitSpec::temporal(d("2011-01-01"), d("2012-01-01"))).unwrap_err();
        assert_eq!(e, SplitError::EmptyPartition("valid"));
        let csv = "smiles,assay,value,date\nC,a,1,2010-01-01\nCC,a,2,2011-06-02\n";
        let ds = AssayDataset::from_reader(csv.as_bytes()).unwrap();
        let e = split(&ds, &SplitSpec::temporal(d("2011-01-01"), d("2012-01-01"))).unwrap_err();
        assert_eq!(e, SplitError::EmptyPartition("test"));
    }

    #[test]
    fn invalid_spec_rejected() {
        let ds = fixture();
        let mut s = SplitSpec::temporal(d("2019-01-01"), d("2018-01-01"));
        assert!(matches!(split(&ds, &s), Err(SplitError::InvalidSpec(_))));
        s = spec(SplitKind::TemporalTanimoto);
        s.tanimoto_cutoff = 0.0;
        assert!(matches!(split(&ds, &s), Err(SplitError::InvalidSpec(_))));
    }

    #[test]
    fn boundary_dates_go_to_later_partition() {
        let csv =
            "smiles,assay,value,date\nC,a,1,2017-12-31\nCC,a,2,2018-01-01\nCCC,a,3,2019-01-01\n";
        let ds = AssayDataset::from_reader(csv.as_bytes()).unwrap();
        let sp = split(&ds, &spec(SplitKind::Temporal)).unwrap();
        assert_eq!((sp.train.clone(), sp.valid.clone()), (vec![0], vec![1]));
        assert_eq!(sp.test.open(), &[2]);
    }

    #[test]
    fn mw_gap_molecule_in_no_partition() {
        // seven CCl2 units, about 582 g/mol
        let big: String = "C(Cl)(Cl)".repeat(7);
        let csv = format!(
            "smiles,assay,value,date\nC,a,1,2017-01-01\nCC,a,2,2018-06-01\n{big},a,3,2019-06-01\nCCC,a,4,2019-06-02\n"
        );
        let ds = AssayDataset::from_reader(csv.as_bytes()).unwrap();
        let mw = ds.records[2].graph.molecular_weight();
        assert!(mw > 500.0 && mw < 600.0, "{mw}");
        let r = split(&ds, &spec(SplitKind::TemporalMw));
        // the only test candidates are the gap molecule and a tiny one
        assert_eq!(r.unwrap_err(), SplitError::EmptyPartition("test"));
    }

    fn assert_disjoint(sp: &DatasetSplit, n: usize) -> HashSet<usize> {
        let mut seen = HashSet::new();
        for &i in sp.train.iter().chain(&sp.valid).chain(sp.test.open()) {
            assert!(i < n);
            assert!(seen.insert(i), "record {i} in two partitions");
        }
        seen
    }

    #[test]
    fn temporal_brute_force() {
        let ds = fixture();
        let s = spec(SplitKind::Temporal);
        let sp = split(&ds, &s).unwrap();
        assert_eq!(assert_disjoint(&sp, ds.len()).len(), ds.len());
        for &i in &sp.train {
            assert!(ds.records[i].date < s.date_i);
        }
        for &i in &sp.valid {
            assert!(ds.records[i].date >= s.date_i && ds.records[i].date < s.date_j);
        }
        for &i in sp.test.open() {
            assert!(ds.records[i].date >= s.date_j);
        }
        assert_eq!(sp.test.access_count(), 2);
    }

    #[test]
    fn temporal_mw_brute_force() {
        let ds = fixture();
        let s = spec(SplitKind::TemporalMw);
        let sp = split(&ds, &s).unwrap();
        assert_disjoint(&sp, ds.len());
        let mw = |i: usize| ds.records[i].graph.molecular_weight();
        for &i in sp.train.iter().chain(&sp.valid) {
            assert!(mw(i) <= 500.0);
        }
        for &i in sp.test.open() {
            assert!(ds.records[i].date >= s.date_j && mw(i) >= 600.0);
        }
        // nothing eligible was dropped
        let expected_test = ds
            .records
            .iter()
            .filter(|r| r.date >= s.date_j && r.graph.molecular_weight() >= 600.0)
            .count();
        assert_eq!(sp.test.len(), expected_test);
    }

    #[test]
    fn tanimoto_brute_force() {
        let ds = fixture();
        let s = spec(SplitKind::TemporalTanimoto);
        let sp = split(&ds, &s).unwrap();
        let plain = split(&ds, &spec(SplitKind::Temporal)).unwrap();
        let fps: Vec<_> = ds
            .records
            .iter()
            .map(|r| circular_fingerprint(&r.graph, 2))
            .collect();
        let max_sim = |i: usize| {
            plain
                .train
                .iter()
                .map(|&j| tanimoto(&fps[i], &fps[j]))
                .fold(0.0, f64::max)
        };
        let kept: Vec<usize> = plain
            .test
            .open()
            .iter()
            .copied()
            .filter(|&i| max_sim(i) < 0.5)
            .collect();
        assert_eq!(sp.test.open(), kept.as_slice());
        assert_eq!(sp.train, plain.train);
        assert!(!kept.is_empty() && kept.len() < plain.test.len());

        let sims = max_train_similarity(&ds, &plain.train, plain.test.open());
        for (k, &i) in plain.test.open().iter().enumerate() {
            assert_eq!(sims[k], max_sim(i));
        }
    }

    #[test]
    fn tanimoto_cutoff_one_keeps_distinct_test() {
        // test molecules never occur in train, so no similarity reaches 1
        let csv = "smiles,assay,value,date\nCCO,a,1,2017-01-01\nCCN,a,2,2018-06-01\nc1ccccc1,a,3,2019-06-01\nCCCl,a,4,2019-07-01\n";
        let ds = AssayDataset::from_reader(csv.as_bytes()).unwrap();
        let mut s = spec(SplitKind::TemporalTanimoto);
        s.tanimoto_cutoff = 1.0;
        let t = split(&ds, &s).unwrap();
        let p = split(&ds, &spec(SplitKind::Temporal)).unwrap();
        assert_eq!(t.test.open(), p.test.open());
    }

    #[test]
    fn ablation_drops_latest() {
        let ds = fixture();
        // with a one-year validation window the dropped 40% would empty it
        assert_eq!(
            split(&ds, &spec(SplitKind::Ablation)).unwrap_err(),
            SplitError::EmptyPartition("valid")
        );
        let wide = |kind| SplitSpec {
            kind,
            ..SplitSpec::temporal(d("2016-06-01"), d("2019-01-01"))
        };
        let sp = split(&ds, &wide(SplitKind::Ablation)).unwrap();
        let plain = split(&ds, &wide(SplitKind::Temporal)).unwrap();
        assert_eq!(sp.test.open(), plain.test.open());
        let mut pool: Vec<usize> = plain.train.iter().chain(&plain.valid).copied().collect();
        pool.sort_by_key(|&i| (ds.records[i].date, i));
        let keep = pool.len() - (pool.len() as f64 * 0.4).floor() as usize;
        let mut kept: Vec<usize> = sp.train.iter().chain(&sp.valid).copied().collect();
        kept.sort_by_key(|&i| (ds.records[i].date, i));
        assert_eq!(kept, pool[..keep].to_vec());
        // no dropped record predates a kept one
        let latest_kept = kept.iter().map(|&i| ds.records[i].date).max().unwrap();
        for &i in &pool[keep..] {
            assert!(ds.records[i].date >= latest_kept);
        }
    }

    #[test]
    fn published_improvement_arithmetic() {
        let (abs, pct) = improvement(0.260, 0.272);
        assert!((abs - 0.012).abs() < 1e-12);
        assert!((pct.unwrap() - 100.0 * 0.012 / 0.26).abs() < 1e-9);
        let (_, pct) = improvement(0.105, 0.361);
        assert!((pct.unwrap() - 243.8095238).abs() < 1e-6);
        assert_eq!(improvement(0.0, 0.3).1, None);
        assert_eq!(improvement(0.3, 0.3), (0.0, Some(0.0)));
    }

    fn score(method: &str, r2: Option<f64>) -> MethodScore {
        MethodScore {
            method: method.into(),
            r2,
            ci_low: None,
            ci_high: None,
            rho: None,
            rho_ci_low: None,
            rho_ci_high: None,
        }
    }

    #[test]
    fn aggregate_recomputable_from_rows() {
        let methods = vec!["potentialnet".to_string(), "rf_sklearn".to_string()];
        let pair = improvement_pair(&methods);
        assert_eq!(pair, Some(("rf_sklearn", "potentialnet")));
        let rows: Vec<AssayReport> = [(0.5, 0.4), (0.3, 0.0), (0.7, 0.2)]
            .iter()
            .enumerate()
            .map(|(k, &(pn, rf))| {
                AssayReport {
                    assay: format!("a{k}"),
                    n_train: 10,
                    n_valid: 5,
                    n_test: 5,
                    scores: vec![
                        score("potentialnet", Some(pn)),
                        score("rf_sklearn", Some(rf)),
                    ],
                    improvement: None,
                }
                .with_improvement(pair)
            })
            .collect();
        let agg = aggregate(&methods, &rows);
        assert!((agg.methods[0].mean_r2.unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(agg.methods[0].median_r2, Some(0.5));
        assert_eq!(agg.methods[1].median_r2, Some(0.2));
        let imp = agg.improvement.unwrap();
        let abs: Vec<f64> = rows
            .iter()
            .map(|r| r.improvement.as_ref().unwrap().absolute)
            .collect();
        assert_eq!(imp.mean_absolute, Some((abs[0] + abs[1] + abs[2]) / 3.0));
        assert_eq!(rows[1].improvement.as_ref().unwrap().percentage, None);
        // n/a percentages are left out of the percentage statistics
        let pcts: Vec<f64> = rows
            .iter()
            .filter_map(|r| r.improvement.as_ref().unwrap().percentage)
            .collect();
        assert_eq!(pcts.len(), 2);
        assert!((pcts[0] - 25.0).abs() < 1e-12 && (pcts[1] - 250.0).abs() < 1e-12);
        assert_eq!(imp.mean_percentage, Some((pcts[0] + pcts[1]) / 2.0));

        let one = aggregate(&methods[..1], &rows);
        assert!(one.improvement.is_none());
    }

    #[test]
    fn optional_numbers_serialize_as_na() {
        let s = score("rf_mix", None);
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"r2\":\"n/a\""), "{json}");
        let back: MethodScore = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn config_errors_name_the_field() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("d.csv"),
            "smiles,assay,value,date\nC,a,1,2020-01-01\n",
        )
        .unwrap();
        let base = r#"{"dataset":"d.csv","split":{"kind":"temporal","date_i":"2018-01-01","date_j":"2019-01-01"},"methods":["#;
        let ok = RunConfig::from_json(&format!("{base}\"rf_mix\"]}}"), dir.path(), None).unwrap();
        assert_eq!(ok.seed_source, "config");
        assert!(ok.run.dataset.is_absolute() || ok.run.dataset.starts_with(dir.path()));
        let e = RunConfig::from_json(&format!("{base}\"svm\"]}}"), dir.path(), None).unwrap_err();
        assert!(e.to_string().contains("svm"), "{e}");
        let e = RunConfig::from_json(
            &format!("{base}\"mlp\"], \"colour\": 1}}"),
            dir.path(),
            None,
        )
        .unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
        let e = RunConfig::from_json(&format!("{base}]}}"), dir.path(), None).unwrap_err();
        assert!(e.to_string().contains("methods"), "{e}");
        let with_env =
            RunConfig::from_json(&format!("{base}\"mlp\"]}}"), dir.path(), Some("77")).unwrap();
        assert_eq!((with_env.run.seed, with_env.run.mlp.seed), (77, 77));
        assert_eq!(with_env.seed_source, "env:ADMET_SEED");
        assert!(RunConfig::from_json(&format!("{base}\"mlp\"]}}"), dir.path(), Some("x")).is_err());
    }
}
