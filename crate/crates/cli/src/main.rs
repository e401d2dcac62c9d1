//! `admet`: parse, featurize, train, benchmark, interpret and split.
//!
//! Exit codes: 0 success, 2 input error, 3 config error, 4 runtime or
//! training error.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use admet_core::evalharness::benchmark::BenchmarkError;
use admet_core::evalharness::config::SEED_ENV;
use admet_core::evalharness::{
    run_benchmark, run_training, split, AssayDataset, ResolvedConfig, RunConfig,
};
use admet_core::featurize::{apdp_descriptors, atom_features, circular_fingerprint, FeatureSchema};
use admet_core::interpret::{
    atom_importance, feature_matrix, output_at, top_substructure, Interpretation, SearchMode,
};
use admet_core::molgraph::{parse_smiles, MolecularGraph};
use admet_core::potentialnet::TaskCheckpoint;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "admet",
    version,
    about = "Molecular property prediction with gated graph networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse SMILES and print a JSON summary per molecule.
    Parse {
        smiles: Option<String>,
        /// One SMILES per line.
        #[arg(long, conflicts_with = "smiles")]
        file: Option<PathBuf>,
    },
    /// Print atom features, descriptor counts or fingerprint bits as JSON.
    Featurize {
        smiles: Option<String>,
        #[arg(long, conflicts_with = "smiles")]
        file: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FeatureKind::All)]
        kind: FeatureKind,
        #[arg(long, default_value_t = 2)]
        radius: u32,
    },
    /// Fit the configured methods on train/valid and write checkpoints and curves.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train, evaluate once on the test partition and write the report.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
    },
    /// Atom importances and the top-scoring substructure for one molecule.
    Interpret {
        /// A `.params` checkpoint file (its `.json` sidecar must sit next to it).
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        smiles: String,
        /// Substructure size S.
        #[arg(long, short = 's')]
        size: usize,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
    },
    /// Write the train/valid/test partitions of a config's dataset as CSV.
    Split {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `<output_dir>/splits`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureKind {
    Atoms,
    Descriptors,
    Fingerprint,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Greedy,
}

struct Failure {
    code: u8,
    message: String,
}

fn input(message: impl ToString) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

fn config_error(message: impl ToString) -> Failure {
    Failure {
        code: 3,
        message: message.to_string(),
    }
}

fn runtime(message: impl ToString) -> Failure {
    Failure {
        code: 4,
        message: message.to_string(),
    }
}

fn benchmark_failure(e: BenchmarkError) -> Failure {
    match e {
        BenchmarkError::Dataset(_)
        | BenchmarkError::Split(_)
        | BenchmarkError::NoEligibleAssays => input(e),
        BenchmarkError::UnknownAssay(_) => config_error(e),
        _ => runtime(e),
    }
}

fn parse_or_fail(smiles: &str) -> Result<MolecularGraph, Failure> {
    parse_smiles(smiles).map_err(|e| input(format!("{}: {e}", e.name())))
}

/// SMILES from the positional argument or from a file, one per line.
fn smiles_inputs(smiles: Option<String>, file: Option<PathBuf>) -> Result<Vec<String>, Failure> {
    match (smiles, file) {
        (Some(s), None) => Ok(vec![s]),
        (None, Some(path)) => {
            let f = fs::File::open(&path).map_err(|e| input(format!("{}: {e}", path.display())))?;
            let mut out = Vec::new();
            for line in io::BufReader::new(f).lines() {
                let line = line.map_err(|e| input(format!("{}: {e}", path.display())))?;
                let line = line.trim();
                if !line.is_empty() {
                    out.push(line.to_string());
                }
            }
            Ok(out)
        }
        _ => Err(input("give a SMILES string or --file")),
    }
}

fn summary(g: &MolecularGraph) -> Value {
    let hydrogens: u32 = g.atoms().iter().map(|a| u32::from(a.total_h())).sum();
    let implicit: u32 = g.atoms().iter().map(|a| u32::from(a.implicit_h)).sum();
    json!({
        "smiles": g.source_smiles(),
        "atoms": g.num_atoms(),
        "bonds": g.num_bonds(),
        "hydrogens": hydrogens,
        "implicit_hydrogens": implicit,
        "molecular_weight": g.molecular_weight(),
    })
}

fn emit(out: &mut impl Write, v: &Value) -> Result<(), Failure> {
    writeln!(out, "{v}").map_err(runtime)
}

/// Parses every input; a bad one prints its error and makes the command
/// exit 2 after the rest have been processed.
fn for_each_molecule(
    inputs: Vec<String>,
    mut f: impl FnMut(&MolecularGraph) -> Result<(), Failure>,
) -> Result<(), Failure> {
    let mut first_error = None;
    for s in inputs {
        match parse_or_fail(&s) {
            Ok(g) => f(&g)?,
            Err(e) => {
                eprintln!("{s}: {}", e.message);
                first_error.get_or_insert(e);
            }
        }
    }
    first_error.map_or(Ok(()), Err)
}

fn cmd_parse(smiles: Option<String>, file: Option<PathBuf>) -> Result<(), Failure> {
    let inputs = smiles_inputs(smiles, file)?;
    let mut out = io::stdout().lock();
    for_each_molecule(inputs, |g| emit(&mut out, &summary(g)))
}

fn cmd_featurize(
    smiles: Option<String>,
    file: Option<PathBuf>,
    kind: FeatureKind,
    radius: u32,
) -> Result<(), Failure> {
    let inputs = smiles_inputs(smiles, file)?;
    let mut out = io::stdout().lock();
    let schema_hash = FeatureSchema::standard().hash();
    for_each_molecule(inputs, |g| {
        let mut v = json!({ "smiles": g.source_smiles() });
        if matches!(kind, FeatureKind::Atoms | FeatureKind::All) {
            let f = atom_features(g);
            let rows: Vec<&[f64]> = (0..f.rows).map(|i| f.row(i)).collect();
            v["feature_schema_hash"] = json!(schema_hash);
            v["atom_features"] = json!(rows);
        }
        if matches!(kind, FeatureKind::Descriptors | FeatureKind::All) {
            let bag: BTreeMap<String, u32> = apdp_descriptors(g)
                .iter()
                .map(|(k, c)| (k.to_string(), c))
                .collect();
            v["descriptors"] = json!(bag);
        }
        if matches!(kind, FeatureKind::Fingerprint | FeatureKind::All) {
            let bits: Vec<usize> = circular_fingerprint(g, radius).bits().collect();
            v["fingerprint_radius"] = json!(radius);
            v["fingerprint_bits"] = json!(bits);
        }
        emit(&mut out, &v)
    })
}

fn load_config(path: &Path) -> Result<ResolvedConfig, Failure> {
    let env_seed = std::env::var(SEED_ENV).ok();
    RunConfig::load(path, env_seed.as_deref()).map_err(config_error)
}

fn cmd_train(config: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let skipped = run_training(&cfg).map_err(benchmark_failure)?;
    for s in &skipped {
        eprintln!("skipped assay {}: {}", s.assay, s.reason);
    }
    println!("{}", cfg.run.output_dir.display());
    Ok(())
}

fn cmd_benchmark(config: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let report = run_benchmark(&cfg).map_err(benchmark_failure)?;
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "{}", report.to_csv().trim_end());
    let _ = writeln!(
        out,
        "report: {}",
        cfg.run.output_dir.join("report.json").display()
    );
    Ok(())
}

fn cmd_interpret(checkpoint: &Path, smiles: &str, size: usize, mode: Mode) -> Result<(), Failure> {
    let ck = TaskCheckpoint::load(checkpoint)
        .map_err(|e| input(format!("{}: {e}", checkpoint.display())))?;
    let g = parse_or_fail(smiles)?;
    let named = |e: admet_core::interpret::InterpretError| input(format!("{}: {e}", e.name()));
    let imp = atom_importance(&ck, &g).map_err(named)?;
    let mode = match mode {
        Mode::Exact => SearchMode::Exact,
        Mode::Greedy => SearchMode::Greedy,
    };
    let best = top_substructure(&imp, &g, size, mode).map_err(named)?;
    let prediction = output_at(&ck, &g, &feature_matrix(&g)).map_err(named)?;
    let doc = Interpretation {
        smiles: smiles.to_string(),
        task: ck.task.clone(),
        prediction,
        abs_importance: imp.absolute(),
        importance: imp.0,
        size,
        mode: best.mode,
        substructure: best.atoms,
        score: best.score,
    };
    println!("{}", serde_json::to_string_pretty(&doc).map_err(runtime)?);
    Ok(())
}

fn write_partition(path: &Path, ds: &AssayDataset, idx: &[usize]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(runtime)?;
    w.write_record(["id", "smiles", "assay", "value", "date"])
        .map_err(runtime)?;
    for &i in idx {
        let r = &ds.records[i];
        let date = r.date.format("%Y-%m-%d").to_string();
        w.write_record([
            r.id.as_str(),
            &r.smiles,
            &r.assay,
            &r.value.to_string(),
            &date,
        ])
        .map_err(runtime)?;
    }
    w.flush().map_err(runtime)
}

fn cmd_split(config: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let ds = AssayDataset::load(&cfg.run.dataset).map_err(input)?;
    let sp = split(&ds, &cfg.run.split).map_err(input)?;
    let dir = out.unwrap_or_else(|| cfg.run.output_dir.join("splits"));
    fs::create_dir_all(&dir).map_err(runtime)?;
    write_partition(&dir.join("train.csv"), &ds, &sp.train)?;
    write_partition(&dir.join("valid.csv"), &ds, &sp.valid)?;
    write_partition(&dir.join("test.csv"), &ds, sp.test.open())?;
    fs::write(dir.join("run_config.json"), cfg.to_json()).map_err(runtime)?;
    println!(
        "train {} valid {} test {} rejected {}",
        sp.train.len(),
        sp.valid.len(),
        sp.test.len(),
        ds.rejected.len()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Parse { smiles, file } => cmd_parse(smiles, file),
        Command::Featurize {
            smiles,
            file,
            kind,
            radius,
        } => cmd_featurize(smiles, file, kind, radius),
        Command::Train { config } => cmd_train(&config),
        Command::Benchmark { config } => cmd_benchmark(&config),
        Command::Interpret {
            checkpoint,
            smiles,
            size,
            mode,
        } => cmd_interpret(&checkpoint, &smiles, size, mode),
        Command::Split { config, out } => cmd_split(&config, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
