//! Deterministic synthetic molecules and assay labels.
//!
//! Molecules are assembled from linear SMILES pieces, each of which attaches
//! to the previous one through its first atom and exposes its last
//! non-branch atom to the next. Labels are closed-form functions of simple
//! graph counts plus seeded Gaussian noise, so every model and split mode can
//! be exercised without proprietary data.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::molgraph::{parse_smiles, BondOrder, Element, MolecularGraph};

const CHAIN_PIECES: &[&str] = &[
    "C",
    "CC",
    "C(C)",
    "C(=O)",
    "N",
    "O",
    "C(F)(F)",
    "C(Cl)",
    "N(C)",
    "S(=O)(=O)",
    "C=C",
    "C#C",
    "C(O)",
    "C(N)",
];

const RING_PIECES: &[&str] = &[
    "c1ccc(cc1)",
    "c1ccc(nc1)",
    "C1CCC(CC1)",
    "C1CN(CC1)",
    "c1ccc(s1)",
    "c1cc(F)c(cc1)",
    "c1cc(O)c(cc1)",
];

const CAPS: &[&str] = &["O", "N", "F", "Cl", "Br", "C(=O)O", "C#N", "OC", "C(F)(F)F"];

/// A random, valid, single-component SMILES string built from
/// `pieces` chain or ring fragments and an optional terminal cap.
pub fn random_smiles<R: Rng + ?Sized>(rng: &mut R, pieces: RangeInclusive<usize>) -> String {
    let n = rng.gen_range(pieces);
    let mut s = String::new();
    let mut aromatic_tail = false;
    for _ in 0..n {
        let piece = if rng.gen_bool(0.35) {
            RING_PIECES[rng.gen_range(0..RING_PIECES.len())]
        } else {
            CHAIN_PIECES[rng.gen_range(0..CHAIN_PIECES.len())]
        };
        let aromatic_head = piece.starts_with('c');
        // biaryl links are single bonds, not aromatic ones
        if aromatic_tail && aromatic_head {
            s.push('-');
        }
        s.push_str(piece);
        aromatic_tail = aromatic_head;
    }
    if n == 0 || rng.gen_bool(0.5) {
        s.push_str(CAPS[rng.gen_range(0..CAPS.len())]);
    }
    s
}

/// One synthetic CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecord {
    pub id: String,
    pub smiles: String,
    pub assay: String,
    pub value: f64,
    pub date: NaiveDate,
}

pub const SYNTHETIC_ASSAYS: [&str; 3] = ["logD", "solubility", "clearance"];

struct Counts {
    carbons: f64,
    hetero: f64,
    halogens: f64,
    aromatic: f64,
    rings: f64,
    double_bonds: f64,
    mw: f64,
}

fn counts(g: &MolecularGraph) -> Counts {
    let count = |f: &dyn Fn(usize) -> bool| (0..g.num_atoms()).filter(|&i| f(i)).count() as f64;
    Counts {
        carbons: count(&|i| g.atom(i).element == Element::C),
        hetero: count(&|i| matches!(g.atom(i).element, Element::N | Element::O)),
        halogens: count(&|i| g.atom(i).element.is_halogen()),
        aromatic: count(&|i| g.atom(i).aromatic),
        rings: (g.num_bonds() + 1 - g.num_atoms()) as f64,
        double_bonds: g
            .bonds()
            .iter()
            .filter(|b| b.order == BondOrder::Double)
            .count() as f64,
        mw: g.molecular_weight(),
    }
}

/// Noise-free label of `assay` for a molecule.
pub fn closed_form_label(assay: &str, g: &MolecularGraph) -> f64 {
    let c = counts(g);
    match assay {
        "logD" => 0.12 * c.carbons + 0.45 * c.halogens - 0.4 * c.hetero + 0.15 * c.aromatic,
        "solubility" => -0.006 * c.mw + 0.35 * c.hetero - 0.25 * c.rings + 0.1 * c.double_bonds,
        "clearance" => (1.0 + 0.08 * c.carbons + 0.3 * c.rings).ln() - 0.2 * c.halogens,
        _ => 0.0,
    }
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; u1 is kept away from zero.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Generates `n_molecules` molecules registered between 2014 and 2019, each
/// measured in one to three assays. Later molecules tend to be larger, so
/// molecular weights spread across the 500 and 600 g/mol thresholds.
pub fn synthetic_records(seed: u64, n_molecules: usize) -> Vec<SyntheticRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = NaiveDate::from_ymd_opt(2014, 1, 1).expect("valid date");
    let span_days = 6 * 365;
    let mut out = Vec::new();
    for m in 0..n_molecules {
        let day = rng.gen_range(0..span_days);
        let t = f64::from(day) / f64::from(span_days);
        let max_pieces = 3 + (t * 15.0) as usize;
        let smiles = random_smiles(&mut rng, 1..=max_pieces);
        let graph = parse_smiles(&smiles).expect("generator emits valid SMILES");
        let mut measured: Vec<&str> = SYNTHETIC_ASSAYS
            .iter()
            .copied()
            .filter(|_| rng.gen_bool(0.7))
            .collect();
        if measured.is_empty() {
            measured.push(SYNTHETIC_ASSAYS[m % SYNTHETIC_ASSAYS.len()]);
        }
        for assay in measured {
            let offset = rng.gen_range(0..21);
            let value = closed_form_label(assay, &graph) + 0.1 * gaussian(&mut rng);
            out.push(SyntheticRecord {
                id: format!("MOL{m:04}"),
                smiles: smiles.clone(),
                assay: assay.to_string(),
                value: (value * 1e4).round() / 1e4,
                date: start + Duration::days(i64::from(day + offset)),
            });
        }
    }
    out
}

/// Renders records as the ingestion CSV (`id,smiles,assay,value,date`).
pub fn to_csv(records: &[SyntheticRecord]) -> String {
    let mut s = String::from("id,smiles,assay,value,date\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.id,
            r.smiles,
            r.assay,
            r.value,
            r.date.format("%Y-%m-%d")
        );
    }
    s
}
