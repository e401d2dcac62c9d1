use serde::{Deserialize, Serialize};

use crate::molgraph::{BondOrder, Element, MolecularGraph};

use super::fnv1a;

const ELEMENTS: [Element; 11] = [
    Element::B,
    Element::C,
    Element::N,
    Element::O,
    Element::F,
    Element::Si,
    Element::P,
    Element::S,
    Element::Cl,
    Element::Br,
    Element::I,
];
const CHARGES: [i8; 5] = [-2, -1, 0, 1, 2];
const MAX_DEGREE: usize = 6;
const MAX_H: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Hybridization {
    Sp,
    Sp2,
    Sp3,
    Other,
}

/// Hybridization from local bond orders: aromatic → sp2, a triple bond or
/// two double bonds → sp, one double bond → sp2, otherwise sp3.
pub fn hybridization(graph: &MolecularGraph, atom: usize) -> Hybridization {
    if graph.atom(atom).aromatic {
        return Hybridization::Sp2;
    }
    let mut doubles = 0;
    for &(_, order) in graph.neighbors(atom) {
        match order {
            BondOrder::Triple => return Hybridization::Sp,
            BondOrder::Double => doubles += 1,
            BondOrder::Aromatic => return Hybridization::Sp2,
            BondOrder::Single => {}
        }
    }
    match doubles {
        0 => Hybridization::Sp3,
        1 => Hybridization::Sp2,
        _ => Hybridization::Sp,
    }
}

/// π-electron count used by atom-pair typing: 1 for aromatic atoms,
/// otherwise the excess bond order over single bonds, capped at 2.
pub fn pi_electrons(graph: &MolecularGraph, atom: usize) -> u8 {
    if graph.atom(atom).aromatic {
        return 1;
    }
    let excess: u32 = graph
        .neighbors(atom)
        .iter()
        .map(|(_, o)| match o {
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            _ => 0,
        })
        .sum();
    excess.min(2) as u8
}

/// Unpaired electrons implied by a valence deficit on a bracket atom.
pub fn radical_electrons(graph: &MolecularGraph, atom: usize) -> u8 {
    let a = graph.atom(atom);
    if !a.bracket {
        return 0;
    }
    let valence = u32::from(a.element.default_valence(a.formal_charge));
    valence.saturating_sub(graph.bond_order_sum(atom) + u32::from(a.total_h())) as u8
}

/// One column of the atom feature matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub group: String,
    pub category: String,
}

/// Ordered description of the atom feature columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<FeatureColumn>,
}

impl FeatureSchema {
    pub fn standard() -> Self {
        let mut columns = Vec::with_capacity(ATOM_FEATURE_DIM);
        let mut push = |group: &str, category: String| {
            columns.push(FeatureColumn {
                group: group.to_string(),
                category,
            })
        };
        for e in ELEMENTS {
            push("element", e.symbol().to_string());
        }
        push("element", "other".into());
        for c in CHARGES {
            push("formal_charge", format!("{c:+}"));
        }
        push("formal_charge", "other".into());
        for h in ["sp", "sp2", "sp3", "other"] {
            push("hybridization", h.into());
        }
        push("aromatic", "flag".into());
        for d in 0..=MAX_DEGREE {
            push("heavy_degree", d.to_string());
        }
        push_counts(&mut push, "total_h");
        push_counts(&mut push, "implicit_h");
        push("radical_electrons", "count".into());
        FeatureSchema { columns }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("schema serializes")
    }

    /// Stable 64-bit identity of the schema, checked when models are loaded.
    pub fn hash(&self) -> u64 {
        fnv1a(self.to_json().as_bytes())
    }

    /// Column ranges of the one-hot groups, in order.
    pub fn one_hot_groups(&self) -> Vec<(String, std::ops::Range<usize>)> {
        let mut groups: Vec<(String, std::ops::Range<usize>)> = Vec::new();
        for (i, c) in self.columns.iter().enumerate() {
            match groups.last_mut() {
                Some((g, r)) if *g == c.group => r.end = i + 1,
                _ => groups.push((c.group.clone(), i..i + 1)),
            }
        }
        groups.retain(|(g, _)| g != "aromatic" && g != "radical_electrons");
        groups
    }
}

fn push_counts(push: &mut impl FnMut(&str, String), group: &str) {
    for h in 0..=MAX_H {
        push(group, h.to_string());
    }
    push(group, "other".into());
}

/// Width of the atom feature rows.
pub const ATOM_FEATURE_DIM: usize = 43;

/// Row-major N_atoms × 43 feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomFeatureMatrix {
    pub rows: usize,
    pub values: Vec<f64>,
}

impl AtomFeatureMatrix {
    pub fn cols(&self) -> usize {
        ATOM_FEATURE_DIM
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * ATOM_FEATURE_DIM..(i + 1) * ATOM_FEATURE_DIM]
    }
}

fn one_hot<T: PartialEq>(row: &mut [f64], offset: usize, table: &[T], value: &T) -> usize {
    let idx = table.iter().position(|t| t == value).unwrap_or(table.len());
    row[offset + idx] = 1.0;
    offset + table.len() + 1
}

fn count_one_hot(row: &mut [f64], offset: usize, value: u8) -> usize {
    let idx = usize::from(value.min(MAX_H + 1));
    row[offset + idx] = 1.0;
    offset + usize::from(MAX_H) + 2
}

pub fn atom_features(graph: &MolecularGraph) -> AtomFeatureMatrix {
    let n = graph.num_atoms();
    let mut values = vec![0.0; n * ATOM_FEATURE_DIM];
    for (i, row) in values.chunks_mut(ATOM_FEATURE_DIM).enumerate() {
        let atom = graph.atom(i);
        let mut off = one_hot(row, 0, &ELEMENTS, &atom.element);
        off = one_hot(row, off, &CHARGES, &atom.formal_charge);
        let hyb = hybridization(graph, i);
        off = one_hot(
            row,
            off,
            &[Hybridization::Sp, Hybridization::Sp2, Hybridization::Sp3],
            &hyb,
        );
        row[off] = if atom.aromatic { 1.0 } else { 0.0 };
        off += 1;
        row[off + graph.heavy_degree(i).min(MAX_DEGREE)] = 1.0;
        off += MAX_DEGREE + 1;
        off = count_one_hot(row, off, atom.total_h());
        off = count_one_hot(row, off, atom.implicit_h);
        row[off] = f64::from(radical_electrons(graph, i));
        debug_assert_eq!(off + 1, ATOM_FEATURE_DIM);
    }
    AtomFeatureMatrix { rows: n, values }
}
