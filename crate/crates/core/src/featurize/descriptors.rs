use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::molgraph::{Element, MolecularGraph};

use super::atom::pi_electrons;

/// Atom-pair atom type: element, heavy-neighbour count and π electrons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ApType {
    pub element: Element,
    pub heavy_neighbors: u8,
    pub pi_electrons: u8,
}

impl fmt::Display for ApType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}X{}P{}",
            self.element, self.heavy_neighbors, self.pi_electrons
        )
    }
}

/// The seven donor/acceptor pair classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DpClass {
    Cation,
    Anion,
    Donor,
    Acceptor,
    Polar,
    Hydrophobe,
    Other,
}

impl fmt::Display for DpClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DpClass::Cation => "cation",
            DpClass::Anion => "anion",
            DpClass::Donor => "donor",
            DpClass::Acceptor => "acceptor",
            DpClass::Polar => "polar",
            DpClass::Hydrophobe => "hydrophobe",
            DpClass::Other => "other",
        };
        f.write_str(s)
    }
}

/// Structured descriptor key `type_i – distance – type_j` with the smaller
/// type first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DescriptorKey {
    AtomPair(ApType, u32, ApType),
    DonorAcceptor(DpClass, u32, DpClass),
}

impl DescriptorKey {
    pub fn atom_pair(a: ApType, distance: u32, b: ApType) -> Self {
        if b < a {
            DescriptorKey::AtomPair(b, distance, a)
        } else {
            DescriptorKey::AtomPair(a, distance, b)
        }
    }

    pub fn donor_acceptor(a: DpClass, distance: u32, b: DpClass) -> Self {
        if b < a {
            DescriptorKey::DonorAcceptor(b, distance, a)
        } else {
            DescriptorKey::DonorAcceptor(a, distance, b)
        }
    }
}

impl fmt::Display for DescriptorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DescriptorKey::AtomPair(a, d, b) => write!(f, "AP:{a}-{d:02}-{b}"),
            DescriptorKey::DonorAcceptor(a, d, b) => write!(f, "DP:{a}-{d:02}-{b}"),
        }
    }
}

/// Sparse descriptor frequencies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorBag {
    counts: BTreeMap<DescriptorKey, u32>,
}

impl DescriptorBag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: DescriptorKey) {
        *self.counts.entry(key).or_insert(0) += 1;
    }

    pub fn get(&self, key: &DescriptorKey) -> u32 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DescriptorKey, u32)> {
        self.counts.iter().map(|(k, &v)| (k, v))
    }

    /// Union of two bags with summed counts.
    pub fn merged(mut self, other: &DescriptorBag) -> Self {
        for (k, v) in other.iter() {
            *self.counts.entry(*k).or_insert(0) += v;
        }
        self
    }
}

fn ap_type(graph: &MolecularGraph, atom: usize) -> ApType {
    ApType {
        element: graph.atom(atom).element,
        heavy_neighbors: graph.heavy_degree(atom) as u8,
        pi_electrons: pi_electrons(graph, atom),
    }
}

/// Donor/acceptor classification, first matching rule wins.
pub fn dp_class(graph: &MolecularGraph, atom: usize) -> DpClass {
    let a = graph.atom(atom);
    if a.formal_charge > 0 {
        return DpClass::Cation;
    }
    if a.formal_charge < 0 {
        return DpClass::Anion;
    }
    match a.element {
        Element::N | Element::O if a.total_h() > 0 => DpClass::Donor,
        Element::N | Element::O => DpClass::Acceptor,
        Element::F | Element::Cl | Element::Br | Element::S => DpClass::Polar,
        Element::C
            if graph
                .neighbors(atom)
                .iter()
                .all(|&(j, _)| matches!(graph.atom(j).element, Element::C | Element::H)) =>
        {
            DpClass::Hydrophobe
        }
        _ => DpClass::Other,
    }
}

fn pair_bag<T: Copy>(
    graph: &MolecularGraph,
    type_of: impl Fn(&MolecularGraph, usize) -> T,
    key: impl Fn(T, u32, T) -> DescriptorKey,
) -> DescriptorBag {
    let heavy: Vec<usize> = (0..graph.num_atoms())
        .filter(|&i| graph.atom(i).is_heavy())
        .collect();
    let types: Vec<T> = heavy.iter().map(|&i| type_of(graph, i)).collect();
    let d = graph.shortest_bond_distances();
    let mut bag = DescriptorBag::new();
    for (x, &i) in heavy.iter().enumerate() {
        for (y, &j) in heavy.iter().enumerate().skip(x + 1) {
            bag.add(key(types[x], d.get(i, j), types[y]));
        }
    }
    bag
}

/// Atom-pair descriptors over all unordered heavy-atom pairs.
pub fn ap_descriptors(graph: &MolecularGraph) -> DescriptorBag {
    pair_bag(graph, ap_type, DescriptorKey::atom_pair)
}

/// Donor/acceptor pair descriptors over all unordered heavy-atom pairs.
pub fn dp_descriptors(graph: &MolecularGraph) -> DescriptorBag {
    pair_bag(graph, dp_class, DescriptorKey::donor_acceptor)
}

/// The union of atom-pair and donor/acceptor pair descriptors.
pub fn apdp_descriptors(graph: &MolecularGraph) -> DescriptorBag {
    ap_descriptors(graph).merged(&dp_descriptors(graph))
}
