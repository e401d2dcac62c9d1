use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::element::Element;

/// Bond orders expressible in the supported SMILES grammar. Each one is a
/// distinct edge type for the graph networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub const ALL: [BondOrder; 4] = [
        BondOrder::Single,
        BondOrder::Double,
        BondOrder::Triple,
        BondOrder::Aromatic,
    ];

    /// Number of edge types seen by the message-passing layers.
    pub const COUNT: usize = 4;

    pub fn edge_type(self) -> usize {
        match self {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        }
    }

    /// Bond order in half units (aromatic = 1.5 → 3).
    pub fn half_units(self) -> u32 {
        match self {
            BondOrder::Single => 2,
            BondOrder::Double => 4,
            BondOrder::Triple => 6,
            BondOrder::Aromatic => 3,
        }
    }

    /// Lower-bound integral order, aromatic bonds counting as single.
    pub fn min_integral(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn code(self) -> u8 {
        self.edge_type() as u8 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    pub explicit_h: u8,
    pub implicit_h: u8,
    pub aromatic: bool,
    pub isotope: Option<u16>,
    /// Written in square brackets; hydrogens are then exactly those stated.
    pub bracket: bool,
    pub index: usize,
}

impl Atom {
    pub fn total_h(&self) -> u8 {
        self.explicit_h + self.implicit_h
    }

    pub fn is_heavy(&self) -> bool {
        self.element != Element::H
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub begin: usize,
    pub end: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.begin == atom {
            self.end
        } else {
            self.begin
        }
    }
}

/// Immutable molecular graph produced by [`parse_smiles`](super::parse_smiles).
#[derive(Debug, Clone, PartialEq)]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    neighbors: Vec<Vec<(usize, BondOrder)>>,
    adjacency: [Vec<Vec<usize>>; BondOrder::COUNT],
    source_smiles: String,
}

impl MolecularGraph {
    /// Assembles a graph from already validated parts.
    pub(crate) fn from_parts(atoms: Vec<Atom>, bonds: Vec<Bond>, source_smiles: String) -> Self {
        let n = atoms.len();
        let mut neighbors = vec![Vec::new(); n];
        let mut adjacency: [Vec<Vec<usize>>; BondOrder::COUNT] =
            std::array::from_fn(|_| vec![Vec::new(); n]);
        for bond in &bonds {
            neighbors[bond.begin].push((bond.end, bond.order));
            neighbors[bond.end].push((bond.begin, bond.order));
            let e = bond.order.edge_type();
            adjacency[e][bond.begin].push(bond.end);
            adjacency[e][bond.end].push(bond.begin);
        }
        MolecularGraph {
            atoms,
            bonds,
            neighbors,
            adjacency,
            source_smiles,
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn source_smiles(&self) -> &str {
        &self.source_smiles
    }

    /// All bonded neighbours of `atom` with the connecting bond order.
    pub fn neighbors(&self, atom: usize) -> &[(usize, BondOrder)] {
        &self.neighbors[atom]
    }

    /// Neighbour set of `atom` restricted to one edge type.
    pub fn neighbors_by_type(&self, order: BondOrder, atom: usize) -> &[usize] {
        &self.adjacency[order.edge_type()][atom]
    }

    pub fn heavy_degree(&self, atom: usize) -> usize {
        self.neighbors[atom]
            .iter()
            .filter(|(j, _)| self.atoms[*j].is_heavy())
            .count()
    }

    /// Sum of incident bond orders in half units.
    pub fn bond_order_half_units(&self, atom: usize) -> u32 {
        self.neighbors[atom]
            .iter()
            .map(|(_, o)| o.half_units())
            .sum()
    }

    /// Sum of incident bond orders with aromatic bonds at 1.5, rounded up.
    pub fn bond_order_sum(&self, atom: usize) -> u32 {
        self.bond_order_half_units(atom).div_ceil(2)
    }

    pub fn hydrogen_count(&self) -> usize {
        self.atoms
            .iter()
            .map(|a| a.total_h() as usize + usize::from(!a.is_heavy()))
            .sum()
    }

    /// Molecular weight in g/mol over heavy atoms plus all hydrogens.
    pub fn molecular_weight(&self) -> f64 {
        let h = Element::H.mass();
        self.atoms
            .iter()
            .map(|a| a.element.mass() + h * f64::from(a.total_h()))
            .sum()
    }

    /// All-pairs bond-path lengths by breadth-first search from every atom.
    pub fn shortest_bond_distances(&self) -> DistanceMatrix {
        let n = self.atoms.len();
        let mut d = vec![u32::MAX; n * n];
        let mut queue = VecDeque::with_capacity(n);
        for src in 0..n {
            let row = &mut d[src * n..(src + 1) * n];
            row[src] = 0;
            queue.clear();
            queue.push_back(src);
            while let Some(u) = queue.pop_front() {
                let du = row[u];
                for &(v, _) in &self.neighbors[u] {
                    if row[v] == u32::MAX {
                        row[v] = du + 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        DistanceMatrix { n, d }
    }

    /// Relabels atoms so that new atom `k` is old atom `order[k]`.
    ///
    /// Panics if `order` is not a permutation of `0..num_atoms()`.
    pub fn permuted(&self, order: &[usize]) -> MolecularGraph {
        let n = self.atoms.len();
        assert_eq!(order.len(), n, "permutation length");
        let mut new_of_old = vec![usize::MAX; n];
        for (new, &old) in order.iter().enumerate() {
            assert!(new_of_old[old] == usize::MAX, "not a permutation");
            new_of_old[old] = new;
        }
        let atoms = order
            .iter()
            .enumerate()
            .map(|(new, &old)| Atom {
                index: new,
                ..self.atoms[old].clone()
            })
            .collect();
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                begin: new_of_old[b.begin],
                end: new_of_old[b.end],
                order: b.order,
            })
            .collect();
        MolecularGraph::from_parts(atoms, bonds, self.source_smiles.clone())
    }
}

/// Dense N×N matrix of bond-path lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<u32>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.d[i * self.n + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        self.d.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }
}
