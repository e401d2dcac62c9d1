use std::sync::Arc;

use crate::featurize::{atom_features, AtomFeatureMatrix, FeatureSchema, ATOM_FEATURE_DIM};
use crate::molgraph::{BondOrder, MolecularGraph};
use crate::tensor::Tensor;

/// Several molecules stacked into one disconnected graph.
#[derive(Debug, Clone)]
pub struct BatchedGraphs {
    /// Atom feature rows of every molecule, in batch order.
    pub x: Tensor,
    /// Per bond type, `(dst, src)` pairs in both directions.
    pub edges: [Arc<[(usize, usize)]>; BondOrder::COUNT],
    /// All bonds regardless of type plus one self pair per atom, i.e. `A + I`.
    pub self_loop_edges: Arc<[(usize, usize)]>,
    /// Molecule index of every atom row.
    pub segment_ids: Vec<usize>,
    pub n_molecules: usize,
    pub schema_hash: u64,
}

impl BatchedGraphs {
    pub fn new(graphs: &[&MolecularGraph]) -> Self {
        let feats: Vec<AtomFeatureMatrix> = graphs.iter().map(|g| atom_features(g)).collect();
        let pairs: Vec<_> = graphs.iter().copied().zip(feats.iter()).collect();
        Self::from_featurized(&pairs)
    }

    /// Batches molecules whose feature matrices were already computed.
    pub fn from_featurized(items: &[(&MolecularGraph, &AtomFeatureMatrix)]) -> Self {
        let total: usize = items.iter().map(|(g, _)| g.num_atoms()).sum();
        let mut x = Vec::with_capacity(total * ATOM_FEATURE_DIM);
        let mut edges: [Vec<(usize, usize)>; BondOrder::COUNT] = Default::default();
        let mut self_loops = Vec::new();
        let mut segment_ids = Vec::with_capacity(total);
        let mut offset = 0;
        for (m, (g, f)) in items.iter().enumerate() {
            debug_assert_eq!(f.rows, g.num_atoms());
            x.extend_from_slice(&f.values);
            for i in 0..g.num_atoms() {
                segment_ids.push(m);
                self_loops.push((offset + i, offset + i));
            }
            for b in g.bonds() {
                let (u, v) = (offset + b.begin, offset + b.end);
                let e = b.order.edge_type();
                edges[e].push((u, v));
                edges[e].push((v, u));
                self_loops.push((u, v));
                self_loops.push((v, u));
            }
            offset += g.num_atoms();
        }
        BatchedGraphs {
            x: Tensor::from_vec(total, ATOM_FEATURE_DIM, x).expect("feature rows"),
            edges: edges.map(Into::into),
            self_loop_edges: self_loops.into(),
            segment_ids,
            n_molecules: items.len(),
            schema_hash: FeatureSchema::standard().hash(),
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.x.rows()
    }
}
