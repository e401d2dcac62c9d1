use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{AtomImportance, InterpretError};
use crate::molgraph::MolecularGraph;

/// Largest molecule the exact search accepts.
pub const EXACT_MAX_ATOMS: usize = 60;
/// Largest subgraph size the exact search accepts.
pub const EXACT_MAX_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphResult {
    /// Sorted atom indices.
    pub atoms: Vec<usize>,
    pub score: f64,
    pub mode: SearchMode,
}

fn adjacency(graph: &MolecularGraph) -> Vec<Vec<usize>> {
    (0..graph.num_atoms())
        .map(|i| {
            let mut n: Vec<usize> = graph.neighbors(i).iter().map(|&(j, _)| j).collect();
            n.sort_unstable();
            n.dedup();
            n
        })
        .collect()
}

struct Esu<'a, F: FnMut(&[usize])> {
    adj: &'a [Vec<usize>],
    size: usize,
    visit: F,
}

impl<F: FnMut(&[usize])> Esu<'_, F> {
    fn extend(&mut self, sub: &mut Vec<usize>, mut ext: Vec<usize>, root: usize) {
        if sub.len() == self.size {
            (self.visit)(sub);
            return;
        }
        while let Some(w) = ext.pop() {
            let mut next = ext.clone();
            for &u in &self.adj[w] {
                let exclusive = u > root
                    && !sub.contains(&u)
                    && u != w
                    && !next.contains(&u)
                    && !sub.iter().any(|&s| self.adj[s].binary_search(&u).is_ok());
                if exclusive {
                    next.push(u);
                }
            }
            sub.push(w);
            self.extend(sub, next, root);
            sub.pop();
        }
    }
}

/// Calls `visit` once for every connected induced subgraph of `size` atoms
/// (unsorted atom list), by exclusive-neighbourhood extension from each root.
pub fn for_each_connected_subset(graph: &MolecularGraph, size: usize, visit: impl FnMut(&[usize])) {
    if size == 0 {
        return;
    }
    let adj = adjacency(graph);
    let mut esu = Esu {
        adj: &adj,
        size,
        visit,
    };
    for (v, nbrs) in adj.iter().enumerate() {
        let ext: Vec<usize> = nbrs.iter().copied().filter(|&u| u > v).collect();
        let mut sub = vec![v];
        esu.extend(&mut sub, ext, v);
    }
}

fn score_of(imp: &[f64], atoms: &[usize]) -> f64 {
    atoms.iter().map(|&i| imp[i]).sum()
}

/// Higher score wins; equal scores go to the lexicographically smaller set.
fn better(a: (f64, &[usize]), b: (f64, &[usize])) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.1 < b.1,
    }
}

/// The connected `size`-atom subgraph with the largest importance sum.
pub fn top_substructure(
    imp: &AtomImportance,
    graph: &MolecularGraph,
    size: usize,
    mode: SearchMode,
) -> Result<SubgraphResult, InterpretError> {
    let n = graph.num_atoms();
    if imp.len() != n {
        return Err(InterpretError::LengthMismatch {
            atoms: n,
            importances: imp.len(),
        });
    }
    if size == 0 || size > n {
        return Err(InterpretError::SizeOutOfRange { size, n_atoms: n });
    }
    let v = imp.values();
    match mode {
        SearchMode::Exact => {
            if n > EXACT_MAX_ATOMS || size > EXACT_MAX_SIZE {
                return Err(InterpretError::ExactModeLimitExceeded { size, n_atoms: n });
            }
            let mut best: Option<(f64, Vec<usize>)> = None;
            for_each_connected_subset(graph, size, |atoms| {
                let mut s = atoms.to_vec();
                s.sort_unstable();
                let score = score_of(v, &s);
                if best
                    .as_ref()
                    .is_none_or(|(bs, b)| better((score, &s), (*bs, b)))
                {
                    best = Some((score, s));
                }
            });
            // a size no connected component reaches leaves nothing to pick
            let (score, atoms) = best.ok_or(InterpretError::NoConnectedSubgraph { size })?;
            Ok(SubgraphResult { atoms, score, mode })
        }
        SearchMode::Greedy => greedy(v, graph, size),
    }
}

fn greedy(
    v: &[f64],
    graph: &MolecularGraph,
    size: usize,
) -> Result<SubgraphResult, InterpretError> {
    let adj = adjacency(graph);
    let pick = |cands: &mut dyn Iterator<Item = usize>| {
        cands.fold(None, |best: Option<usize>, i| match best {
            Some(b) if v[b] >= v[i] => Some(b),
            _ => Some(i),
        })
    };
    let seed = pick(&mut (0..v.len())).expect("nonempty molecule");
    let mut set = vec![seed];
    while set.len() < size {
        let mut frontier: Vec<usize> = set
            .iter()
            .flat_map(|&s| adj[s].iter().copied())
            .filter(|u| !set.contains(u))
            .collect();
        frontier.sort_unstable();
        frontier.dedup();
        match pick(&mut frontier.into_iter()) {
            Some(u) => set.push(u),
            None => return Err(InterpretError::NoConnectedSubgraph { size }),
        }
    }
    set.sort_unstable();
    Ok(SubgraphResult {
        score: score_of(v, &set),
        atoms: set,
        mode: SearchMode::Greedy,
    })
}
