use serde::{Deserialize, Serialize};

use crate::molgraph::MolecularGraph;

use super::fnv1a;

/// Bit length of circular fingerprints.
pub const FINGERPRINT_BITS: usize = 2048;
const WORDS: usize = FINGERPRINT_BITS / 64;

/// Set of folded neighbourhood codes in `[0, 2048)`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    words: Vec<u64>,
}

impl std::fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.bits()).finish()
    }
}

impl Default for Fingerprint {
    fn default() -> Self {
        Fingerprint {
            words: vec![0; WORDS],
        }
    }
}

impl Fingerprint {
    pub fn from_bits(bits: impl IntoIterator<Item = usize>) -> Self {
        let mut fp = Fingerprint::default();
        for b in bits {
            fp.set(b);
        }
        fp
    }

    /// Panics if `bit` is out of range.
    pub fn set(&mut self, bit: usize) {
        assert!(bit < FINGERPRINT_BITS, "bit {bit} out of range");
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn contains(&self, bit: usize) -> bool {
        bit < FINGERPRINT_BITS && self.words[bit / 64] & (1 << (bit % 64)) != 0
    }

    pub fn count(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn bits(&self) -> impl Iterator<Item = usize> + '_ {
        (0..FINGERPRINT_BITS).filter(|&b| self.contains(b))
    }
}

/// |a ∩ b| / |a ∪ b|, and 0 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> f64 {
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    if union == 0 {
        0.0
    } else {
        f64::from(inter) / f64::from(union)
    }
}

/// Extended-connectivity fingerprint of the given radius (radius 2 ≈ ECFP4).
///
/// Panics if `radius > 5`.
pub fn circular_fingerprint(graph: &MolecularGraph, radius: u32) -> Fingerprint {
    assert!(radius <= 5, "radius must be in [0, 5]");
    let n = graph.num_atoms();
    let mut codes: Vec<u64> = (0..n)
        .map(|i| {
            let a = graph.atom(i);
            fnv1a(&[
                a.element.atomic_number(),
                a.formal_charge as u8,
                graph.heavy_degree(i) as u8,
                a.total_h(),
                u8::from(a.aromatic),
            ])
        })
        .collect();
    let mut fp = Fingerprint::default();
    let fold = |fp: &mut Fingerprint, codes: &[u64]| {
        for &c in codes {
            fp.set((c % FINGERPRINT_BITS as u64) as usize);
        }
    };
    fold(&mut fp, &codes);
    let mut buf = Vec::new();
    for _ in 0..radius {
        let next: Vec<u64> = (0..n)
            .map(|i| {
                let mut env: Vec<(u8, u64)> = graph
                    .neighbors(i)
                    .iter()
                    .map(|&(j, order)| (order.code(), codes[j]))
                    .collect();
                env.sort_unstable();
                buf.clear();
                buf.extend_from_slice(&codes[i].to_le_bytes());
                for (order, code) in env {
                    buf.push(order);
                    buf.extend_from_slice(&code.to_le_bytes());
                }
                fnv1a(&buf)
            })
            .collect();
        codes = next;
        fold(&mut fp, &codes);
    }
    fp
}
