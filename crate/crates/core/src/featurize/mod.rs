//! Per-atom feature matrices for the graph networks, atom-pair and
//! donor/acceptor pair descriptors for the classical baselines, and circular
//! fingerprints for similarity-based splitting.

mod atom;
mod descriptors;
mod fingerprint;

pub use atom::{
    atom_features, hybridization, pi_electrons, radical_electrons, AtomFeatureMatrix,
    FeatureColumn, FeatureSchema, Hybridization, ATOM_FEATURE_DIM,
};
pub use descriptors::{
    ap_descriptors, apdp_descriptors, dp_class, dp_descriptors, ApType, DescriptorBag,
    DescriptorKey, DpClass,
};
pub use fingerprint::{circular_fingerprint, tanimoto, Fingerprint, FINGERPRINT_BITS};

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
