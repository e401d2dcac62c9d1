//! Molecular property prediction with gated graph networks.

pub mod baselines;
pub mod evalharness;
pub mod featurize;
pub mod interpret;
pub mod molgraph;
pub mod potentialnet;
pub mod tensor;
