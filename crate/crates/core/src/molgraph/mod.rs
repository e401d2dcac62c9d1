//! SMILES reading and the molecular graph consumed by every featurizer.
//!
//! The reader accepts the organic subset (`B C N O P S F Cl Br I`), the
//! aromatic forms `b c n o p s`, and bracket atoms carrying an isotope,
//! hydrogen count and charge. Aromaticity is whatever the string says; no
//! perception or kekulization happens here.
//!
//! Implicit hydrogens follow a single rule: sum the incident bond orders
//! (aromatic bonds count 1.5), round up, and subtract from the element's
//! default valence for its charge. Bracket atoms get no implicit hydrogens.

mod element;
mod graph;
mod parser;

pub use element::Element;
pub use graph::{Atom, Bond, BondOrder, DistanceMatrix, MolecularGraph};
pub use parser::{implicit_hydrogens, parse_smiles, ParseError};
