#![no_main]

use admet_core::featurize::{apdp_descriptors, atom_features, circular_fingerprint};
use admet_core::molgraph::parse_smiles;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(g) = parse_smiles(text) {
        assert!(g.num_atoms() > 0);
        let _ = g.molecular_weight();
        // featurizers must accept anything the parser accepts
        if g.num_atoms() <= 64 {
            let _ = atom_features(&g);
            let _ = apdp_descriptors(&g);
            let _ = circular_fingerprint(&g, 2);
        }
    }
});
