#![no_main]

//! Input is the sidecar JSON, a NUL byte, then the parameter container.

use admet_core::molgraph::parse_smiles;
use admet_core::potentialnet::{predict, TaskCheckpoint};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some(cut) = data.iter().position(|&b| b == 0) else {
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("ck.params");
    std::fs::write(dir.path().join("ck.json"), &data[..cut]).unwrap();
    std::fs::write(&params, &data[cut + 1..]).unwrap();
    if let Ok(ck) = TaskCheckpoint::load(&params) {
        let g = parse_smiles("CC(=O)O").unwrap();
        let _ = predict(&ck, &[g]);
    }
});
