#![no_main]

use admet_core::evalharness::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    if let Ok(rc) = RunConfig::from_json(text, dir, None) {
        let _ = rc.to_json();
    }
});
