#![no_main]

use admet_core::evalharness::AssayDataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = AssayDataset::from_reader(data) {
        let _ = ds.assays();
        let _ = ds.rejections_csv();
    }
});
