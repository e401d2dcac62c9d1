#![no_main]

use admet_core::baselines::{DescriptorMatrix, RandomForestModel};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = RandomForestModel::from_json(text) {
        if model.columns.len() > 4096 {
            return;
        }
        let x = DescriptorMatrix {
            columns: model.columns.clone(),
            rows: vec![vec![0.0; model.columns.len()], vec![1.0; model.columns.len()]],
        };
        let _ = model.predict(&x);
    }
});
