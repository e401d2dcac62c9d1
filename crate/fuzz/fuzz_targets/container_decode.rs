#![no_main]

use admet_core::tensor::container::{decode, encode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((params, hash)) = decode(data) {
        assert_eq!(encode(&params, hash), data);
    }
});
