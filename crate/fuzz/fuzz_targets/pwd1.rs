#![no_main]

use ecg_distill::dataset_io::{decode, encode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(split) = decode(data) {
        let bytes = encode(&split).expect("decoded dataset re-encodes");
        assert_eq!(bytes, data);
    }
});
