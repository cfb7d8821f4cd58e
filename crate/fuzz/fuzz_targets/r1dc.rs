#![no_main]

use ecg_distill::model_io::{decode, encode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = decode(data) {
        assert_eq!(decode(&encode(&model)).expect("round trip"), model);
    }
});
