#![no_main]

use ecg_distill::biosignal::bsr1;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(record) = bsr1::decode(data, "fuzz") {
        let bytes = bsr1::encode(&record).expect("decoded record re-encodes");
        assert_eq!(bsr1::decode(&bytes, "fuzz").expect("round trip"), record);
    }
});
