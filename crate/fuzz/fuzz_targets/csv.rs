#![no_main]

use ecg_distill::biosignal::csv_io;
use libfuzzer_sys::fuzz_target;

// Signal text, then an optional annotation file after the first NUL byte.
fuzz_target!(|data: &[u8]| {
    let (signal, annotations) = match data.iter().position(|&b| b == 0) {
        Some(i) => (&data[..i], Some(&data[i + 1..])),
        None => (data, None),
    };
    let Ok(signal) = std::str::from_utf8(signal) else { return };
    let annotations = match annotations.map(std::str::from_utf8) {
        Some(Ok(a)) => Some(a),
        Some(Err(_)) => return,
        None => None,
    };
    let _ = csv_io::parse_annotations(annotations.unwrap_or(""));
    if let Ok(record) = csv_io::parse_signal(signal, annotations, "fuzz") {
        let text = csv_io::write_signal(&record);
        let ann = csv_io::write_annotations(&record);
        let back = csv_io::parse_signal(&text, Some(&ann), "fuzz").expect("written record parses");
        assert_eq!(back.len(), record.len());
    }
});
