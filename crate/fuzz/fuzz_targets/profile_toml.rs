#![no_main]

use ecg_distill::bench::{battery_life, PlatformProfile};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(profile) = PlatformProfile::from_toml(text) {
        if let Ok(report) = battery_life(&profile) {
            assert!(report.battery_life_h > 0.0);
        }
    }
});
