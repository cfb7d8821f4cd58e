#![no_main]

use ecg_distill::experiment::ExperimentConfig;
use ecg_distill::res1dcnn::Res1dCnnConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml(text) {
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).expect("round trip"), cfg);
    }
    if let Ok(model) = Res1dCnnConfig::from_toml(text) {
        assert_eq!(model.conv_layer_count(), 14);
    }
});
