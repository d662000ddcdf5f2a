#![no_main]

use covest::experiments::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(config) = ExperimentConfig::from_toml_str(s, None) {
            let _ = config.validate();
            let _ = config.pairs();
            let again = ExperimentConfig::from_toml_str(&config.to_toml_string(), None).unwrap();
            assert_eq!(again, config);
        }
    }
});
