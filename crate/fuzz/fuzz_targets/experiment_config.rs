#![no_main]

use libfuzzer_sys::fuzz_target;
use vicsek_core::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = ExperimentConfig::parse(text) else { return };
    let _ = config.validate_static();
    let again = ExperimentConfig::parse(&config.to_toml()).expect("written config parses");
    assert_eq!(again.canonical_json(), config.canonical_json());
});
