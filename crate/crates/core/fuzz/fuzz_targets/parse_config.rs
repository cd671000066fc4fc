#![no_main]

use libfuzzer_sys::fuzz_target;
use pdc_calib::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = RunConfig::parse(text, &[]) {
        // anything accepted must survive a round trip through its own TOML
        let again = RunConfig::parse(&config.to_toml(), &[]).expect("serialized config parses");
        assert_eq!(config, again);
    }
});
