#![no_main]

use libfuzzer_sys::fuzz_target;
use pdc_calib::config::{apply_override, RunConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let overrides: Vec<String> = text.lines().map(str::to_string).collect();
    let mut table = toml::Table::new();
    for o in &overrides {
        let _ = apply_override(&mut table, o);
    }
    let _ = RunConfig::parse("", &overrides);
});
