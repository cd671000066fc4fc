//! Replays the checked-in fuzz corpus through the same entry points and
//! round-trip checks as the fuzz targets, so they run under `cargo test`.

use std::fs;
use std::path::PathBuf;

use pdc_calib::config::{apply_override, RunConfig};
use pdc_calib::stream_gen::PairedEventStream;

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus for {target}");
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn parse_config_corpus() {
    let mut accepted = 0;
    for (name, data) in corpus("parse_config") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        if let Ok(config) = RunConfig::parse(text, &[]) {
            let again = RunConfig::parse(&config.to_toml(), &[]).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(config, again, "{name}");
            accepted += 1;
        }
    }
    assert!(accepted >= 2);
}

#[test]
fn parse_override_corpus() {
    for (_, data) in corpus("parse_override") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        let overrides: Vec<String> = text.lines().map(str::to_string).collect();
        let mut table = toml::Table::new();
        for o in &overrides {
            let _ = apply_override(&mut table, o);
        }
        let _ = RunConfig::parse("", &overrides);
    }
}

#[test]
fn read_events_csv_corpus() {
    let mut accepted = 0;
    for (name, data) in corpus("read_events_csv") {
        if let Ok(stream) = PairedEventStream::read_csv(data.as_slice(), 1.0) {
            let mut buf = Vec::new();
            stream.write_csv(&mut buf).unwrap();
            let again = PairedEventStream::read_csv(buf.as_slice(), 1.0).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(stream, again, "{name}");
            accepted += 1;
        }
    }
    assert!(accepted >= 2);
}
