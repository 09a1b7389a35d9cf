//! The checked-in fuzz seeds are accepted by their parsers.

use std::fs;
use std::path::PathBuf;

use mvsens::config::{parse_config, parse_matrix};
use mvsens::pickfreeze::{parse_sample_csv, write_sample_csv};
use mvsens::tabulated::parse_tabulated_model;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            p.file_name()
                .unwrap()
                .to_string_lossy()
                .starts_with("seed-")
        })
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn config_seeds_parse() {
    for (path, text) in seeds("parse_config") {
        parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn tabulated_seeds_parse() {
    for (path, text) in seeds("parse_tabulated_model") {
        parse_tabulated_model(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn sample_seeds_round_trip() {
    for (path, text) in seeds("parse_sample_csv") {
        let sample = parse_sample_csv(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let mut out = Vec::new();
        write_sample_csv(&sample, &mut out).unwrap();
        assert_eq!(
            parse_sample_csv(std::str::from_utf8(&out).unwrap()).unwrap(),
            sample
        );
    }
}

#[test]
fn matrix_seeds_parse() {
    for (path, text) in seeds("parse_matrix") {
        parse_matrix(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
