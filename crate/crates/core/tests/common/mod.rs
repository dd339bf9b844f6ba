#![allow(dead_code)]

pub mod gen;
pub mod oracle;

use std::path::{Path, PathBuf};

use cgrl::acg::Variant;
use cgrl::pipeline::{analyze_source, Analysis, Artifacts, PipelineOptions};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// `(file name, source)` of every program in a fixture directory, sorted.
pub fn fixture_dir(sub: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(fixtures().join(sub))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "mjs-mini"))
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixtures().join(name)).unwrap()
}

pub fn run(name: &str, src: &str, variant: Variant, fine_grained: bool) -> Analysis {
    let opts = PipelineOptions {
        variant,
        fine_grained,
        ..Default::default()
    };
    analyze_source(name, src, &opts, Artifacts::default()).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn pass_line(n: u32, what: &str, detail: &str, elapsed: std::time::Duration) {
    println!("criterion {n} PASS  {what}: {detail} ({} ms)", elapsed.as_millis());
}
