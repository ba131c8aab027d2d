//! Shared helpers for integration tests: fixture loading and dataset
//! assembly.
#![allow(dead_code)] // each test binary uses its own subset

use std::path::{Path, PathBuf};

use camo::dataset::{self, IrRole, Manifest};
use camo::ir::IrModule;
use camo::obf::{run_pipeline, ObfConfig};
use camo::text::{parse_module, print_module};

pub fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Every `.ll` fixture as `(file name, source text)`, sorted by name.
pub fn corpus() -> Vec<(String, String)> {
    let dir = fixture_root().join("ll");
    let mut out = Vec::new();
    for entry in std::fs::read_dir(&dir).expect("fixture dir exists") {
        let path = entry.expect("dir entry").path();
        if path.extension().is_some_and(|e| e == "ll") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            let text = std::fs::read_to_string(&path).expect("fixture readable");
            out.push((name, text));
        }
    }
    out.sort();
    assert!(out.len() >= 30, "corpus must hold at least 30 fixtures");
    out
}

pub fn parsed_corpus() -> Vec<(String, IrModule)> {
    corpus()
        .into_iter()
        .map(|(name, text)| {
            let module = parse_module(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, module)
        })
        .collect()
}

/// Builds the 40-sample benchmark dataset under `root`: ingests the shipped
/// JSONL corpus, attaches an original `.ll` per sample (cycled from the
/// fixture corpus), obfuscates it with the full pipeline at seed 1, and
/// attaches the result.
pub fn assemble_dataset(root: &Path) -> Manifest {
    let fixtures = corpus();
    let jsonl = fixture_root().join("dataset/samples.jsonl");
    let outcome = dataset::ingest(&jsonl, root, true).expect("ingest fixture corpus");
    let mut manifest = outcome.manifest;
    assert_eq!(manifest.samples.len(), 40);

    let cfg = ObfConfig {
        seed: 1,
        ..Default::default()
    };
    let ids: Vec<String> = manifest.samples.iter().map(|s| s.id.clone()).collect();
    for (i, id) in ids.iter().enumerate() {
        let (_, ll_text) = &fixtures[(i * 7) % fixtures.len()];
        dataset::attach_ir(&mut manifest, root, id, IrRole::Orig, ll_text).expect("attach orig");
        let module = parse_module(ll_text).expect("fixture parses");
        let (obf, _) = run_pipeline(&module, &cfg).expect("pipeline");
        let obf_text = print_module(&obf).expect("obfuscated module prints");
        dataset::attach_ir(&mut manifest, root, id, IrRole::Obf, &obf_text).expect("attach obf");
    }
    manifest
}
