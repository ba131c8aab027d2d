//! Ingest a JSON-Lines corpus into the per-sample artifact layout and attach
//! original plus obfuscated IR.
//!
//! ```sh
//! cargo run -p camo --example ingest_dataset
//! ```

use camo::dataset::{attach_ir, ingest, jsonl_line, IrRole};
use camo::obf::{run_pipeline, ObfConfig};
use camo::text::{parse_module, print_module};

fn main() {
    let tmp = std::env::temp_dir().join("camo-example-dataset");
    let _ = std::fs::remove_dir_all(&tmp);
    std::fs::create_dir_all(&tmp).unwrap();

    // A two-sample corpus: one labeled vulnerable, one safe.
    let corpus = tmp.join("corpus.jsonl");
    let mut text = String::new();
    text.push_str(&jsonl_line(
        "demo-vuln",
        1,
        "void copy(char *s) { char b[8]; strcpy(b, s); }",
    ));
    text.push_str(&jsonl_line(
        "demo-safe",
        0,
        "int add(int a, int b) { return a + b; }",
    ));
    std::fs::write(&corpus, text).unwrap();

    let root = tmp.join("dataset");
    let outcome = ingest(&corpus, &root, true).unwrap();
    let mut manifest = outcome.manifest;
    println!(
        "ingested {} samples ({} vulnerable / {} safe)",
        manifest.samples.len(),
        manifest.counts.vulnerable,
        manifest.counts.safe
    );

    // Attach IR for the safe sample: original, then the obfuscated form.
    let ll = "define i32 @add(i32 %a, i32 %b) {\nentry:\n  %r = add i32 %a, %b\n  ret i32 %r\n}\n";
    attach_ir(&mut manifest, &root, "demo-safe", IrRole::Orig, ll).unwrap();
    let module = parse_module(ll).unwrap();
    let (obf, _) = run_pipeline(
        &module,
        &ObfConfig {
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    let obf_text = print_module(&obf).unwrap();
    attach_ir(&mut manifest, &root, "demo-safe", IrRole::Obf, &obf_text).unwrap();

    println!("--- manifest.json ---");
    print!("{}", manifest.to_json());
    println!("--- layout under {} ---", root.display());
    for entry in walk(&root) {
        println!("  {}", entry.strip_prefix(&root).unwrap().display());
    }
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let mut entries: Vec<_> = std::fs::read_dir(&d)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}
