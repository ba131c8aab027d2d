//! Cross-module integration: SSA demotion under the oracle, corpus-wide
//! invariants, and the CSV report read back by a generic reader.

mod common;

use camo::equiv::{check_equivalence, Verdict};
use camo::interp::DEFAULT_FUEL;
use camo::ir::{demote_to_memory, validate, validate_function};
use camo::metrics::{compute, emit_report, ConfusionMatrix, ReportFormat, ReportRow};
use camo::obf::{run_pipeline, ObfConfig};
use camo::text::parse_module;

/// Demoted functions stay valid and phi-free across the whole corpus.
#[test]
fn demotion_preserves_validity_everywhere() {
    for (name, module) in common::parsed_corpus() {
        assert_eq!(validate(&module), vec![], "{name}");
        for f in module.definitions() {
            let demoted = demote_to_memory(f).unwrap_or_else(|e| panic!("{name} @{}: {e}", f.name));
            assert!(
                demoted.blocks.iter().all(|b| b.phis.is_empty()),
                "{name} @{}: phis survived demotion",
                f.name
            );
            assert_eq!(validate_function(&demoted), vec![], "{name} @{}", f.name);
        }
    }
}

/// The diamond-with-phi fixture: demotion replaces the phi with stores on
/// both arms and stays equivalent over 64 vectors.
#[test]
fn demoted_diamond_is_equivalent() {
    let text = std::fs::read_to_string(common::fixture_root().join("ll/32_demote_diamond.ll")).unwrap();
    let module = parse_module(&text).unwrap();
    let f = &module.functions[0];
    let demoted = demote_to_memory(f).unwrap();
    let mut demoted_module = module.clone();
    demoted_module.functions[0] = demoted;
    let report =
        check_equivalence(&module, &demoted_module, &f.name, 64, 3, DEFAULT_FUEL).unwrap();
    assert!(matches!(report.verdict, Verdict::Equivalent), "{:?}", report.verdict);
    assert_eq!(report.vectors_run, 64);
}

/// The oracle is deterministic: identical inputs give identical reports.
#[test]
fn oracle_reports_are_deterministic() {
    let text = std::fs::read_to_string(common::fixture_root().join("ll/05_loop_sum.ll")).unwrap();
    let module = parse_module(&text).unwrap();
    let cfg = ObfConfig {
        seed: 4,
        ..Default::default()
    };
    let (obf, _) = run_pipeline(&module, &cfg).unwrap();
    let a = check_equivalence(&module, &obf, "sumto", 48, 12, DEFAULT_FUEL).unwrap();
    let b = check_equivalence(&module, &obf, "sumto", 48, 12, DEFAULT_FUEL).unwrap();
    assert_eq!(a, b);
}

/// CSV report parses back through a generic CSV reader to the same numbers.
#[test]
fn csv_report_round_trips() {
    let rows = vec![
        ReportRow {
            model: "ChatGPT-4o".into(),
            obfuscation: "Before".into(),
            metrics: compute(&ConfusionMatrix::new(17, 5, 3, 15)),
        },
        ReportRow {
            model: "Claude Sonnet 4".into(),
            obfuscation: "After".into(),
            metrics: compute(&ConfusionMatrix::new(18, 14, 2, 6)),
        },
    ];
    let text = emit_report(&rows, ReportFormat::Csv).unwrap();

    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        vec![
            "Model",
            "Obfuscation",
            "Accuracy",
            "Precision",
            "Recall (TPR)",
            "Specificity (TNR)",
            "F1-Score"
        ]
    );
    let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), 2);
    assert_eq!(&records[0][0], "ChatGPT-4o");
    assert_eq!(&records[0][2], "0.800");
    let f1: f64 = records[1][6].parse().unwrap();
    assert!((f1 - 0.692).abs() < 5e-4);
}

/// Full-pipeline smoke on the two-function fixture: output validates and
/// both functions stay equivalent (the whole-corpus sweep lives in the
/// acceptance suite).
#[test]
fn pipeline_on_the_calculator_module() {
    let text = std::fs::read_to_string(common::fixture_root().join("ll/01_table2.ll")).unwrap();
    let module = parse_module(&text).unwrap();
    let cfg = ObfConfig {
        seed: 2,
        ..Default::default()
    };
    let (obf, report) = run_pipeline(&module, &cfg).unwrap();
    assert_eq!(validate(&obf), vec![]);
    assert!(report.passes.iter().any(|p| p.counters.states_assigned > 0));
    for f in module.definitions() {
        let eq = check_equivalence(&module, &obf, &f.name, 64, 5, DEFAULT_FUEL).unwrap();
        assert!(matches!(eq.verdict, Verdict::Equivalent), "@{}", f.name);
    }
}
