//! Confusion-matrix accounting and report emission: feed per-row counts,
//! derive the five metrics, render markdown and CSV.
//!
//! ```sh
//! cargo run -p camo --example metrics_table
//! ```

use camo::metrics::{compute, emit_report, ConfusionMatrix, ReportFormat, ReportRow};

fn main() {
    // Before/after counts for three models on a 20 vulnerable / 20 safe set.
    let rows: Vec<(&str, &str, ConfusionMatrix)> = vec![
        ("model-a", "Before", ConfusionMatrix::new(17, 5, 3, 15)),
        ("model-a", "After", ConfusionMatrix::new(16, 15, 4, 5)),
        ("model-b", "Before", ConfusionMatrix::new(15, 8, 5, 12)),
        ("model-b", "After", ConfusionMatrix::new(16, 13, 4, 7)),
        ("model-c", "Before", ConfusionMatrix::new(14, 8, 6, 12)),
        ("model-c", "After", ConfusionMatrix::new(18, 14, 2, 6)),
    ];
    let report_rows: Vec<ReportRow> = rows
        .into_iter()
        .map(|(model, phase, cm)| ReportRow {
            model: model.into(),
            obfuscation: phase.into(),
            metrics: compute(&cm),
        })
        .collect();

    println!("--- markdown ---");
    print!("{}", emit_report(&report_rows, ReportFormat::Markdown).unwrap());
    println!("--- csv ---");
    print!("{}", emit_report(&report_rows, ReportFormat::Csv).unwrap());

    // Undefined ratios render as n/a, never as zero.
    let empty = compute(&ConfusionMatrix::default());
    let row = ReportRow {
        model: "no-answers".into(),
        obfuscation: "Before".into(),
        metrics: empty,
    };
    println!("--- a row with undefined metrics ---");
    print!("{}", emit_report(&[row], ReportFormat::Markdown).unwrap());
}
