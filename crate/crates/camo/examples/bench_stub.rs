//! End-to-end benchmark protocol against the deterministic keyword stub:
//! prompts, three fresh-session trials per sample, majority vote, metrics.
//!
//! ```sh
//! cargo run -p camo --example bench_stub
//! ```

use camo::bench::{
    build_prompt, majority, run_trials, PromptKind, StubAdapter, Verdict,
};
use camo::metrics::{compute, render_metric, ConfusionMatrix};

fn main() {
    let adapter = StubAdapter::new("keyword").unwrap();

    // One insecure-looking and one clean sample, as the model would see them.
    let samples = [
        (
            "demo-vuln",
            true,
            "void copy(char *s) { char b[8]; strcpy(b, s); }",
        ),
        (
            "demo-safe",
            false,
            "int add(int a, int b) { return a + b; }",
        ),
    ];

    println!("--- the prompt sent for the first sample ---");
    println!("{}", build_prompt(PromptKind::CCode, samples[0].2).unwrap());

    let mut cm = ConfusionMatrix::default();
    for (id, vulnerable, code) in samples {
        let records = run_trials(id, PromptKind::CCode, code, &adapter, 3, |_, _, _| {}).unwrap();
        for r in &records {
            println!("{id} trial {}: {:?}", r.trial, r.verdict);
            if let Verdict::Insecure { reason } = &r.verdict {
                println!("    reason: {reason}");
            }
        }
        let m = majority(&records).unwrap();
        println!(
            "{id}: final {:?} ({}–{} with {} invalid)",
            m.final_label, m.votes.secure, m.votes.insecure, m.votes.invalid
        );
        match (m.final_label, vulnerable) {
            (camo::bench::FinalLabel::Insecure, true) => cm.tp += 1,
            (camo::bench::FinalLabel::Insecure, false) => cm.fp += 1,
            (camo::bench::FinalLabel::Secure, true) => cm.fn_ += 1,
            (camo::bench::FinalLabel::Secure, false) => cm.tn += 1,
            (camo::bench::FinalLabel::Inconclusive, _) => {}
        }
    }

    let metrics = compute(&cm);
    println!(
        "matrix tp={} fp={} fn={} tn={}  accuracy={} f1={}",
        cm.tp,
        cm.fp,
        cm.fn_,
        cm.tn,
        render_metric(metrics.accuracy),
        render_metric(metrics.f1),
    );
}
