//! Differential-testing oracle: runs the original and obfuscated versions of
//! a function on the same seeded input vectors and compares observable
//! behavior (return value or trap class, plus the extern-event trace).

use std::collections::BTreeMap;

use crate::interp::{
    gen_vectors, run_function, ArgValue, ExecResult, ExternPolicy, InterpError, Outcome,
    VectorError,
};
use crate::ir::IrModule;

/// The obfuscated side runs with this many times the original's fuel;
/// flattening and bogus flow inflate step counts but never unboundedly.
pub const OBF_FUEL_FACTOR: u64 = 16;

/// Skipping more than this fraction of vectors makes the verdict
/// inconclusive (both sides out of fuel says nothing about equivalence).
const MAX_SKIP_FRACTION: f64 = 0.25;

/// Condensed view of one run, kept in divergence payloads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub events: Vec<crate::interp::ExternEvent>,
    pub steps: u64,
}

impl From<ExecResult> for RunSummary {
    fn from(r: ExecResult) -> Self {
        RunSummary {
            outcome: r.outcome,
            events: r.events,
            steps: r.steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Equivalent,
    Diverged {
        /// Index of the first failing vector.
        vector_index: usize,
        vector: Vec<ArgValue>,
        original: Box<RunSummary>,
        obfuscated: Box<RunSummary>,
    },
    Inconclusive {
        reason: String,
    },
}

/// Result of one differential comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub function: String,
    /// Vectors actually compared (skipped ones excluded).
    pub vectors_run: usize,
    /// Vectors skipped because a side ran out of fuel.
    pub skipped: usize,
    pub verdict: Verdict,
    /// Total hits, across all runs, of obfuscated-side blocks that do not
    /// exist in the original function (the inserted blocks). Junk blocks
    /// must show zero here.
    pub coverage: BTreeMap<String, u64>,
}

impl EquivalenceReport {
    pub fn is_equivalent(&self) -> bool {
        matches!(self.verdict, Verdict::Equivalent)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EquivError {
    #[error("function '@{0}' is not defined on both sides")]
    UnknownFunction(String),
    #[error("signatures of '@{function}' differ: {detail}")]
    SignatureMismatch { function: String, detail: String },
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Interp(#[from] InterpError),
}

/// Runs both versions of `@function` on `n` seeded vectors.
///
/// Equivalent iff every compared vector matches on outcome (same returned
/// value or same trap class) and on the exact extern-event trace. A vector
/// where either side exhausts its fuel is skipped; more than 25% skipped
/// vectors yield `Inconclusive`.
pub fn check_equivalence(
    original: &IrModule,
    obfuscated: &IrModule,
    function: &str,
    n: usize,
    seed: u64,
    fuel: u64,
) -> Result<EquivalenceReport, EquivError> {
    let orig_fn = original
        .function(function)
        .filter(|f| !f.is_declaration)
        .ok_or_else(|| EquivError::UnknownFunction(function.to_string()))?;
    let obf_fn = obfuscated
        .function(function)
        .filter(|f| !f.is_declaration)
        .ok_or_else(|| EquivError::UnknownFunction(function.to_string()))?;
    if orig_fn.signature() != obf_fn.signature() {
        return Err(EquivError::SignatureMismatch {
            function: function.to_string(),
            detail: format!(
                "{} vs {}",
                crate::ir::IrType::Func(Box::new(orig_fn.signature())),
                crate::ir::IrType::Func(Box::new(obf_fn.signature()))
            ),
        });
    }

    let orig_labels: std::collections::HashSet<&str> =
        orig_fn.blocks.iter().map(|b| b.label.as_str()).collect();
    let mut coverage: BTreeMap<String, u64> = obf_fn
        .blocks
        .iter()
        .filter(|b| !orig_labels.contains(b.label.as_str()))
        .map(|b| (b.label.clone(), 0))
        .collect();

    let vectors = gen_vectors(&orig_fn.signature(), n, seed)?;
    let policy = ExternPolicy::default();

    let mut vectors_run = 0;
    let mut skipped = 0;
    let mut verdict = Verdict::Equivalent;
    for (index, vector) in vectors.iter().enumerate() {
        let orig_result = run_function(original, function, vector, fuel, &policy)?;
        let obf_result = run_function(
            obfuscated,
            function,
            vector,
            fuel.saturating_mul(OBF_FUEL_FACTOR),
            &policy,
        )?;

        for (label, hits) in &mut coverage {
            *hits += obf_result.block_hits.get(label).copied().unwrap_or(0);
        }

        if orig_result.outcome == Outcome::OutOfFuel || obf_result.outcome == Outcome::OutOfFuel {
            skipped += 1;
            continue;
        }
        vectors_run += 1;
        let matches = outcomes_match(&orig_result.outcome, &obf_result.outcome)
            && orig_result.events == obf_result.events;
        if !matches {
            verdict = Verdict::Diverged {
                vector_index: index,
                vector: vector.clone(),
                original: Box::new(orig_result.into()),
                obfuscated: Box::new(obf_result.into()),
            };
            break;
        }
    }

    if matches!(verdict, Verdict::Equivalent) && skipped as f64 > n as f64 * MAX_SKIP_FRACTION {
        verdict = Verdict::Inconclusive {
            reason: format!("{skipped} of {n} vectors ran out of fuel on at least one side"),
        };
    }

    Ok(EquivalenceReport {
        function: function.to_string(),
        vectors_run,
        skipped,
        verdict,
        coverage,
    })
}

fn outcomes_match(a: &Outcome, b: &Outcome) -> bool {
    match (a, b) {
        (Outcome::Returned(x), Outcome::Returned(y)) => x == y,
        // Trap classes must match; the trapping instruction may move.
        (Outcome::Trapped(x), Outcome::Trapped(y)) => x == y,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{BinOp, Instruction};
    use crate::text::parse_module;

    // The iteration count is masked so every input terminates quickly.
    const LOOP: &str = "define i32 @sum(i32 %n) {\nentry:\n  %m = and i32 %n, 63\n  br label %head\nhead:\n  %i = phi i32 [ %m, %entry ], [ %d, %body ]\n  %acc = phi i32 [ 0, %entry ], [ %a2, %body ]\n  %c = icmp sgt i32 %i, 0\n  br i1 %c, label %body, label %done\nbody:\n  %d = sub i32 %i, 1\n  %a2 = add i32 %acc, %i\n  br label %head\ndone:\n  ret i32 %acc\n}\n";

    #[test]
    fn reflexivity() {
        let m = parse_module(LOOP).unwrap();
        let r = check_equivalence(&m, &m, "sum", 16, 1, 1_000_000).unwrap();
        assert!(r.is_equivalent());
        assert_eq!(r.vectors_run + r.skipped, 16);
    }

    #[test]
    fn broken_variant_diverges_on_an_early_vector() {
        let m = parse_module(LOOP).unwrap();
        let mut broken = m.clone();
        // add -> sub inside the loop body.
        for b in &mut broken.functions[0].blocks {
            for inst in &mut b.body {
                if let Instruction::Binary { op, result, .. } = inst {
                    if result == "a2" {
                        *op = BinOp::Sub;
                    }
                }
            }
        }
        let r = check_equivalence(&m, &broken, "sum", 64, 1, 1_000_000).unwrap();
        match r.verdict {
            Verdict::Diverged { vector_index, .. } => {
                assert!(vector_index < 5, "a boundary vector should expose it");
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn verdict_class_is_symmetric() {
        let m = parse_module(LOOP).unwrap();
        let obf = {
            let cfg = crate::obf::ObfConfig {
                seed: 5,
                ..Default::default()
            };
            crate::obf::run_pipeline(&m, &cfg).unwrap().0
        };
        let ab = check_equivalence(&m, &obf, "sum", 32, 9, 1_000_000).unwrap();
        let ba = check_equivalence(&obf, &m, "sum", 32, 9, 1_000_000).unwrap();
        assert!(ab.is_equivalent());
        assert!(ba.is_equivalent());
    }

    #[test]
    fn fuel_starvation_is_inconclusive_not_diverged() {
        let m = parse_module(LOOP).unwrap();
        let r = check_equivalence(&m, &m, "sum", 8, 1, 3).unwrap();
        assert!(matches!(r.verdict, Verdict::Inconclusive { .. }));
        assert!(r.skipped > 0);
    }

    #[test]
    fn unknown_function_and_signature_mismatch() {
        let m = parse_module(LOOP).unwrap();
        assert!(matches!(
            check_equivalence(&m, &m, "nope", 4, 1, 1000),
            Err(EquivError::UnknownFunction(_))
        ));
        let other = parse_module(
            "define i32 @sum(i64 %n) {\nentry:\n  ret i32 0\n}\n",
        )
        .unwrap();
        assert!(matches!(
            check_equivalence(&m, &other, "sum", 4, 1, 1000),
            Err(EquivError::SignatureMismatch { .. })
        ));
    }

    #[test]
    fn coverage_reports_inserted_blocks_only() {
        let m = parse_module(LOOP).unwrap();
        let cfg = crate::obf::ObfConfig {
            seed: 2,
            bcf_probability: 1.0,
            passes: vec![crate::obf::PassKind::Bcf],
            ..Default::default()
        };
        let (obf, report) = crate::obf::run_pipeline(&m, &cfg).unwrap();
        let r = check_equivalence(&m, &obf, "sum", 32, 4, 1_000_000).unwrap();
        assert!(r.is_equivalent());
        assert!(!r.coverage.is_empty());
        for junk in report.junk_labels("sum") {
            assert_eq!(r.coverage.get(junk), Some(&0), "junk '{junk}' executed");
        }
        // Real continuation blocks did execute.
        assert!(r.coverage.iter().any(|(l, h)| l.contains(".real") && *h > 0));
    }
}
