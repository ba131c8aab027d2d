//! Differential testing: prove an obfuscated function behaves like the
//! original on seeded input vectors, and watch the oracle catch a broken
//! transformation.
//!
//! ```sh
//! cargo run -p camo --example verify_equivalence
//! ```

use camo::equiv::{check_equivalence, Verdict};
use camo::interp::DEFAULT_FUEL;
use camo::ir::{BinOp, Instruction};
use camo::obf::{run_pipeline, ObfConfig};
use camo::text::parse_module;

fn main() {
    let source = r#"define i32 @sumto(i32 %n) {
entry:
  %m = and i32 %n, 63
  br label %head
head:
  %i = phi i32 [ %m, %entry ], [ %dec, %body ]
  %acc = phi i32 [ 0, %entry ], [ %acc2, %body ]
  %more = icmp sgt i32 %i, 0
  br i1 %more, label %body, label %done
body:
  %dec = sub i32 %i, 1
  %acc2 = add i32 %acc, %i
  br label %head
done:
  ret i32 %acc
}
"#;
    let original = parse_module(source).unwrap();
    let (obfuscated, _) = run_pipeline(
        &original,
        &ObfConfig {
            seed: 3,
            ..Default::default()
        },
    )
    .unwrap();

    let report =
        check_equivalence(&original, &obfuscated, "sumto", 64, 7, DEFAULT_FUEL).unwrap();
    println!(
        "obfuscated vs original: {:?} over {} vectors",
        report.verdict, report.vectors_run
    );
    assert!(matches!(report.verdict, Verdict::Equivalent));

    // Now sabotage the "obfuscation": the accumulator adds become subs.
    let mut broken = original.clone();
    for block in &mut broken.functions[0].blocks {
        for inst in &mut block.body {
            if let Instruction::Binary { op, result, .. } = inst {
                if result == "acc2" {
                    *op = BinOp::Sub;
                }
            }
        }
    }
    let report = check_equivalence(&original, &broken, "sumto", 64, 7, DEFAULT_FUEL).unwrap();
    match report.verdict {
        Verdict::Diverged {
            vector_index,
            vector,
            original,
            obfuscated,
        } => {
            println!("sabotage caught at vector {vector_index} ({vector:?}):");
            println!("  original  -> {:?}", original.outcome);
            println!("  obfuscated-> {:?}", obfuscated.outcome);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}
