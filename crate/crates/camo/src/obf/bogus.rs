//! Bogus control flow: guards real blocks behind opaque predicates and adds
//! never-executed junk clones, so static readers see twice the paths.
//!
//! For each selected block `B`:
//!
//! ```text
//! B:            (guard; keeps B's label and phis)
//!   <opaque predicate>
//!   br i1 %cond, label %B.real.N, label %junk.N   ; arms swapped for F1
//! B.real.N:     (the original body and terminator)
//! junk.N:       (mutated clone of the body)
//!   br label %B
//! ```
//!
//! The junk arm loops back to the guard; since the predicate's truth value
//! is constant, it can never run. Junk labels always start with `junk.`,
//! and the pipeline report lists them per function for coverage checks.

use std::collections::HashMap;

use super::opaque::{OpaquePool, Truth};
use super::{ObfConfig, PassCounters, PassOutcome};
use crate::ir::*;
use crate::rng::SplitMix64;

/// Inserts opaque guards on candidate blocks with `cfg.bcf_probability`.
/// The entry block is never a candidate (it must keep zero predecessors).
pub fn insert_bogus_flow(
    f: &IrFunction,
    cfg: &ObfConfig,
    rng: &mut SplitMix64,
    pool: &mut OpaquePool,
) -> Result<PassOutcome, ValidationError> {
    let violations = validate_function(f);
    if !violations.is_empty() {
        return Err(ValidationError { violations });
    }
    let mut out = f.clone();
    let mut fresh = FreshNames::for_function(&out);
    let mut stats = PassCounters::default();
    let mut junk_labels = Vec::new();

    let mut index = 1; // skip the entry block
    while index < out.blocks.len() {
        stats.blocks_processed += 1;
        if !rng.next_bool(cfg.bcf_probability) {
            index += 1;
            continue;
        }
        stats.predicates_inserted += 1;

        let original = out.blocks[index].clone();
        let guard_label = original.label.clone();
        let real_label = fresh.fresh(&format!("{guard_label}.real"));
        let junk_label = fresh.fresh("junk");
        junk_labels.push(junk_label.clone());

        let predicate = pool.build_predicate(rng, &mut fresh);
        let (then_label, else_label) = match predicate.truth {
            Truth::AlwaysTrue => (real_label.clone(), junk_label.clone()),
            Truth::AlwaysFalse => (junk_label.clone(), real_label.clone()),
        };

        // Guard: original phis (plus an undef incoming for the junk edge),
        // then the predicate computation.
        let mut guard_phis = original.phis.clone();
        for phi in &mut guard_phis {
            phi.incomings
                .push((Value::Undef(phi.ty.clone()), junk_label.clone()));
        }
        let guard = BasicBlock {
            label: guard_label.clone(),
            phis: guard_phis,
            body: predicate.instructions,
            term: Terminator::CondBr {
                cond: Value::local(&predicate.result),
                then_label,
                else_label,
            },
        };

        let real = BasicBlock {
            label: real_label.clone(),
            phis: vec![],
            body: original.body.clone(),
            term: original.term.clone(),
        };

        let junk = BasicBlock {
            label: junk_label,
            phis: vec![],
            body: junk_body(&original.body, rng, &mut fresh),
            term: Terminator::Br(guard_label.clone()),
        };

        // The original terminator now fires from the real block, so phis in
        // its successors must name the new predecessor.
        let successors: Vec<String> = original
            .term
            .successors()
            .into_iter()
            .map(str::to_string)
            .collect();

        out.blocks[index] = guard;
        out.blocks.insert(index + 1, real);
        out.blocks.insert(index + 2, junk);

        for succ in successors {
            let block = out.blocks.iter_mut().find(|b| b.label == succ).unwrap();
            for phi in &mut block.phis {
                for (_, label) in &mut phi.incomings {
                    if *label == guard_label {
                        *label = real_label.clone();
                    }
                }
            }
        }

        index += 3;
    }

    debug_assert_eq!(validate_function(&out), vec![]);
    Ok(PassOutcome {
        function: out,
        stats,
        junk_labels,
    })
}

/// Builds the junk arm's body: a clone of the real body with all results
/// renamed and opcodes/constants perturbed, or a synthesized dead-code
/// snippet (unused variable, redundant arithmetic, pointless compare) when
/// the real body is empty.
fn junk_body(body: &[Instruction], rng: &mut SplitMix64, fresh: &mut FreshNames) -> Vec<Instruction> {
    if body.is_empty() {
        return synthesized_junk(rng, fresh);
    }
    let mut rename: HashMap<String, String> = HashMap::new();
    let mut out = Vec::with_capacity(body.len());
    for inst in body {
        let mut clone = inst.clone();
        clone.for_each_value_mut(|v| {
            if let Value::Local(n) = v {
                if let Some(new) = rename.get(n) {
                    *v = Value::local(new.clone());
                }
            }
        });
        if let Some(r) = clone.result().map(str::to_string) {
            let renamed = fresh.fresh(&format!("{r}.junk"));
            rename.insert(r, renamed.clone());
            *clone.result_mut().unwrap() = renamed;
        }
        perturb(&mut clone, rng);
        out.push(clone);
    }
    out
}

/// Dead-path-only mutations: swap commutative-ish opcodes and flip constant
/// bits. Types are preserved, so the clone still validates.
fn perturb(inst: &mut Instruction, rng: &mut SplitMix64) {
    if let Instruction::Binary { op, .. } = inst {
        if rng.next_bool(0.5) {
            *op = match *op {
                BinOp::Add => BinOp::Sub,
                BinOp::Sub => BinOp::Add,
                BinOp::And => BinOp::Or,
                BinOp::Or => BinOp::Xor,
                BinOp::Xor => BinOp::And,
                BinOp::Mul => BinOp::Add,
                other => other,
            };
        }
    }
    if let Instruction::Binary { rhs, .. } = inst {
        if let Value::Const(c) = rhs {
            if rng.next_bool(0.25) {
                *rhs = Value::Const(ConstInt::from_bits(c.width(), c.bits() ^ rng.next_u64()));
            }
        }
    }
}

fn synthesized_junk(rng: &mut SplitMix64, fresh: &mut FreshNames) -> Vec<Instruction> {
    let a = fresh.fresh("junk.v");
    let b = fresh.fresh("junk.v");
    let c = fresh.fresh("junk.v");
    let seed_const = (rng.next_u64() & 0xff) as i64;
    vec![
        Instruction::Binary {
            result: a.clone(),
            op: BinOp::Add,
            ty: IrType::Int(32),
            lhs: Value::const_int(32, 10),
            rhs: Value::const_int(32, seed_const),
        },
        Instruction::Binary {
            result: b.clone(),
            op: BinOp::Mul,
            ty: IrType::Int(32),
            lhs: Value::local(&a),
            rhs: Value::const_int(32, 5),
        },
        Instruction::Icmp {
            result: c,
            pred: IcmpPred::Sgt,
            ty: IrType::Int(32),
            lhs: Value::local(&b),
            rhs: Value::const_int(32, 50),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{gen_vectors, run_function, ArgValue, ExternPolicy};
    use crate::text::parse_module;

    const DIAMOND: &str = "define i32 @f(i32 %x) {\nentry:\n  %c = icmp sgt i32 %x, 0\n  br i1 %c, label %pos, label %neg\npos:\n  %p = add i32 %x, 1\n  br label %join\nneg:\n  %n = sub i32 0, %x\n  br label %join\njoin:\n  %r = phi i32 [ %p, %pos ], [ %n, %neg ]\n  ret i32 %r\n}\n";

    fn apply(src: &str, p: f64, seed: u64) -> (IrModule, PassOutcome) {
        let m = parse_module(src).unwrap();
        let f = m.functions[0].clone();
        let mut pool = OpaquePool::new(&m, seed);
        let mut rng = SplitMix64::new(seed);
        let cfg = ObfConfig {
            bcf_probability: p,
            ..Default::default()
        };
        let outcome = insert_bogus_flow(&f, &cfg, &mut rng, &mut pool).unwrap();
        let mut out = m;
        out.functions[0] = outcome.function.clone();
        out.globals.extend(pool.used_globals());
        (out, outcome)
    }

    #[test]
    fn probability_zero_is_identity() {
        let (m, outcome) = apply(DIAMOND, 0.0, 7);
        let orig = parse_module(DIAMOND).unwrap();
        assert_eq!(m, orig);
        assert_eq!(outcome.stats.predicates_inserted, 0);
        assert!(outcome.junk_labels.is_empty());
    }

    #[test]
    fn probability_one_guards_every_candidate() {
        let (m, outcome) = apply(DIAMOND, 1.0, 7);
        assert_eq!(outcome.stats.blocks_processed, 3); // pos, neg, join
        assert_eq!(outcome.stats.predicates_inserted, 3);
        assert_eq!(outcome.junk_labels.len(), 3);
        assert!(outcome.junk_labels.iter().all(|l| l.starts_with("junk.")));
        assert_eq!(crate::ir::validate(&m), vec![]);
    }

    #[test]
    fn junk_blocks_never_run_and_semantics_hold() {
        let (m, outcome) = apply(DIAMOND, 1.0, 3);
        let orig = parse_module(DIAMOND).unwrap();
        let sig = orig.functions[0].signature();
        let vectors = gen_vectors(&sig, 32, 5).unwrap();
        for v in &vectors {
            let args: Vec<ArgValue> = v.clone();
            let a = run_function(&orig, "f", &args, 100_000, &ExternPolicy::default()).unwrap();
            let b = run_function(&m, "f", &args, 100_000, &ExternPolicy::default()).unwrap();
            assert_eq!(a.outcome, b.outcome);
            for junk in &outcome.junk_labels {
                assert_eq!(b.block_hits.get(junk), Some(&0), "junk block {junk} ran");
            }
        }
    }

    #[test]
    fn entry_block_is_never_guarded() {
        let (m, _) = apply(DIAMOND, 1.0, 11);
        let f = &m.functions[0];
        assert_eq!(f.blocks[0].label, "entry");
        assert!(matches!(
            f.blocks[0].term,
            Terminator::CondBr { .. } // entry's own conditional branch, not a guard
        ));
        let cfg = crate::ir::build_cfg(f).unwrap();
        assert!(cfg.predecessors("entry").is_empty());
    }
}
