//! Control-flow flattening: rewrites all branching as a state machine driven
//! by one dispatcher block.
//!
//! Shape of the output:
//!
//! ```text
//! flat.entry.N:                    ; new function entry
//!   <allocas hoisted from the original entry>
//!   %flat.state.N = alloca i32
//!   store i32 <id of original entry>, ptr %flat.state.N
//!   br label %flat.dispatch.N
//! flat.dispatch.N:
//!   %flat.next.N = load i32, ptr %flat.state.N
//!   switch i32 %flat.next.N, label %flat.default.N [ one case per block ]
//! flat.default.N:
//!   unreachable
//! <original blocks, in order>:     ; each stores its successor's state id
//!   ...                            ; and branches back to the dispatcher;
//!   ...                            ; ret/unreachable blocks stay terminal
//! ```
//!
//! State ids are distinct random 32-bit constants, so case order leaks
//! nothing about block order. Before the rewrite the function is brought
//! into a canonical form: `switch` terminators are lowered to compare/branch
//! chains and SSA is dissolved (reg2mem), which confines every value to its
//! defining block and keeps dominance intact once blocks only meet through
//! the dispatcher.

use std::collections::HashSet;

use super::{ObfConfig, PassCounters, PassOutcome};
use crate::ir::demote::demote_to_memory;
use crate::ir::*;
use crate::rng::SplitMix64;

/// Flattens a multi-block function. Single-block functions (after switch
/// lowering) are returned unchanged: a one-case dispatcher hides nothing.
pub fn flatten(
    f: &IrFunction,
    _cfg: &ObfConfig,
    rng: &mut SplitMix64,
) -> Result<PassOutcome, ValidationError> {
    let violations = validate_function(f);
    if !violations.is_empty() {
        return Err(ValidationError { violations });
    }
    if f.is_declaration || f.blocks.len() <= 1 {
        return Ok(PassOutcome {
            function: f.clone(),
            stats: PassCounters {
                blocks_processed: f.blocks.len() as u64,
                ..Default::default()
            },
            junk_labels: vec![],
        });
    }

    let mut out = prepare_for_flatten(f)?;
    let mut fresh = FreshNames::for_function(&out);

    // Distinct random state ids, one per block, drawn in block order.
    let mut ids: Vec<u32> = Vec::with_capacity(out.blocks.len());
    let mut seen = HashSet::new();
    while ids.len() < out.blocks.len() {
        let id = rng.next_u32();
        if seen.insert(id) {
            ids.push(id);
        }
    }
    let id_of = |label: &str, out: &IrFunction, ids: &[u32]| -> u32 {
        let idx = out
            .blocks
            .iter()
            .position(|b| b.label == label)
            .expect("validated label");
        ids[idx]
    };

    let stats = PassCounters {
        blocks_processed: out.blocks.len() as u64,
        states_assigned: out.blocks.len() as u64,
        ..Default::default()
    };

    let entry_label = fresh.fresh("flat.entry");
    let dispatch_label = fresh.fresh("flat.dispatch");
    let default_label = fresh.fresh("flat.default");
    let state_slot = fresh.fresh("flat.state");
    let state_load = fresh.fresh("flat.next");

    // Allocas must stay at the function entry to keep dominating their uses;
    // everything else of the original entry runs as the first state.
    let mut hoisted: Vec<Instruction> = Vec::new();
    let original_entry_label = out.blocks[0].label.clone();
    out.blocks[0]
        .body
        .retain(|inst| match inst {
            Instruction::Alloca { .. } => {
                hoisted.push(inst.clone());
                false
            }
            _ => true,
        });

    let store_state = |value: Value| Instruction::Store {
        ty: IrType::Int(32),
        value,
        ptr: Value::local(&state_slot),
    };
    let state_const =
        |label: &str, out: &IrFunction, ids: &[u32]| Value::Const(ConstInt::from_bits(32, id_of(label, out, ids) as u64));

    // Rewrite terminators block by block.
    for bi in 0..out.blocks.len() {
        let term = out.blocks[bi].term.clone();
        match term {
            Terminator::Ret(_) | Terminator::Unreachable => {}
            Terminator::Br(target) => {
                let next = state_const(&target, &out, &ids);
                let b = &mut out.blocks[bi];
                b.body.push(store_state(next));
                b.term = Terminator::Br(dispatch_label.clone());
            }
            Terminator::CondBr {
                cond,
                then_label,
                else_label,
            } => {
                let then_id = state_const(&then_label, &out, &ids);
                let else_id = state_const(&else_label, &out, &ids);
                let sel = fresh.fresh("flat.sel");
                let b = &mut out.blocks[bi];
                b.body.push(Instruction::Select {
                    result: sel.clone(),
                    ty: IrType::Int(32),
                    cond,
                    then_value: then_id,
                    else_value: else_id,
                });
                b.body.push(store_state(Value::local(&sel)));
                b.term = Terminator::Br(dispatch_label.clone());
            }
            Terminator::Switch { .. } => unreachable!("switches were lowered"),
        }
    }

    let mut entry_body = hoisted;
    entry_body.push(Instruction::Alloca {
        result: state_slot.clone(),
        allocated: IrType::Int(32),
    });
    entry_body.push(store_state(state_const(&original_entry_label, &out, &ids)));
    let setup = BasicBlock {
        label: entry_label,
        phis: vec![],
        body: entry_body,
        term: Terminator::Br(dispatch_label.clone()),
    };

    let cases: Vec<(ConstInt, String)> = out
        .blocks
        .iter()
        .zip(&ids)
        .map(|(b, id)| (ConstInt::from_bits(32, *id as u64), b.label.clone()))
        .collect();
    let dispatcher = BasicBlock {
        label: dispatch_label,
        phis: vec![],
        body: vec![Instruction::Load {
            result: state_load.clone(),
            ty: IrType::Int(32),
            ptr: Value::local(&state_slot),
        }],
        term: Terminator::Switch {
            ty: IrType::Int(32),
            value: Value::local(&state_load),
            default: default_label.clone(),
            cases,
        },
    };
    let default_block = BasicBlock {
        label: default_label,
        phis: vec![],
        body: vec![],
        term: Terminator::Unreachable,
    };

    let mut blocks = vec![setup, dispatcher, default_block];
    blocks.append(&mut out.blocks);
    out.blocks = blocks;

    debug_assert_eq!(validate_function(&out), vec![]);
    Ok(PassOutcome {
        function: out,
        stats,
        junk_labels: vec![],
    })
}

/// The canonical form flattening rewrites: `switch` terminators lowered to
/// equality-test chains, then SSA dissolved so no value crosses a block
/// boundary in a register. The dispatcher's case count equals this form's
/// block count.
pub fn prepare_for_flatten(f: &IrFunction) -> Result<IrFunction, ValidationError> {
    let mut out = f.clone();
    lower_switches(&mut out);
    demote_to_memory(&out)
}

fn lower_switches(f: &mut IrFunction) {
    let mut fresh = FreshNames::for_function(f);
    let mut bi = 0;
    while bi < f.blocks.len() {
        let Terminator::Switch {
            ty,
            value,
            default,
            cases,
        } = f.blocks[bi].term.clone()
        else {
            bi += 1;
            continue;
        };
        if cases.is_empty() {
            f.blocks[bi].term = Terminator::Br(default);
            bi += 1;
            continue;
        }
        // Equality-test chain: each case gets a compare-and-branch block,
        // the last miss falls through to the default label.
        let base = f.blocks[bi].label.clone();
        let chain: Vec<String> = (1..cases.len())
            .map(|_| fresh.fresh(&format!("{base}.case")))
            .collect();
        let mut insert_at = bi + 1;
        for (ci, (cv, target)) in cases.iter().enumerate() {
            let cmp = fresh.fresh(&format!("{base}.is"));
            let miss = if ci + 1 < cases.len() {
                chain[ci].clone()
            } else {
                default.clone()
            };
            let test = Instruction::Icmp {
                result: cmp.clone(),
                pred: IcmpPred::Eq,
                ty: ty.clone(),
                lhs: value.clone(),
                rhs: Value::Const(*cv),
            };
            let term = Terminator::CondBr {
                cond: Value::local(&cmp),
                then_label: target.clone(),
                else_label: miss,
            };
            if ci == 0 {
                f.blocks[bi].body.push(test);
                f.blocks[bi].term = term;
            } else {
                f.blocks.insert(
                    insert_at,
                    BasicBlock {
                        label: chain[ci - 1].clone(),
                        phis: vec![],
                        body: vec![test],
                        term,
                    },
                );
                insert_at += 1;
            }
        }
        // Phis in the switch's targets name this block as predecessor; the
        // edge may now originate from a chain block instead.
        let mut edge_source: std::collections::HashMap<String, String> = Default::default();
        for (ci, (_, target)) in cases.iter().enumerate() {
            let source = if ci == 0 { base.clone() } else { chain[ci - 1].clone() };
            edge_source.entry(target.clone()).or_insert(source);
        }
        edge_source
            .entry(default.clone())
            .or_insert_with(|| chain.last().cloned().unwrap_or_else(|| base.clone()));
        for (target, source) in edge_source {
            if let Some(block) = f.blocks.iter_mut().find(|b| b.label == target) {
                for phi in &mut block.phis {
                    for (_, l) in &mut phi.incomings {
                        if *l == base {
                            *l = source.clone();
                        }
                    }
                }
            }
        }
        bi += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{run_function, ArgValue, ExternPolicy};
    use crate::text::parse_module;

    fn flat(src: &str, seed: u64) -> (IrFunction, IrFunction, PassCounters) {
        let m = parse_module(src).unwrap();
        let f = m.functions[0].clone();
        let mut rng = SplitMix64::new(seed);
        let outcome = flatten(&f, &ObfConfig::default(), &mut rng).unwrap();
        (f, outcome.function, outcome.stats)
    }

    fn dispatcher_of(f: &IrFunction) -> &BasicBlock {
        let mut dispatchers = f
            .blocks
            .iter()
            .filter(|b| matches!(b.term, Terminator::Switch { .. }));
        let d = dispatchers.next().expect("one dispatcher");
        assert!(dispatchers.next().is_none(), "exactly one dispatcher");
        d
    }

    #[test]
    fn single_block_function_unchanged() {
        let (orig, out, stats) = flat(
            "define i32 @f(i32 %a) {\nentry:\n  %x = add i32 %a, 1\n  ret i32 %x\n}\n",
            1,
        );
        assert_eq!(orig, out);
        assert_eq!(stats.states_assigned, 0);
    }

    #[test]
    fn diamond_gets_dispatcher_with_case_per_block() {
        let src = "define i32 @f(i1 %c) {\nentry:\n  br i1 %c, label %a, label %b\na:\n  br label %done\nb:\n  br label %done\ndone:\n  ret i32 0\n}\n";
        let (orig, out, stats) = flat(src, 2);
        assert_eq!(stats.states_assigned, orig.blocks.len() as u64);
        let d = dispatcher_of(&out);
        let Terminator::Switch { cases, .. } = &d.term else { unreachable!() };
        assert_eq!(cases.len(), orig.blocks.len());
        // Every non-terminal original block branches only to the dispatcher.
        for b in &out.blocks {
            if b.label == d.label || b.term.is_terminal() {
                continue;
            }
            match &b.term {
                Terminator::Br(t) => assert_eq!(t, &d.label, "block {} bypasses dispatcher", b.label),
                other => panic!("unexpected terminator {other:?}"),
            }
        }
        assert_eq!(validate_function(&out), vec![]);
    }

    #[test]
    fn loop_flattens_and_preserves_results() {
        let src = "define i32 @count(i32 %n) {\nentry:\n  br label %head\nhead:\n  %i = phi i32 [ %n, %entry ], [ %dec, %body ]\n  %c = icmp sgt i32 %i, 0\n  br i1 %c, label %body, label %done\nbody:\n  %dec = sub i32 %i, 1\n  br label %head\ndone:\n  ret i32 %i\n}\n";
        let m = parse_module(src).unwrap();
        let (orig, out, _) = flat(src, 3);
        let mut m2 = m.clone();
        m2.functions[0] = out.clone();
        for n in [-3i64, 0, 1, 7, 40] {
            let args = [ArgValue::Int(ConstInt::new(32, n))];
            let a = run_function(&m, "count", &args, 100_000, &ExternPolicy::default()).unwrap();
            let b = run_function(&m2, "count", &args, 100_000, &ExternPolicy::default()).unwrap();
            assert_eq!(a.outcome, b.outcome, "n = {n}");
            assert!(b.steps > a.steps, "flattening must lengthen execution");
        }
        assert_eq!(orig.name, out.name);
    }

    #[test]
    fn switch_terminator_is_lowered_first() {
        let src = "define i32 @pick(i32 %x) {\nentry:\n  switch i32 %x, label %d [\n    i32 1, label %one\n    i32 2, label %two\n  ]\none:\n  ret i32 10\ntwo:\n  ret i32 20\nd:\n  ret i32 0\n}\n";
        let m = parse_module(src).unwrap();
        let (_, out, stats) = flat(src, 4);
        // entry + 1 chain block + 3 rets = 5 canonical blocks
        assert_eq!(stats.states_assigned, 5);
        let d = dispatcher_of(&out);
        let Terminator::Switch { cases, .. } = &d.term else { unreachable!() };
        assert_eq!(cases.len(), 5);
        let mut m2 = m.clone();
        m2.functions[0] = out;
        for x in [0i64, 1, 2, 3] {
            let args = [ArgValue::Int(ConstInt::new(32, x))];
            let a = run_function(&m, "pick", &args, 10_000, &ExternPolicy::default()).unwrap();
            let b = run_function(&m2, "pick", &args, 10_000, &ExternPolicy::default()).unwrap();
            assert_eq!(a.outcome, b.outcome, "x = {x}");
        }
    }

    #[test]
    fn state_ids_are_distinct_random_u32() {
        let src = "define i32 @f(i1 %c) {\nentry:\n  br i1 %c, label %a, label %b\na:\n  ret i32 1\nb:\n  ret i32 2\n}\n";
        let (_, out, _) = flat(src, 5);
        let d = dispatcher_of(&out);
        let Terminator::Switch { cases, .. } = &d.term else { unreachable!() };
        let values: Vec<u64> = cases.iter().map(|(c, _)| c.bits()).collect();
        let set: HashSet<u64> = values.iter().copied().collect();
        assert_eq!(set.len(), values.len());
        // Sequential ids would leak block order.
        assert!(values.windows(2).any(|w| w[1] != w[0] + 1));
    }
}
