//! SSA demotion (reg2mem): rewrites phis and cross-block values into entry
//! allocas with store/load pairs, so later control-flow rewrites never have
//! to repair SSA form.

use super::types::*;
use super::validate::{validate_function, ValidationError};

/// Returns a phi-free, observationally equivalent copy of `f`.
///
/// Every phi becomes a stack slot: one store per incoming edge, one load at
/// the head of the phi's block. Every value live across a block boundary is
/// then given its own slot with a store after the definition and a reload in
/// front of each remote use. Entry-block allocas already dominate the whole
/// function and are left in registers.
pub fn demote_to_memory(f: &IrFunction) -> Result<IrFunction, ValidationError> {
    let violations = validate_function(f);
    if !violations.is_empty() {
        return Err(ValidationError { violations });
    }
    if f.is_declaration {
        return Ok(f.clone());
    }
    let mut f = f.clone();
    let mut fresh = FreshNames::for_function(&f);
    demote_phis(&mut f, &mut fresh);
    demote_cross_block(&mut f, &mut fresh);
    debug_assert_eq!(validate_function(&f), vec![]);
    Ok(f)
}

fn demote_phis(f: &mut IrFunction, fresh: &mut FreshNames) {
    let mut allocas: Vec<Instruction> = Vec::new();
    for bi in 0..f.blocks.len() {
        let phis = std::mem::take(&mut f.blocks[bi].phis);
        if phis.is_empty() {
            continue;
        }
        let mut loads: Vec<Instruction> = Vec::new();
        for phi in phis {
            let slot = fresh.fresh(&format!("{}.slot", phi.result));
            allocas.push(Instruction::Alloca {
                result: slot.clone(),
                allocated: phi.ty.clone(),
            });
            // The stores read SSA values computed before any of them runs,
            // so a block feeding several phis keeps parallel-copy semantics.
            for (value, pred) in &phi.incomings {
                let pred_block = f
                    .blocks
                    .iter_mut()
                    .find(|b| &b.label == pred)
                    .expect("validated phi predecessor");
                pred_block.body.push(Instruction::Store {
                    ty: phi.ty.clone(),
                    value: value.clone(),
                    ptr: Value::local(slot.clone()),
                });
            }
            loads.push(Instruction::Load {
                result: phi.result,
                ty: phi.ty,
                ptr: Value::local(slot),
            });
        }
        f.blocks[bi].body.splice(0..0, loads);
    }
    f.blocks[0].body.splice(0..0, allocas);
}

fn demote_cross_block(f: &mut IrFunction, fresh: &mut FreshNames) {
    // Defs that are observed outside their defining block, in a stable order:
    // parameters first, then results in block/instruction order.
    let mut candidates: Vec<(String, IrType)> = Vec::new();
    for p in &f.params {
        if used_outside(f, &p.name, 0) {
            candidates.push((p.name.clone(), p.ty.clone()));
        }
    }
    for (bi, b) in f.blocks.iter().enumerate() {
        for inst in &b.body {
            let Some(name) = inst.result() else { continue };
            // Entry allocas dominate every block; leave them alone.
            if bi == 0 && matches!(inst, Instruction::Alloca { .. }) {
                continue;
            }
            if used_outside(f, name, bi) {
                let ty = inst.result_type().expect("defining instruction has a type");
                candidates.push((name.to_string(), ty));
            }
        }
    }

    let mut allocas: Vec<Instruction> = Vec::new();
    let mut param_stores: Vec<Instruction> = Vec::new();
    for (name, ty) in candidates {
        let slot = fresh.fresh(&format!("{name}.slot"));
        allocas.push(Instruction::Alloca {
            result: slot.clone(),
            allocated: ty.clone(),
        });

        let def_block = def_block_of(f, &name);
        match def_block {
            None => param_stores.push(Instruction::Store {
                ty: ty.clone(),
                value: Value::local(name.clone()),
                ptr: Value::local(slot.clone()),
            }),
            Some(bi) => {
                let body = &mut f.blocks[bi].body;
                let pos = body
                    .iter()
                    .position(|i| i.result() == Some(name.as_str()))
                    .expect("definition present");
                body.insert(
                    pos + 1,
                    Instruction::Store {
                        ty: ty.clone(),
                        value: Value::local(name.clone()),
                        ptr: Value::local(slot.clone()),
                    },
                );
            }
        }

        // Reload in front of every remote use. Parameters dominate the entry
        // block directly, so it counts as their home block too.
        let home = def_block.unwrap_or(0);
        for (bi, b) in f.blocks.iter_mut().enumerate() {
            if bi == home {
                continue;
            }
            let mut rebuilt: Vec<Instruction> = Vec::with_capacity(b.body.len());
            for mut inst in b.body.drain(..) {
                if uses_local(&inst, &name) {
                    let reload = fresh.fresh(&format!("{name}.reload"));
                    rebuilt.push(Instruction::Load {
                        result: reload.clone(),
                        ty: ty.clone(),
                        ptr: Value::local(slot.clone()),
                    });
                    rename_local(&mut inst, &name, &reload);
                }
                rebuilt.push(inst);
            }
            b.body = rebuilt;

            let mut term_uses = false;
            b.term.for_each_value(|v| {
                if v.as_local() == Some(name.as_str()) {
                    term_uses = true;
                }
            });
            if term_uses {
                let reload = fresh.fresh(&format!("{name}.reload"));
                b.body.push(Instruction::Load {
                    result: reload.clone(),
                    ty: ty.clone(),
                    ptr: Value::local(slot.clone()),
                });
                b.term.for_each_value_mut(|v| {
                    if v.as_local() == Some(name.as_str()) {
                        *v = Value::local(reload.clone());
                    }
                });
            }
        }
    }

    let mut prefix = allocas;
    prefix.extend(param_stores);
    f.blocks[0].body.splice(0..0, prefix);
}

fn used_outside(f: &IrFunction, name: &str, def_block: usize) -> bool {
    for (bi, b) in f.blocks.iter().enumerate() {
        if bi == def_block {
            continue;
        }
        let mut found = false;
        for inst in &b.body {
            inst.for_each_value(|v| {
                if v.as_local() == Some(name) {
                    found = true;
                }
            });
        }
        b.term.for_each_value(|v| {
            if v.as_local() == Some(name) {
                found = true;
            }
        });
        if found {
            return true;
        }
    }
    false
}

fn def_block_of(f: &IrFunction, name: &str) -> Option<usize> {
    for (bi, b) in f.blocks.iter().enumerate() {
        if b.body.iter().any(|i| i.result() == Some(name)) {
            return Some(bi);
        }
    }
    None // parameter
}

fn uses_local(inst: &Instruction, name: &str) -> bool {
    let mut found = false;
    inst.for_each_value(|v| {
        if v.as_local() == Some(name) {
            found = true;
        }
    });
    found
}

fn rename_local(inst: &mut Instruction, from: &str, to: &str) {
    inst.for_each_value_mut(|v| {
        if v.as_local() == Some(from) {
            *v = Value::local(to);
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_module;

    fn fn_of(src: &str) -> IrFunction {
        parse_module(src).unwrap().functions[0].clone()
    }

    fn count_op(f: &IrFunction, pick: impl Fn(&Instruction) -> bool) -> usize {
        f.blocks
            .iter()
            .flat_map(|b| b.body.iter())
            .filter(|i| pick(i))
            .count()
    }

    #[test]
    fn no_cross_block_values_is_identity_shaped() {
        let f = fn_of(
            "define i32 @f(i32 %a) {\nentry:\n  %x = add i32 %a, 1\n  ret i32 %x\n}\n",
        );
        let out = demote_to_memory(&f).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn single_cross_block_value_gets_one_slot() {
        let f = fn_of(
            "define i32 @f(i32 %a) {\nentry:\n  %v = add i32 %a, 1\n  br label %block2\nblock2:\n  %r = add i32 %v, 2\n  ret i32 %r\n}\n",
        );
        let out = demote_to_memory(&f).unwrap();
        assert_eq!(count_op(&out, |i| matches!(i, Instruction::Alloca { .. })), 1);
        assert_eq!(count_op(&out, |i| matches!(i, Instruction::Store { .. })), 1);
        assert_eq!(count_op(&out, |i| matches!(i, Instruction::Load { .. })), 1);
        let entry = &out.blocks[0];
        assert!(matches!(entry.body[0], Instruction::Alloca { .. }));
        assert!(entry.body.iter().any(|i| matches!(i, Instruction::Store { .. })));
        assert!(out.blocks[1]
            .body
            .iter()
            .any(|i| matches!(i, Instruction::Load { .. })));
        assert_eq!(validate_function(&out), vec![]);
    }

    #[test]
    fn phi_becomes_stores_and_load() {
        let f = fn_of(
            "define i32 @f(i1 %c) {\nentry:\n  br i1 %c, label %a, label %b\na:\n  br label %join\nb:\n  br label %join\njoin:\n  %v = phi i32 [ 1, %a ], [ 2, %b ]\n  ret i32 %v\n}\n",
        );
        let out = demote_to_memory(&f).unwrap();
        assert!(out.blocks.iter().all(|b| b.phis.is_empty()));
        // One store per arm, one load at the join.
        assert!(out.blocks[1]
            .body
            .iter()
            .any(|i| matches!(i, Instruction::Store { .. })));
        assert!(out.blocks[2]
            .body
            .iter()
            .any(|i| matches!(i, Instruction::Store { .. })));
        assert!(matches!(out.blocks[3].body[0], Instruction::Load { .. }));
        assert_eq!(validate_function(&out), vec![]);
    }

    #[test]
    fn loop_phi_demotes_cleanly() {
        let f = fn_of(
            "define i32 @sum(i32 %n) {\nentry:\n  br label %head\nhead:\n  %i = phi i32 [ %n, %entry ], [ %dec, %body ]\n  %acc = phi i32 [ 0, %entry ], [ %next, %body ]\n  %c = icmp sgt i32 %i, 0\n  br i1 %c, label %body, label %exit\nbody:\n  %dec = sub i32 %i, 1\n  %next = add i32 %acc, %i\n  br label %head\nexit:\n  ret i32 %acc\n}\n",
        );
        let out = demote_to_memory(&f).unwrap();
        assert!(out.blocks.iter().all(|b| b.phis.is_empty()));
        assert_eq!(validate_function(&out), vec![]);
    }
}
