//! Instruction substitution: rewrites simple integer operations into
//! semantically equivalent but longer sequences, O-LLVM style.
//!
//! The rule table is fixed; every rule is a two's-complement identity, so it
//! holds at any bit width (each one is brute-force checked at 8 bits in the
//! acceptance suite). `~x` is encoded as `xor x, -1`.

use super::{ObfConfig, PassCounters, PassOutcome};
use crate::ir::*;
use crate::rng::SplitMix64;

/// A rewrite rule for one binary opcode.
#[derive(Debug, Clone, Copy)]
pub struct Rule {
    pub op: BinOp,
    pub name: &'static str,
}

/// The fixed rule table: `add -> a - (-b)`, `add -> -((-a) + (-b))`,
/// `sub -> a + (-b)`, `xor -> (a & ~b) | (~a & b)`, `and -> ~(~a | ~b)`,
/// `or -> ~(~a & ~b)`.
pub const RULES: &[Rule] = &[
    Rule { op: BinOp::Add, name: "add-to-sub-neg" },
    Rule { op: BinOp::Add, name: "add-to-neg-sum-of-negs" },
    Rule { op: BinOp::Sub, name: "sub-to-add-neg" },
    Rule { op: BinOp::Xor, name: "xor-to-and-or" },
    Rule { op: BinOp::And, name: "and-to-demorgan" },
    Rule { op: BinOp::Or, name: "or-to-demorgan" },
];

fn rules_for(op: BinOp) -> Vec<usize> {
    RULES
        .iter()
        .enumerate()
        .filter(|(_, r)| r.op == op)
        .map(|(i, _)| i)
        .collect()
}

/// Rewrites every eligible `add`/`sub`/`xor`/`and`/`or` by a randomly chosen
/// rule, `cfg.subst_rounds` times over. The result name is preserved, so no
/// other instruction changes.
pub fn substitute_instructions(
    f: &IrFunction,
    cfg: &ObfConfig,
    rng: &mut SplitMix64,
) -> Result<PassOutcome, ValidationError> {
    let violations = validate_function(f);
    if !violations.is_empty() {
        return Err(ValidationError { violations });
    }
    let mut f = f.clone();
    let mut fresh = FreshNames::for_function(&f);
    let mut stats = PassCounters {
        blocks_processed: f.blocks.len() as u64,
        ..Default::default()
    };

    for _ in 0..cfg.subst_rounds {
        for block in &mut f.blocks {
            let mut rewritten: Vec<Instruction> = Vec::with_capacity(block.body.len());
            for inst in block.body.drain(..) {
                match inst {
                    Instruction::Binary {
                        result,
                        op,
                        ty,
                        lhs,
                        rhs,
                    } if ty.is_int() && !rules_for(op).is_empty() => {
                        let candidates = rules_for(op);
                        let pick = if candidates.len() == 1 {
                            candidates[0]
                        } else {
                            candidates[rng.next_below(candidates.len() as u64) as usize]
                        };
                        expand_rule(pick, &result, &ty, &lhs, &rhs, &mut fresh, &mut rewritten);
                        stats.instructions_substituted += 1;
                    }
                    other => rewritten.push(other),
                }
            }
            block.body = rewritten;
        }
    }

    debug_assert_eq!(validate_function(&f), vec![]);
    Ok(PassOutcome {
        function: f,
        stats,
        junk_labels: vec![],
    })
}

/// Emits the expansion of rule `index` for `result = op ty lhs, rhs`.
fn expand_rule(
    index: usize,
    result: &str,
    ty: &IrType,
    lhs: &Value,
    rhs: &Value,
    fresh: &mut FreshNames,
    out: &mut Vec<Instruction>,
) {
    let IrType::Int(w) = ty else { unreachable!("eligible ops are integer") };
    let zero = Value::const_int(*w, 0);
    let ones = Value::const_int(*w, -1);
    let bin = |result: String, op: BinOp, lhs: Value, rhs: Value| Instruction::Binary {
        result,
        op,
        ty: ty.clone(),
        lhs,
        rhs,
    };
    match RULES[index].name {
        // a + b == a - (-b)
        "add-to-sub-neg" => {
            let neg_b = fresh.fresh(result);
            out.push(bin(neg_b.clone(), BinOp::Sub, zero.clone(), rhs.clone()));
            out.push(bin(result.into(), BinOp::Sub, lhs.clone(), Value::local(neg_b)));
        }
        // a + b == -((-a) + (-b))
        "add-to-neg-sum-of-negs" => {
            let neg_a = fresh.fresh(result);
            let neg_b = fresh.fresh(result);
            let sum = fresh.fresh(result);
            out.push(bin(neg_a.clone(), BinOp::Sub, zero.clone(), lhs.clone()));
            out.push(bin(neg_b.clone(), BinOp::Sub, zero.clone(), rhs.clone()));
            out.push(bin(sum.clone(), BinOp::Add, Value::local(neg_a), Value::local(neg_b)));
            out.push(bin(result.into(), BinOp::Sub, zero, Value::local(sum)));
        }
        // a - b == a + (-b)
        "sub-to-add-neg" => {
            let neg_b = fresh.fresh(result);
            out.push(bin(neg_b.clone(), BinOp::Sub, zero, rhs.clone()));
            out.push(bin(result.into(), BinOp::Add, lhs.clone(), Value::local(neg_b)));
        }
        // a ^ b == (a & ~b) | (~a & b)
        "xor-to-and-or" => {
            let not_b = fresh.fresh(result);
            let left = fresh.fresh(result);
            let not_a = fresh.fresh(result);
            let right = fresh.fresh(result);
            out.push(bin(not_b.clone(), BinOp::Xor, rhs.clone(), ones.clone()));
            out.push(bin(left.clone(), BinOp::And, lhs.clone(), Value::local(not_b)));
            out.push(bin(not_a.clone(), BinOp::Xor, lhs.clone(), ones));
            out.push(bin(right.clone(), BinOp::And, Value::local(not_a), rhs.clone()));
            out.push(bin(result.into(), BinOp::Or, Value::local(left), Value::local(right)));
        }
        // a & b == ~(~a | ~b)
        "and-to-demorgan" => {
            let not_a = fresh.fresh(result);
            let not_b = fresh.fresh(result);
            let merged = fresh.fresh(result);
            out.push(bin(not_a.clone(), BinOp::Xor, lhs.clone(), ones.clone()));
            out.push(bin(not_b.clone(), BinOp::Xor, rhs.clone(), ones.clone()));
            out.push(bin(merged.clone(), BinOp::Or, Value::local(not_a), Value::local(not_b)));
            out.push(bin(result.into(), BinOp::Xor, Value::local(merged), ones));
        }
        // a | b == ~(~a & ~b)
        "or-to-demorgan" => {
            let not_a = fresh.fresh(result);
            let not_b = fresh.fresh(result);
            let merged = fresh.fresh(result);
            out.push(bin(not_a.clone(), BinOp::Xor, lhs.clone(), ones.clone()));
            out.push(bin(not_b.clone(), BinOp::Xor, rhs.clone(), ones.clone()));
            out.push(bin(merged.clone(), BinOp::And, Value::local(not_a), Value::local(not_b)));
            out.push(bin(result.into(), BinOp::Xor, Value::local(merged), ones));
        }
        other => unreachable!("unknown rule '{other}'"),
    }
}

/// Applies one specific rule to a lone `result = op a, b` function, for
/// exhaustive rule verification.
pub fn expand_single(rule_index: usize, width: u32) -> IrFunction {
    let rule = RULES[rule_index];
    let ty = IrType::Int(width);
    let mut body = Vec::new();
    let f_shell = IrFunction {
        name: format!("rule_{}", rule.name),
        ret: ty.clone(),
        params: vec![
            Param { name: "a".into(), ty: ty.clone() },
            Param { name: "b".into(), ty: ty.clone() },
        ],
        variadic: false,
        blocks: vec![],
        is_declaration: false,
    };
    let mut fresh = FreshNames::for_function(&f_shell);
    expand_rule(
        rule_index,
        "r",
        &ty,
        &Value::local("a"),
        &Value::local("b"),
        &mut fresh,
        &mut body,
    );
    let mut f = f_shell;
    f.blocks = vec![BasicBlock {
        label: "entry".into(),
        phis: vec![],
        body,
        term: Terminator::Ret(Some((ty, Value::local("r")))),
    }];
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_module;

    fn fn_of(src: &str) -> IrFunction {
        parse_module(src).unwrap().functions[0].clone()
    }

    #[test]
    fn add_rewrites_to_two_subs() {
        let f = fn_of(
            "define i32 @calculate(i32 %a, i32 %b) {\nentry:\n  %sum = add i32 %a, %b\n  ret i32 %sum\n}\n",
        );
        let mut rng = SplitMix64::new(0); // first draw picks rule 0 or 1
        let cfg = ObfConfig::default();
        let out = substitute_instructions(&f, &cfg, &mut rng).unwrap();
        assert_eq!(out.stats.instructions_substituted, 1);
        let body = &out.function.blocks[0].body;
        assert!(body.len() >= 2);
        assert!(body
            .iter()
            .all(|i| matches!(i, Instruction::Binary { op, .. } if matches!(op, BinOp::Add | BinOp::Sub))));
        // The final definition still carries the original name.
        assert_eq!(body.last().unwrap().result(), Some("sum"));
    }

    #[test]
    fn no_eligible_opcode_is_identity() {
        let f = fn_of(
            "define i32 @f(i32 %a, i32 %b) {\nentry:\n  %q = sdiv i32 %a, %b\n  %m = mul i32 %q, %q\n  ret i32 %m\n}\n",
        );
        let mut rng = SplitMix64::new(1);
        let out = substitute_instructions(&f, &ObfConfig::default(), &mut rng).unwrap();
        assert_eq!(out.function, f);
        assert_eq!(out.stats.instructions_substituted, 0);
    }

    #[test]
    fn rounds_compound_the_rewrite() {
        let f = fn_of(
            "define i32 @f(i32 %a, i32 %b) {\nentry:\n  %x = xor i32 %a, %b\n  ret i32 %x\n}\n",
        );
        let one = {
            let mut rng = SplitMix64::new(3);
            substitute_instructions(&f, &ObfConfig { subst_rounds: 1, ..Default::default() }, &mut rng)
                .unwrap()
        };
        let two = {
            let mut rng = SplitMix64::new(3);
            substitute_instructions(&f, &ObfConfig { subst_rounds: 2, ..Default::default() }, &mut rng)
                .unwrap()
        };
        assert!(two.function.blocks[0].body.len() > one.function.blocks[0].body.len());
        assert!(two.stats.instructions_substituted > one.stats.instructions_substituted);
    }

    #[test]
    fn expanded_rules_validate() {
        for (i, rule) in RULES.iter().enumerate() {
            let f = expand_single(i, 8);
            assert_eq!(validate_function(&f), vec![], "rule {}", rule.name);
        }
    }
}
