//! Opaque predicates: branch conditions with a constant, compile-time-known
//! truth value that is not obvious to a static reader.
//!
//! Two families are built here:
//!
//! - T1 (always true): `g * (g + 1) % 2 == 0` over a module-level global.
//!   The product of consecutive integers is even, and wrapping preserves the
//!   low bit.
//! - F1 (always false): `x == y && x != y` over two values loaded from
//!   globals: contradictory comparisons of the same operands.

use crate::ir::*;
use crate::rng::SplitMix64;

const POOL_SEED_SALT: u64 = 0x6f70_6171_7565; // "opaque"

/// Declared truth value of a predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    AlwaysTrue,
    AlwaysFalse,
}

/// A straight-line instruction sequence producing an `i1` with a known value.
#[derive(Debug, Clone)]
pub struct OpaquePredicate {
    pub instructions: Vec<Instruction>,
    /// Local name of the resulting `i1`.
    pub result: String,
    pub truth: Truth,
    pub globals_used: Vec<String>,
}

/// The module-level globals that opaque predicates read.
///
/// Created once per pipeline run with seeded initializers; only the globals a
/// predicate actually referenced are appended to the module, so a run that
/// inserts nothing leaves the module byte-identical.
#[derive(Debug, Clone)]
pub struct OpaquePool {
    globals: Vec<GlobalVar>,
    used: Vec<bool>,
}

const SLOT_TRUE_G: usize = 0;
const SLOT_FALSE_X: usize = 1;
const SLOT_FALSE_Y: usize = 2;

impl OpaquePool {
    pub fn new(module: &IrModule, seed: u64) -> OpaquePool {
        let mut rng = SplitMix64::new(seed ^ POOL_SEED_SALT);
        let taken: std::collections::HashSet<&str> = module
            .globals
            .iter()
            .map(|g| g.name.as_str())
            .chain(module.functions.iter().map(|f| f.name.as_str()))
            .collect();
        let name = |base: &str| -> String {
            if !taken.contains(base) {
                return base.to_string();
            }
            let mut n = 1;
            loop {
                let candidate = format!("{base}.{n}");
                if !taken.contains(candidate.as_str()) {
                    return candidate;
                }
                n += 1;
            }
        };
        let globals = vec![
            GlobalVar {
                name: name("opq.g"),
                ty: IrType::Int(32),
                init: GlobalInit::Int(ConstInt::from_bits(32, rng.next_u64())),
            },
            GlobalVar {
                name: name("opq.x"),
                ty: IrType::Int(32),
                init: GlobalInit::Int(ConstInt::from_bits(32, rng.next_u64())),
            },
            GlobalVar {
                name: name("opq.y"),
                ty: IrType::Int(32),
                init: GlobalInit::Int(ConstInt::from_bits(32, rng.next_u64())),
            },
        ];
        OpaquePool {
            globals,
            used: vec![false; 3],
        }
    }

    /// Globals referenced by at least one built predicate, in pool order.
    pub fn used_globals(&self) -> Vec<GlobalVar> {
        self.globals
            .iter()
            .zip(&self.used)
            .filter(|(_, used)| **used)
            .map(|(g, _)| g.clone())
            .collect()
    }

    /// Builds a predicate of a random family. Fresh local names come from the
    /// host function's namespace.
    pub fn build_predicate(
        &mut self,
        rng: &mut SplitMix64,
        fresh: &mut FreshNames,
    ) -> OpaquePredicate {
        if rng.next_below(2) == 0 {
            self.build_true(fresh)
        } else {
            self.build_false(fresh)
        }
    }

    /// T1: `g * (g + 1) % 2 == 0`.
    pub fn build_true(&mut self, fresh: &mut FreshNames) -> OpaquePredicate {
        self.used[SLOT_TRUE_G] = true;
        let g = self.globals[SLOT_TRUE_G].name.clone();
        let i32t = IrType::Int(32);
        let v = fresh.fresh("opq.v");
        let succ = fresh.fresh("opq.succ");
        let prod = fresh.fresh("opq.prod");
        let rem = fresh.fresh("opq.rem");
        let result = fresh.fresh("opq.cond");
        let instructions = vec![
            Instruction::Load {
                result: v.clone(),
                ty: i32t.clone(),
                ptr: Value::Global(g.clone()),
            },
            Instruction::Binary {
                result: succ.clone(),
                op: BinOp::Add,
                ty: i32t.clone(),
                lhs: Value::local(&v),
                rhs: Value::const_int(32, 1),
            },
            Instruction::Binary {
                result: prod.clone(),
                op: BinOp::Mul,
                ty: i32t.clone(),
                lhs: Value::local(&v),
                rhs: Value::local(&succ),
            },
            Instruction::Binary {
                result: rem.clone(),
                op: BinOp::SRem,
                ty: i32t.clone(),
                lhs: Value::local(&prod),
                rhs: Value::const_int(32, 2),
            },
            Instruction::Icmp {
                result: result.clone(),
                pred: IcmpPred::Eq,
                ty: i32t,
                lhs: Value::local(&rem),
                rhs: Value::const_int(32, 0),
            },
        ];
        OpaquePredicate {
            instructions,
            result,
            truth: Truth::AlwaysTrue,
            globals_used: vec![g],
        }
    }

    /// F1: `x == y && x != y`.
    pub fn build_false(&mut self, fresh: &mut FreshNames) -> OpaquePredicate {
        self.used[SLOT_FALSE_X] = true;
        self.used[SLOT_FALSE_Y] = true;
        let gx = self.globals[SLOT_FALSE_X].name.clone();
        let gy = self.globals[SLOT_FALSE_Y].name.clone();
        let i32t = IrType::Int(32);
        let x = fresh.fresh("opq.x");
        let y = fresh.fresh("opq.y");
        let eq = fresh.fresh("opq.eq");
        let ne = fresh.fresh("opq.ne");
        let result = fresh.fresh("opq.cond");
        let instructions = vec![
            Instruction::Load {
                result: x.clone(),
                ty: i32t.clone(),
                ptr: Value::Global(gx.clone()),
            },
            Instruction::Load {
                result: y.clone(),
                ty: i32t.clone(),
                ptr: Value::Global(gy.clone()),
            },
            Instruction::Icmp {
                result: eq.clone(),
                pred: IcmpPred::Eq,
                ty: i32t.clone(),
                lhs: Value::local(&x),
                rhs: Value::local(&y),
            },
            Instruction::Icmp {
                result: ne.clone(),
                pred: IcmpPred::Ne,
                ty: i32t,
                lhs: Value::local(&x),
                rhs: Value::local(&y),
            },
            Instruction::Binary {
                result: result.clone(),
                op: BinOp::And,
                ty: IrType::Int(1),
                lhs: Value::local(&eq),
                rhs: Value::local(&ne),
            },
        ];
        OpaquePredicate {
            instructions,
            result,
            truth: Truth::AlwaysFalse,
            globals_used: vec![gx, gy],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{run_function, ExternPolicy, Outcome, RuntimeValue};
    use crate::rng::SplitMix64;

    /// Wraps a predicate in `define i1 @probe()` over the given global state
    /// and runs it.
    fn probe(pred: &OpaquePredicate, pool: &OpaquePool, global_values: &[i64]) -> bool {
        let mut globals = Vec::new();
        for (i, g) in pool.globals.iter().enumerate() {
            globals.push(GlobalVar {
                name: g.name.clone(),
                ty: g.ty.clone(),
                init: GlobalInit::Int(ConstInt::new(32, global_values[i])),
            });
        }
        let f = IrFunction {
            name: "probe".into(),
            ret: IrType::Int(1),
            params: vec![],
            variadic: false,
            blocks: vec![BasicBlock {
                label: "entry".into(),
                phis: vec![],
                body: pred.instructions.clone(),
                term: Terminator::Ret(Some((IrType::Int(1), Value::local(&pred.result)))),
            }],
            is_declaration: false,
        };
        let m = IrModule {
            globals,
            functions: vec![f],
        };
        assert_eq!(crate::ir::validate(&m), vec![]);
        let r = run_function(&m, "probe", &[], 10_000, &ExternPolicy::default()).unwrap();
        match r.outcome {
            Outcome::Returned(Some(RuntimeValue::Int(c))) => c.bits() == 1,
            other => panic!("probe did not return an i1: {other:?}"),
        }
    }

    #[test]
    fn truth_values_hold_for_256_random_global_states() {
        let empty = IrModule::default();
        let mut pool = OpaquePool::new(&empty, 99);
        let mut fresh = FreshNames::for_function(&IrFunction {
            name: "probe".into(),
            ret: IrType::Int(1),
            params: vec![],
            variadic: false,
            blocks: vec![],
            is_declaration: false,
        });
        let t = pool.build_true(&mut fresh);
        let f = pool.build_false(&mut fresh);

        let mut rng = SplitMix64::new(0xdead);
        for _ in 0..256 {
            let state: Vec<i64> = (0..3).map(|_| rng.next_u64() as i32 as i64).collect();
            assert!(probe(&t, &pool, &state), "T1 must hold for {state:?}");
            assert!(!probe(&f, &pool, &state), "F1 must fail for {state:?}");
        }
    }

    #[test]
    fn pool_appends_only_used_globals() {
        let empty = IrModule::default();
        let mut pool = OpaquePool::new(&empty, 1);
        assert!(pool.used_globals().is_empty());
        let mut fresh = FreshNames::for_function(&IrFunction {
            name: "x".into(),
            ret: IrType::Void,
            params: vec![],
            variadic: false,
            blocks: vec![],
            is_declaration: false,
        });
        pool.build_true(&mut fresh);
        let used = pool.used_globals();
        assert_eq!(used.len(), 1);
        assert_eq!(used[0].name, "opq.g");
    }

    #[test]
    fn pool_names_avoid_collisions() {
        let m = crate::text::parse_module("@opq.g = global i32 5\n").unwrap();
        let pool = OpaquePool::new(&m, 3);
        assert_eq!(pool.globals[0].name, "opq.g.1");
    }
}
