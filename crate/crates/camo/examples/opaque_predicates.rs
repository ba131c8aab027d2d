//! Build the two opaque-predicate families and check their truth values by
//! direct interpretation over random global states.
//!
//! ```sh
//! cargo run -p camo --example opaque_predicates
//! ```

use camo::interp::{run_function, ExternPolicy, Outcome, RuntimeValue};
use camo::ir::*;
use camo::obf::{OpaquePool, OpaquePredicate};
use camo::rng::SplitMix64;
use camo::text::print_module;

/// Wraps a predicate's instruction sequence into `define i1 @probe()`.
fn probe_module(pred: &OpaquePredicate, globals: Vec<GlobalVar>) -> IrModule {
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
    IrModule {
        globals,
        functions: vec![f],
    }
}

fn evaluates_to(pred: &OpaquePredicate, globals: Vec<GlobalVar>) -> bool {
    let m = probe_module(pred, globals);
    let r = run_function(&m, "probe", &[], 10_000, &ExternPolicy::default()).unwrap();
    match r.outcome {
        Outcome::Returned(Some(RuntimeValue::Int(c))) => c.bits() == 1,
        other => panic!("probe failed: {other:?}"),
    }
}

fn main() {
    let empty = IrModule::default();
    let mut pool = OpaquePool::new(&empty, 42);
    let shell = IrFunction {
        name: "probe".into(),
        ret: IrType::Int(1),
        params: vec![],
        variadic: false,
        blocks: vec![],
        is_declaration: false,
    };
    let mut fresh = FreshNames::for_function(&shell);

    let t1 = pool.build_true(&mut fresh);
    let f1 = pool.build_false(&mut fresh);

    println!("--- T1: g * (g + 1) % 2 == 0 (always true) ---");
    println!("{}", print_module(&probe_module(&t1, pool.used_globals())).unwrap());
    println!("--- F1: x == y && x != y (always false) ---");
    println!("{}", print_module(&probe_module(&f1, pool.used_globals())).unwrap());

    // Sweep random global states; the declared truth value never moves.
    let mut rng = SplitMix64::new(7);
    for round in 0..256 {
        let state: Vec<i64> = (0..3).map(|_| rng.next_u64() as i32 as i64).collect();
        let globals: Vec<GlobalVar> = pool
            .used_globals()
            .into_iter()
            .enumerate()
            .map(|(i, g)| GlobalVar {
                init: GlobalInit::Int(ConstInt::new(32, state[i])),
                ..g
            })
            .collect();
        assert!(evaluates_to(&t1, globals.clone()), "round {round}");
        assert!(!evaluates_to(&f1, globals), "round {round}");
    }
    println!("256 random global states: T1 always true, F1 always false");
}
