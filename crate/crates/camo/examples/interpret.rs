//! Run fixture programs under the deterministic interpreter and inspect
//! return values, extern-call events, step counts and block coverage.
//!
//! ```sh
//! cargo run -p camo --example interpret
//! ```

use std::path::Path;

use camo::interp::{run_function, ArgValue, ExternPolicy, DEFAULT_FUEL};
use camo::ir::ConstInt;
use camo::text::parse_module;

fn fixture(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/ll").join(name);
    std::fs::read_to_string(path).expect("fixture exists")
}

fn main() {
    let module = parse_module(&fixture("01_table2.ll")).unwrap();
    let policy = ExternPolicy::default();

    // calculate(5, 3)
    let args = [
        ArgValue::Int(ConstInt::new(32, 5)),
        ArgValue::Int(ConstInt::new(32, 3)),
    ];
    let r = run_function(&module, "calculate", &args, DEFAULT_FUEL, &policy).unwrap();
    println!("calculate(5, 3) -> {:?} in {} steps", r.outcome, r.steps);

    // main() calls printf; the event trace records the rendered arguments.
    let r = run_function(&module, "main", &[], DEFAULT_FUEL, &policy).unwrap();
    println!("main() -> {:?}", r.outcome);
    for e in &r.events {
        let args: Vec<String> = e.args.iter().map(|a| a.to_string()).collect();
        println!("  extern call: @{}({})", e.callee, args.join(", "));
    }

    // A loop: block coverage shows each block's visit count.
    let module = parse_module(&fixture("05_loop_sum.ll")).unwrap();
    let args = [ArgValue::Int(ConstInt::new(32, 10))];
    let r = run_function(&module, "sumto", &args, DEFAULT_FUEL, &policy).unwrap();
    println!("sumto(10) -> {:?} in {} steps", r.outcome, r.steps);
    for (label, hits) in &r.block_hits {
        println!("  block {label}: {hits} visits");
    }

    // Division by zero traps instead of propagating nonsense.
    let module = parse_module(&fixture("14_division_trapping.ll")).unwrap();
    let args = [
        ArgValue::Int(ConstInt::new(32, 9)),
        ArgValue::Int(ConstInt::new(32, 0)),
    ];
    let r = run_function(&module, "raw_mod", &args, DEFAULT_FUEL, &policy).unwrap();
    println!("raw_mod(9, 0) -> {:?}", r.outcome);
}
