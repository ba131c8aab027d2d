//! Build a deliberately broken module in memory and list every violation
//! the validator finds.
//!
//! ```sh
//! cargo run -p camo --example validate_errors
//! ```

use camo::ir::{validate, BinOp, Instruction, IrType, Value};
use camo::text::parse_module;

fn main() {
    let mut module = parse_module(
        "define i32 @f(i32 %a) {\nentry:\n  %x = add i32 %a, 1\n  %y = add i32 %x, 2\n  ret i32 %y\n}\n",
    )
    .unwrap();

    // Break SSA: define %x twice.
    let dup = module.functions[0].blocks[0].body[0].clone();
    module.functions[0].blocks[0].body.push(dup);
    // Break dominance: use a name that has no definition at all.
    module.functions[0].blocks[0].body.push(Instruction::Binary {
        result: "z".into(),
        op: BinOp::Add,
        ty: IrType::Int(32),
        lhs: Value::local("ghost"),
        rhs: Value::const_int(32, 1),
    });

    let violations = validate(&module);
    println!("{} violation(s):", violations.len());
    for v in &violations {
        println!("  - {v}");
    }
    assert!(!violations.is_empty());
}
