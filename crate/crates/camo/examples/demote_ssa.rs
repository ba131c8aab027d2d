//! SSA demotion (reg2mem): dissolve phis and cross-block values into stack
//! slots, the prerequisite control-flow flattening relies on.
//!
//! ```sh
//! cargo run -p camo --example demote_ssa
//! ```

use camo::ir::demote_to_memory;
use camo::text::{parse_module, print_module};

fn main() {
    let source = r#"define i32 @blend(i1 %flag, i32 %x) {
entry:
  %base = add i32 %x, 10
  br i1 %flag, label %yes, label %no
yes:
  %up = mul i32 %base, 3
  br label %join
no:
  %down = sub i32 %base, 4
  br label %join
join:
  %v = phi i32 [ %up, %yes ], [ %down, %no ]
  %r = add i32 %v, %base
  ret i32 %r
}
"#;
    let module = parse_module(source).unwrap();
    println!("--- before ---\n{}", print_module(&module).unwrap());

    let mut demoted = module.clone();
    demoted.functions[0] = demote_to_memory(&module.functions[0]).unwrap();
    println!("--- after reg2mem ---\n{}", print_module(&demoted).unwrap());

    // The phi is gone; its value now flows through a slot written on both
    // arms and read at the join.
    assert!(demoted.functions[0].blocks.iter().all(|b| b.phis.is_empty()));
}
