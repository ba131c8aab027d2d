//! Parse textual IR, print it canonically, and show what a parse error
//! looks like.
//!
//! ```sh
//! cargo run -p camo --example parse_roundtrip
//! ```

use camo::text::{parse_module, print_module};

fn main() {
    let source = r#"; A scratch module with a comment and clang-ish noise.
define dso_local i32 @calculate(i32 noundef %a, i32 noundef %b) {
entry:
  %sum = add nsw i32 %a, %b, !dbg !7
  ret i32 %sum
}
"#;
    let module = parse_module(source).expect("within the subset");
    let canonical = print_module(&module).expect("valid module");
    println!("--- canonical form (comments and annotations dropped) ---");
    print!("{canonical}");

    // The canonical form is a fixed point: printing again changes nothing.
    let again = print_module(&parse_module(&canonical).unwrap()).unwrap();
    assert_eq!(canonical, again);
    println!("--- round-trip stable: {} bytes ---", canonical.len());

    // Errors carry a 1-based source position and name what was expected.
    let err = parse_module("define i32 @broken(").unwrap_err();
    println!("--- a parse error ---\n{err}");

    // Valid LLVM outside the subset is rejected with the construct's name.
    let err = parse_module("define float @f() {\nentry:\n  ret float 0\n}\n").unwrap_err();
    println!("--- an unsupported construct ---\n{err}");
}
