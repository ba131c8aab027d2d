//! Canonical printer: the inverse of the parser, with deterministic layout.

use crate::ir::validate::{validate, ValidationError};
use crate::ir::*;
use std::fmt::Write;

/// Prints a module in canonical textual form (LF line endings, two-space
/// block indent, one instruction per line). Re-parsing the output yields a
/// structurally equal module.
pub fn print_module(m: &IrModule) -> Result<String, ValidationError> {
    let violations = validate(m);
    if !violations.is_empty() {
        return Err(ValidationError { violations });
    }
    Ok(print_module_unchecked(m))
}

/// Printing without the validity gate, for diagnostics on rejected modules.
pub(crate) fn print_module_unchecked(m: &IrModule) -> String {
    let mut out = String::new();
    let mut first = true;
    for g in &m.globals {
        if !first {
            out.push('\n');
        }
        first = false;
        write_global(&mut out, g);
    }
    for f in &m.functions {
        if !first {
            out.push('\n');
        }
        first = false;
        write_function(&mut out, f);
    }
    out
}

fn write_global(out: &mut String, g: &GlobalVar) {
    let _ = write!(out, "@{} = global {} ", quote_name(&g.name), g.ty);
    match &g.init {
        GlobalInit::Int(c) => {
            let _ = writeln!(out, "{c}");
        }
        GlobalInit::Bytes(bytes) => {
            let _ = writeln!(out, "c\"{}\"", escape_bytes(bytes));
        }
        GlobalInit::Zero => {
            let _ = writeln!(out, "zeroinitializer");
        }
    }
}

fn write_function(out: &mut String, f: &IrFunction) {
    if f.is_declaration {
        let _ = write!(out, "declare {} @{}(", f.ret, quote_name(&f.name));
        for (i, p) in f.params.iter().enumerate() {
            if i > 0 {
                let _ = write!(out, ", ");
            }
            let _ = write!(out, "{}", p.ty);
        }
        if f.variadic {
            if f.params.is_empty() {
                let _ = write!(out, "...");
            } else {
                let _ = write!(out, ", ...");
            }
        }
        let _ = writeln!(out, ")");
        return;
    }

    let _ = write!(out, "define {} @{}(", f.ret, quote_name(&f.name));
    for (i, p) in f.params.iter().enumerate() {
        if i > 0 {
            let _ = write!(out, ", ");
        }
        let _ = write!(out, "{} %{}", p.ty, quote_name(&p.name));
    }
    let _ = writeln!(out, ") {{");
    for b in &f.blocks {
        let _ = writeln!(out, "{}:", label_text(&b.label));
        for phi in &b.phis {
            let _ = write!(out, "  %{} = phi {} ", quote_name(&phi.result), phi.ty);
            for (i, (v, l)) in phi.incomings.iter().enumerate() {
                if i > 0 {
                    let _ = write!(out, ", ");
                }
                let _ = write!(out, "[ {}, %{} ]", value_text(v), quote_name(l));
            }
            out.push('\n');
        }
        for inst in &b.body {
            let _ = writeln!(out, "  {}", instruction_text(inst));
        }
        let _ = writeln!(out, "  {}", terminator_text(&b.term));
    }
    let _ = writeln!(out, "}}");
}

fn needs_quotes(name: &str) -> bool {
    name.is_empty()
        || !name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '$' | '-'))
}

fn quote_name(name: &str) -> String {
    if needs_quotes(name) {
        format!("\"{}\"", escape_bytes(name.as_bytes()))
    } else {
        name.to_string()
    }
}

fn label_text(label: &str) -> String {
    if needs_quotes(label) {
        format!("\"{}\"", escape_bytes(label.as_bytes()))
    } else {
        label.to_string()
    }
}

fn value_text(v: &Value) -> String {
    match v {
        Value::Local(n) => format!("%{}", quote_name(n)),
        Value::Global(n) => format!("@{}", quote_name(n)),
        Value::Const(c) => c.to_string(),
        Value::Bytes(b) => format!("c\"{}\"", escape_bytes(b)),
        Value::Undef(_) => "undef".to_string(),
    }
}

fn escape_bytes(bytes: &[u8]) -> String {
    let mut s = String::new();
    for &b in bytes {
        match b {
            b'"' | b'\\' => {
                let _ = write!(s, "\\{b:02X}");
            }
            0x20..=0x7e => s.push(b as char),
            _ => {
                let _ = write!(s, "\\{b:02X}");
            }
        }
    }
    s
}

fn instruction_text(inst: &Instruction) -> String {
    match inst {
        Instruction::Binary {
            result,
            op,
            ty,
            lhs,
            rhs,
        } => format!(
            "%{} = {} {} {}, {}",
            quote_name(result),
            op.mnemonic(),
            ty,
            value_text(lhs),
            value_text(rhs)
        ),
        Instruction::Icmp {
            result,
            pred,
            ty,
            lhs,
            rhs,
        } => format!(
            "%{} = icmp {} {} {}, {}",
            quote_name(result),
            pred.mnemonic(),
            ty,
            value_text(lhs),
            value_text(rhs)
        ),
        Instruction::Cast {
            result,
            op,
            from,
            value,
            to,
        } => format!(
            "%{} = {} {} {} to {}",
            quote_name(result),
            op.mnemonic(),
            from,
            value_text(value),
            to
        ),
        Instruction::Alloca { result, allocated } => {
            format!("%{} = alloca {}", quote_name(result), allocated)
        }
        Instruction::Load { result, ty, ptr } => format!(
            "%{} = load {}, ptr {}",
            quote_name(result),
            ty,
            value_text(ptr)
        ),
        Instruction::Store { ty, value, ptr } => format!(
            "store {} {}, ptr {}",
            ty,
            value_text(value),
            value_text(ptr)
        ),
        Instruction::Gep {
            result,
            base,
            ptr,
            indices,
        } => {
            let mut s = format!(
                "%{} = getelementptr {}, ptr {}",
                quote_name(result),
                base,
                value_text(ptr)
            );
            for (ity, iv) in indices {
                let _ = write!(s, ", {} {}", ity, value_text(iv));
            }
            s
        }
        Instruction::Call {
            result,
            ret,
            sig,
            callee,
            args,
        } => {
            let mut s = String::new();
            if let Some(r) = result {
                let _ = write!(s, "%{} = ", quote_name(r));
            }
            let _ = write!(s, "call ");
            match sig {
                Some(sig) if sig.variadic => {
                    let _ = write!(s, "{}", IrType::Func(Box::new(sig.clone())));
                }
                _ => {
                    let _ = write!(s, "{ret}");
                }
            }
            let _ = write!(s, " @{}(", quote_name(callee));
            for (i, (ty, v)) in args.iter().enumerate() {
                if i > 0 {
                    let _ = write!(s, ", ");
                }
                let _ = write!(s, "{} {}", ty, value_text(v));
            }
            s.push(')');
            s
        }
        Instruction::Select {
            result,
            ty,
            cond,
            then_value,
            else_value,
        } => format!(
            "%{} = select i1 {}, {} {}, {} {}",
            quote_name(result),
            value_text(cond),
            ty,
            value_text(then_value),
            ty,
            value_text(else_value)
        ),
    }
}

fn terminator_text(t: &Terminator) -> String {
    match t {
        Terminator::Ret(None) => "ret void".to_string(),
        Terminator::Ret(Some((ty, v))) => format!("ret {} {}", ty, value_text(v)),
        Terminator::Br(l) => format!("br label %{}", quote_name(l)),
        Terminator::CondBr {
            cond,
            then_label,
            else_label,
        } => format!(
            "br i1 {}, label %{}, label %{}",
            value_text(cond),
            quote_name(then_label),
            quote_name(else_label)
        ),
        Terminator::Switch {
            ty,
            value,
            default,
            cases,
        } => {
            let mut s = format!(
                "switch {} {}, label %{} [",
                ty,
                value_text(value),
                quote_name(default)
            );
            for (c, l) in cases {
                let _ = write!(s, "\n    {} {}, label %{}", ty, c, quote_name(l));
            }
            if cases.is_empty() {
                s.push(']');
            } else {
                s.push_str("\n  ]");
            }
            s
        }
        Terminator::Unreachable => "unreachable".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_module;

    #[test]
    fn empty_module_prints_empty() {
        assert_eq!(print_module(&IrModule::default()).unwrap(), "");
    }

    #[test]
    fn add_prints_with_single_spaces() {
        let m = parse_module(
            "define i32 @calculate(i32 %a, i32 %b) {\nentry:\n  %sum = add i32 %a, %b\n  ret i32 %sum\n}\n",
        )
        .unwrap();
        let text = print_module(&m).unwrap();
        assert!(text.contains("  %sum = add i32 %a, %b\n"));
    }

    #[test]
    fn round_trip_is_structurally_equal() {
        let src = r#"@g = global i32 42
@fmt = global [12 x i8] c"Result: %d\0A\00"

define i32 @main() {
entry:
  %v = load i32, ptr @g
  %c = icmp sgt i32 %v, 0
  br i1 %c, label %pos, label %neg
pos:
  ret i32 1
neg:
  ret i32 -1
}
"#;
        let m1 = parse_module(src).unwrap();
        let printed = print_module(&m1).unwrap();
        let m2 = parse_module(&printed).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(printed, print_module(&m2).unwrap());
    }

    #[test]
    fn variadic_call_prints_full_signature() {
        let src = "define i32 @main() {\nentry:\n  %s = alloca [12 x i8]\n  store [12 x i8] c\"Result: %d\\0A\\00\", ptr %s\n  call i32 (ptr, ...) @printf(ptr %s, i32 7)\n  ret i32 0\n}\n\ndeclare i32 @printf(ptr, ...)\n";
        let m = parse_module(src).unwrap();
        let text = print_module(&m).unwrap();
        assert!(text.contains("call i32 (ptr, ...) @printf(ptr %s, i32 7)"));
        assert!(text.contains("declare i32 @printf(ptr, ...)\n"));
    }
}
