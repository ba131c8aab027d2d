//! Module validation: type rules, SSA single-assignment, dominance of uses,
//! phi/predecessor consistency, and call-site/signature agreement.
//!
//! Violations are returned as values rather than thrown, so callers can
//! report all of them at once.

use std::collections::HashMap;
use std::fmt;

use super::cfg::{build_cfg, compute_dominators};
use super::types::*;

/// One rule violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateName {
        name: String,
    },
    /// SSA: a local result name assigned more than once.
    DuplicateDefinition {
        function: String,
        name: String,
    },
    DuplicateLabel {
        function: String,
        label: String,
    },
    UndefinedLabel {
        function: String,
        block: String,
        label: String,
    },
    UndefinedValue {
        function: String,
        block: String,
        name: String,
    },
    UseNotDominated {
        function: String,
        block: String,
        name: String,
    },
    PhiPredecessorMismatch {
        function: String,
        block: String,
        phi: String,
        detail: String,
    },
    EntryHasPhis {
        function: String,
    },
    EntryHasPredecessors {
        function: String,
    },
    TypeMismatch {
        function: String,
        block: String,
        context: String,
        expected: String,
        found: String,
    },
    InvalidType {
        function: String,
        context: String,
        ty: String,
    },
    UndefinedCallee {
        function: String,
        callee: String,
    },
    CalleeSignatureMismatch {
        function: String,
        callee: String,
        detail: String,
    },
    VariadicDefinition {
        function: String,
    },
    EmptyDefinition {
        function: String,
    },
    GlobalInitMismatch {
        global: String,
        detail: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateName { name } => {
                write!(f, "duplicate module-level name '{name}'")
            }
            Violation::DuplicateDefinition { function, name } => {
                write!(f, "in @{function}: local '%{name}' is defined more than once")
            }
            Violation::DuplicateLabel { function, label } => {
                write!(f, "in @{function}: duplicate block label '{label}'")
            }
            Violation::UndefinedLabel {
                function,
                block,
                label,
            } => write!(
                f,
                "in @{function}, block '{block}': reference to undefined label '{label}'"
            ),
            Violation::UndefinedValue {
                function,
                block,
                name,
            } => write!(
                f,
                "in @{function}, block '{block}': use of undefined value '{name}'"
            ),
            Violation::UseNotDominated {
                function,
                block,
                name,
            } => write!(
                f,
                "in @{function}, block '{block}': use of '%{name}' is not dominated by its definition"
            ),
            Violation::PhiPredecessorMismatch {
                function,
                block,
                phi,
                detail,
            } => write!(
                f,
                "in @{function}, block '{block}': phi '%{phi}' does not match predecessors: {detail}"
            ),
            Violation::EntryHasPhis { function } => {
                write!(f, "in @{function}: entry block must not contain phis")
            }
            Violation::EntryHasPredecessors { function } => {
                write!(f, "in @{function}: entry block must not have predecessors")
            }
            Violation::TypeMismatch {
                function,
                block,
                context,
                expected,
                found,
            } => write!(
                f,
                "in @{function}, block '{block}': {context}: expected {expected}, found {found}"
            ),
            Violation::InvalidType {
                function,
                context,
                ty,
            } => write!(f, "in @{function}: invalid type '{ty}' in {context}"),
            Violation::UndefinedCallee { function, callee } => {
                write!(f, "in @{function}: call to unknown function '@{callee}'")
            }
            Violation::CalleeSignatureMismatch {
                function,
                callee,
                detail,
            } => write!(
                f,
                "in @{function}: call to '@{callee}' does not match its signature: {detail}"
            ),
            Violation::VariadicDefinition { function } => {
                write!(f, "@{function}: variadic functions may only be declared")
            }
            Violation::EmptyDefinition { function } => {
                write!(f, "@{function}: function definition has no blocks")
            }
            Violation::GlobalInitMismatch { global, detail } => {
                write!(f, "global '@{global}': {detail}")
            }
        }
    }
}

/// Error wrapper for operations that require a clean module or function.
#[derive(Debug, Clone, thiserror::Error)]
#[error("validation failed: {}", summary(.violations))]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

fn summary(violations: &[Violation]) -> String {
    let shown: Vec<String> = violations.iter().take(3).map(|v| v.to_string()).collect();
    let mut s = shown.join("; ");
    if violations.len() > 3 {
        s.push_str(&format!(" (+{} more)", violations.len() - 3));
    }
    s
}

/// Checks every module invariant; returns the empty list iff the module is
/// well-formed.
pub fn validate(m: &IrModule) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut names: HashMap<&str, u32> = HashMap::new();
    for g in &m.globals {
        *names.entry(g.name.as_str()).or_default() += 1;
    }
    for f in &m.functions {
        *names.entry(f.name.as_str()).or_default() += 1;
    }
    let mut dup: Vec<&str> = names
        .iter()
        .filter(|(_, c)| **c > 1)
        .map(|(n, _)| *n)
        .collect();
    dup.sort_unstable();
    for name in dup {
        out.push(Violation::DuplicateName { name: name.into() });
    }

    for g in &m.globals {
        validate_global(g, &mut out);
    }
    for f in &m.functions {
        validate_function_in(m, f, &mut out);
    }
    out
}

/// Function-local validation (everything except cross-function call checks).
/// Obfuscation passes use this to vet their input and output.
pub fn validate_function(f: &IrFunction) -> Vec<Violation> {
    let mut out = Vec::new();
    let m = IrModule::default();
    validate_function_in(&m, f, &mut out);
    // Without the module, call targets cannot be resolved; drop those.
    out.retain(|v| !matches!(v, Violation::UndefinedCallee { .. }));
    out
}

fn validate_global(g: &GlobalVar, out: &mut Vec<Violation>) {
    let ok = match (&g.ty, &g.init) {
        (IrType::Int(w), GlobalInit::Int(c)) => {
            if !ALLOWED_WIDTHS.contains(w) {
                out.push(Violation::InvalidType {
                    function: String::new(),
                    context: format!("global @{}", g.name),
                    ty: g.ty.to_string(),
                });
            }
            c.width() == *w
        }
        (IrType::Array(n, elem), GlobalInit::Bytes(bytes)) => {
            **elem == IrType::Int(8) && bytes.len() as u64 == *n
        }
        (IrType::Array(_, elem), GlobalInit::Zero) => elem.is_int(),
        (IrType::Int(_), GlobalInit::Zero) => true,
        _ => false,
    };
    if !ok {
        out.push(Violation::GlobalInitMismatch {
            global: g.name.clone(),
            detail: format!("initializer does not fit type '{}'", g.ty),
        });
    }
}

struct FnContext<'a> {
    module: &'a IrModule,
    f: &'a IrFunction,
    /// Local name -> type, for params and every instruction/phi result.
    env: HashMap<&'a str, IrType>,
    /// Local name -> (block index, position); params map to the entry start.
    def_site: HashMap<&'a str, (usize, usize)>,
}

const PARAM_SITE: (usize, usize) = (usize::MAX, 0);

fn validate_function_in(m: &IrModule, f: &IrFunction, out: &mut Vec<Violation>) {
    check_type_shape(f, &f.ret, "return type", true, out);
    for p in &f.params {
        check_type_shape(f, &p.ty, &format!("parameter '%{}'", p.name), false, out);
    }

    if f.is_declaration {
        if !f.blocks.is_empty() {
            out.push(Violation::EmptyDefinition {
                function: f.name.clone(),
            });
        }
        return;
    }
    if f.variadic {
        out.push(Violation::VariadicDefinition {
            function: f.name.clone(),
        });
    }
    if f.blocks.is_empty() {
        out.push(Violation::EmptyDefinition {
            function: f.name.clone(),
        });
        return;
    }

    // Labels unique.
    let mut labels: HashMap<&str, u32> = HashMap::new();
    for b in &f.blocks {
        *labels.entry(b.label.as_str()).or_default() += 1;
    }
    for b in &f.blocks {
        if labels[b.label.as_str()] > 1 {
            out.push(Violation::DuplicateLabel {
                function: f.name.clone(),
                label: b.label.clone(),
            });
            labels.insert(b.label.as_str(), 1); // report once
        }
    }

    // SSA result names unique; build the type environment.
    let mut env: HashMap<&str, IrType> = HashMap::new();
    let mut def_site: HashMap<&str, (usize, usize)> = HashMap::new();
    let report_dup = |name: &str, out: &mut Vec<Violation>| {
        out.push(Violation::DuplicateDefinition {
            function: f.name.clone(),
            name: name.to_string(),
        });
    };
    for p in &f.params {
        if env.insert(p.name.as_str(), p.ty.clone()).is_some() {
            report_dup(&p.name, out);
        }
        def_site.insert(p.name.as_str(), PARAM_SITE);
    }
    for (bi, b) in f.blocks.iter().enumerate() {
        for (pi, phi) in b.phis.iter().enumerate() {
            if env.insert(phi.result.as_str(), phi.ty.clone()).is_some() {
                report_dup(&phi.result, out);
            }
            def_site.insert(phi.result.as_str(), (bi, pi));
        }
        for (ii, inst) in b.body.iter().enumerate() {
            if let Some(r) = inst.result() {
                let ty = inst.result_type().unwrap_or(IrType::Void);
                if env.insert(r, ty).is_some() {
                    report_dup(r, out);
                }
                def_site.insert(r, (bi, b.phis.len() + ii));
            }
        }
    }

    let entry = &f.blocks[0];
    if !entry.phis.is_empty() {
        out.push(Violation::EntryHasPhis {
            function: f.name.clone(),
        });
    }

    let cfg = match build_cfg(f) {
        Ok(cfg) => cfg,
        Err(v) => {
            out.push(v);
            return;
        }
    };
    if !cfg.predecessors(&entry.label).is_empty() {
        out.push(Violation::EntryHasPredecessors {
            function: f.name.clone(),
        });
    }
    let dom = compute_dominators(f, &cfg);

    let ctx = FnContext {
        module: m,
        f,
        env,
        def_site,
    };

    for b in &f.blocks {
        // Phi/predecessor consistency.
        for phi in &b.phis {
            check_type_shape(f, &phi.ty, &format!("phi '%{}'", phi.result), false, out);
            if !matches!(phi.ty, IrType::Int(_) | IrType::Ptr) {
                out.push(Violation::InvalidType {
                    function: f.name.clone(),
                    context: format!("phi '%{}'", phi.result),
                    ty: phi.ty.to_string(),
                });
            }
            let mut preds: Vec<&str> = cfg.predecessors(&b.label).iter().map(|s| s.as_str()).collect();
            preds.sort_unstable();
            preds.dedup();
            let mut incoming: Vec<&str> = phi.incomings.iter().map(|(_, l)| l.as_str()).collect();
            incoming.sort_unstable();
            let has_dup = incoming.windows(2).any(|w| w[0] == w[1]);
            incoming.dedup();
            if has_dup || preds != incoming {
                out.push(Violation::PhiPredecessorMismatch {
                    function: f.name.clone(),
                    block: b.label.clone(),
                    phi: phi.result.clone(),
                    detail: format!(
                        "incoming labels [{}], predecessors [{}]",
                        phi.incomings
                            .iter()
                            .map(|(_, l)| l.as_str())
                            .collect::<Vec<_>>()
                            .join(", "),
                        cfg.predecessors(&b.label).join(", ")
                    ),
                });
            }
            for (v, pred_label) in &phi.incomings {
                expect_value_type(&ctx, b, &format!("phi '%{}'", phi.result), v, &phi.ty, out);
                // A phi use must be dominated at the end of the incoming edge.
                check_use_dominance(&ctx, &dom, v, pred_label, usize::MAX, out, &b.label);
            }
        }

        for (ii, inst) in b.body.iter().enumerate() {
            let pos = b.phis.len() + ii;
            check_instruction(&ctx, b, inst, out);
            inst.for_each_value(|v| {
                check_use_dominance(&ctx, &dom, v, &b.label, pos, out, &b.label);
            });
        }

        check_terminator(&ctx, b, out);
        b.term.for_each_value(|v| {
            check_use_dominance(&ctx, &dom, v, &b.label, usize::MAX, out, &b.label);
        });
    }
}

/// Structural soundness of a type in a given position.
fn check_type_shape(
    f: &IrFunction,
    ty: &IrType,
    context: &str,
    void_ok: bool,
    out: &mut Vec<Violation>,
) {
    let bad = match ty {
        IrType::Void => !void_ok,
        IrType::Int(w) => !ALLOWED_WIDTHS.contains(w),
        IrType::Ptr => false,
        IrType::Array(_, elem) => !elem.is_int() || elem.byte_size().is_none(),
        IrType::Func(_) => true,
    };
    if bad {
        out.push(Violation::InvalidType {
            function: f.name.clone(),
            context: context.to_string(),
            ty: ty.to_string(),
        });
    }
}

fn type_of_value(ctx: &FnContext, v: &Value) -> Option<IrType> {
    match v {
        Value::Local(n) => ctx.env.get(n.as_str()).cloned(),
        Value::Global(_) => Some(IrType::Ptr),
        Value::Const(c) => Some(c.ty()),
        Value::Bytes(b) => Some(IrType::array(b.len() as u64, IrType::Int(8))),
        Value::Undef(t) => Some(t.clone()),
    }
}

fn expect_value_type(
    ctx: &FnContext,
    b: &BasicBlock,
    context: &str,
    v: &Value,
    expected: &IrType,
    out: &mut Vec<Violation>,
) {
    match type_of_value(ctx, v) {
        None => out.push(Violation::UndefinedValue {
            function: ctx.f.name.clone(),
            block: b.label.clone(),
            name: describe_value(v),
        }),
        Some(found) if &found != expected => out.push(Violation::TypeMismatch {
            function: ctx.f.name.clone(),
            block: b.label.clone(),
            context: context.to_string(),
            expected: expected.to_string(),
            found: found.to_string(),
        }),
        Some(_) => {
            // Globals referenced as operands must exist.
            if let Value::Global(name) = v {
                let known = ctx.module.global(name).is_some()
                    || ctx.module.function(name).is_some()
                    || (ctx.module.globals.is_empty() && ctx.module.functions.is_empty());
                if !known {
                    out.push(Violation::UndefinedValue {
                        function: ctx.f.name.clone(),
                        block: b.label.clone(),
                        name: format!("@{name}"),
                    });
                }
            }
        }
    }
}

fn describe_value(v: &Value) -> String {
    match v {
        Value::Local(n) => format!("%{n}"),
        Value::Global(n) => format!("@{n}"),
        other => format!("{other:?}"),
    }
}

fn check_use_dominance(
    ctx: &FnContext,
    dom: &super::cfg::Dominators,
    v: &Value,
    use_block: &str,
    use_pos: usize,
    out: &mut Vec<Violation>,
    report_block: &str,
) {
    let Value::Local(name) = v else { return };
    let Some(&(def_bi, def_pos)) = ctx.def_site.get(name.as_str()) else {
        return; // undefined-value violation already reported by type check
    };
    if (def_bi, def_pos) == PARAM_SITE {
        return;
    }
    let def_block = &ctx.f.blocks[def_bi].label;
    // Uses inside unreachable code are not constrained.
    if !dom.is_reachable(use_block) {
        return;
    }
    let ok = if def_block == use_block {
        def_pos < use_pos
    } else {
        dom.dominates(def_block, use_block)
    };
    if !ok {
        out.push(Violation::UseNotDominated {
            function: ctx.f.name.clone(),
            block: report_block.to_string(),
            name: name.clone(),
        });
    }
}

fn check_instruction(ctx: &FnContext, b: &BasicBlock, inst: &Instruction, out: &mut Vec<Violation>) {
    let f = ctx.f;
    match inst {
        Instruction::Binary {
            op, ty, lhs, rhs, ..
        } => {
            if !ty.is_int() {
                out.push(Violation::InvalidType {
                    function: f.name.clone(),
                    context: format!("{} operand type", op.mnemonic()),
                    ty: ty.to_string(),
                });
                return;
            }
            check_type_shape(f, ty, op.mnemonic(), false, out);
            expect_value_type(ctx, b, op.mnemonic(), lhs, ty, out);
            expect_value_type(ctx, b, op.mnemonic(), rhs, ty, out);
        }
        Instruction::Icmp { pred, ty, lhs, rhs, .. } => {
            if !matches!(ty, IrType::Int(_) | IrType::Ptr) {
                out.push(Violation::InvalidType {
                    function: f.name.clone(),
                    context: format!("icmp {}", pred.mnemonic()),
                    ty: ty.to_string(),
                });
                return;
            }
            check_type_shape(f, ty, "icmp", false, out);
            expect_value_type(ctx, b, "icmp", lhs, ty, out);
            expect_value_type(ctx, b, "icmp", rhs, ty, out);
        }
        Instruction::Cast {
            op, from, value, to, ..
        } => {
            let (IrType::Int(fw), IrType::Int(tw)) = (from, to) else {
                out.push(Violation::InvalidType {
                    function: f.name.clone(),
                    context: op.mnemonic().to_string(),
                    ty: format!("{from} to {to}"),
                });
                return;
            };
            check_type_shape(f, from, op.mnemonic(), false, out);
            check_type_shape(f, to, op.mnemonic(), false, out);
            let widths_ok = match op {
                CastOp::Zext | CastOp::Sext => tw > fw,
                CastOp::Trunc => tw < fw,
            };
            if !widths_ok {
                out.push(Violation::TypeMismatch {
                    function: f.name.clone(),
                    block: b.label.clone(),
                    context: op.mnemonic().to_string(),
                    expected: format!("strictly {} width", if *op == CastOp::Trunc { "narrower" } else { "wider" }),
                    found: format!("{from} to {to}"),
                });
            }
            expect_value_type(ctx, b, op.mnemonic(), value, from, out);
        }
        Instruction::Alloca { allocated, .. } => {
            check_type_shape(f, allocated, "alloca", false, out);
            if allocated.byte_size().is_none() {
                out.push(Violation::InvalidType {
                    function: f.name.clone(),
                    context: "alloca".into(),
                    ty: allocated.to_string(),
                });
            }
        }
        Instruction::Load { ty, ptr, .. } => {
            if !matches!(ty, IrType::Int(_) | IrType::Ptr) {
                out.push(Violation::InvalidType {
                    function: f.name.clone(),
                    context: "load".into(),
                    ty: ty.to_string(),
                });
            }
            check_type_shape(f, ty, "load", false, out);
            expect_value_type(ctx, b, "load address", ptr, &IrType::Ptr, out);
        }
        Instruction::Store { ty, value, ptr } => {
            let array_of_bytes = matches!(
                (ty, value),
                (IrType::Array(n, elem), Value::Bytes(bs))
                    if **elem == IrType::Int(8) && bs.len() as u64 == *n
            );
            if !matches!(ty, IrType::Int(_) | IrType::Ptr) && !array_of_bytes {
                out.push(Violation::InvalidType {
                    function: f.name.clone(),
                    context: "store".into(),
                    ty: ty.to_string(),
                });
            }
            check_type_shape(f, ty, "store", false, out);
            expect_value_type(ctx, b, "store value", value, ty, out);
            expect_value_type(ctx, b, "store address", ptr, &IrType::Ptr, out);
        }
        Instruction::Gep {
            base, ptr, indices, ..
        } => {
            let base_ok = match base {
                IrType::Int(_) => indices.len() == 1,
                IrType::Array(_, elem) => elem.is_int() && (1..=2).contains(&indices.len()),
                _ => false,
            };
            if !base_ok {
                out.push(Violation::InvalidType {
                    function: f.name.clone(),
                    context: "getelementptr (only integer and integer-array addressing)".into(),
                    ty: base.to_string(),
                });
            }
            check_type_shape(f, base, "getelementptr", false, out);
            expect_value_type(ctx, b, "getelementptr base", ptr, &IrType::Ptr, out);
            for (ity, iv) in indices {
                if !matches!(ity, IrType::Int(32) | IrType::Int(64)) {
                    out.push(Violation::InvalidType {
                        function: f.name.clone(),
                        context: "getelementptr index".into(),
                        ty: ity.to_string(),
                    });
                }
                expect_value_type(ctx, b, "getelementptr index", iv, ity, out);
            }
        }
        Instruction::Call {
            result,
            ret,
            sig,
            callee,
            args,
        } => {
            check_type_shape(f, ret, "call return", true, out);
            if result.is_some() && *ret == IrType::Void {
                out.push(Violation::TypeMismatch {
                    function: f.name.clone(),
                    block: b.label.clone(),
                    context: format!("call @{callee}"),
                    expected: "non-void result".into(),
                    found: "void".into(),
                });
            }
            let target = ctx.module.function(callee);
            let module_empty = ctx.module.functions.is_empty() && ctx.module.globals.is_empty();
            let Some(target) = target else {
                if !module_empty {
                    out.push(Violation::UndefinedCallee {
                        function: f.name.clone(),
                        callee: callee.clone(),
                    });
                }
                // Without a resolvable callee, still check the argument values.
                for (aty, av) in args {
                    expect_value_type(ctx, b, "call argument", av, aty, out);
                }
                return;
            };
            let tsig = target.signature();
            let mismatch = |detail: String, out: &mut Vec<Violation>| {
                out.push(Violation::CalleeSignatureMismatch {
                    function: f.name.clone(),
                    callee: callee.clone(),
                    detail,
                });
            };
            if *ret != tsig.ret {
                mismatch(format!("return type {} vs {}", ret, tsig.ret), out);
            }
            if tsig.variadic {
                if args.len() < tsig.params.len() {
                    mismatch("too few arguments for variadic callee".into(), out);
                }
                match sig {
                    None => mismatch("variadic call requires an explicit function type".into(), out),
                    Some(s) if *s != tsig => {
                        mismatch("stated function type differs from declaration".into(), out)
                    }
                    Some(_) => {}
                }
            } else if args.len() != tsig.params.len() {
                mismatch(
                    format!("{} arguments, {} expected", args.len(), tsig.params.len()),
                    out,
                );
            }
            for (i, (aty, av)) in args.iter().enumerate() {
                if i < tsig.params.len() && *aty != tsig.params[i] {
                    mismatch(format!("argument {i} type {} vs {}", aty, tsig.params[i]), out);
                }
                if i >= tsig.params.len() && !matches!(aty, IrType::Int(_) | IrType::Ptr) {
                    mismatch(format!("variadic argument {i} has non-scalar type {aty}"), out);
                }
                expect_value_type(ctx, b, "call argument", av, aty, out);
            }
        }
        Instruction::Select {
            ty,
            cond,
            then_value,
            else_value,
            ..
        } => {
            if !matches!(ty, IrType::Int(_) | IrType::Ptr) {
                out.push(Violation::InvalidType {
                    function: f.name.clone(),
                    context: "select".into(),
                    ty: ty.to_string(),
                });
            }
            check_type_shape(f, ty, "select", false, out);
            expect_value_type(ctx, b, "select condition", cond, &IrType::Int(1), out);
            expect_value_type(ctx, b, "select", then_value, ty, out);
            expect_value_type(ctx, b, "select", else_value, ty, out);
        }
    }
}

fn check_terminator(ctx: &FnContext, b: &BasicBlock, out: &mut Vec<Violation>) {
    let f = ctx.f;
    match &b.term {
        Terminator::Ret(None) => {
            if f.ret != IrType::Void {
                out.push(Violation::TypeMismatch {
                    function: f.name.clone(),
                    block: b.label.clone(),
                    context: "ret".into(),
                    expected: f.ret.to_string(),
                    found: "void".into(),
                });
            }
        }
        Terminator::Ret(Some((ty, v))) => {
            if *ty != f.ret {
                out.push(Violation::TypeMismatch {
                    function: f.name.clone(),
                    block: b.label.clone(),
                    context: "ret".into(),
                    expected: f.ret.to_string(),
                    found: ty.to_string(),
                });
            }
            expect_value_type(ctx, b, "ret", v, ty, out);
        }
        Terminator::Br(_) => {}
        Terminator::CondBr { cond, .. } => {
            expect_value_type(ctx, b, "br condition", cond, &IrType::Int(1), out);
        }
        Terminator::Switch {
            ty, value, cases, ..
        } => {
            let IrType::Int(w) = ty else {
                out.push(Violation::InvalidType {
                    function: f.name.clone(),
                    context: "switch".into(),
                    ty: ty.to_string(),
                });
                return;
            };
            check_type_shape(f, ty, "switch", false, out);
            expect_value_type(ctx, b, "switch", value, ty, out);
            let mut seen = std::collections::HashSet::new();
            for (c, _) in cases {
                if c.width() != *w {
                    out.push(Violation::TypeMismatch {
                        function: f.name.clone(),
                        block: b.label.clone(),
                        context: "switch case".into(),
                        expected: ty.to_string(),
                        found: c.ty().to_string(),
                    });
                }
                if !seen.insert(c.bits()) {
                    out.push(Violation::TypeMismatch {
                        function: f.name.clone(),
                        block: b.label.clone(),
                        context: "switch case".into(),
                        expected: "distinct case values".into(),
                        found: c.to_string(),
                    });
                }
            }
        }
        Terminator::Unreachable => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_module;

    fn parsed(src: &str) -> IrModule {
        parse_module(src).expect("fixture parses")
    }

    #[test]
    fn clean_module_has_no_violations() {
        let m = parsed(
            "define i32 @calculate(i32 %a, i32 %b) {\nentry:\n  %sum = add i32 %a, %b\n  ret i32 %sum\n}\n",
        );
        assert_eq!(validate(&m), vec![]);
    }

    #[test]
    fn duplicate_definition_reported() {
        // Built by hand: the parser would reject this text via validate.
        let mut m = parsed(
            "define i32 @f(i32 %a) {\nentry:\n  %x = add i32 %a, 1\n  ret i32 %x\n}\n",
        );
        let dup = m.functions[0].blocks[0].body[0].clone();
        m.functions[0].blocks[0].body.insert(0, dup);
        let vs = validate(&m);
        assert!(vs
            .iter()
            .any(|v| matches!(v, Violation::DuplicateDefinition { name, .. } if name == "x")));
    }

    #[test]
    fn phi_non_predecessor_reported() {
        let mut m = parsed(
            "define i32 @f(i1 %c) {\nentry:\n  br i1 %c, label %a, label %b\na:\n  br label %join\nb:\n  br label %join\njoin:\n  %v = phi i32 [ 1, %a ], [ 2, %b ]\n  ret i32 %v\n}\n",
        );
        // Point one incoming at a block that is not a predecessor.
        if let Some(phi) = m.functions[0].blocks[3].phis.get_mut(0) {
            phi.incomings[1].1 = "entry".into();
        }
        let vs = validate(&m);
        assert!(vs
            .iter()
            .any(|v| matches!(v, Violation::PhiPredecessorMismatch { .. })));
    }

    #[test]
    fn use_before_definition_in_block() {
        let mut m = parsed(
            "define i32 @f(i32 %a) {\nentry:\n  %x = add i32 %a, 1\n  %y = add i32 %x, 1\n  ret i32 %y\n}\n",
        );
        let b = &mut m.functions[0].blocks[0];
        b.body.swap(0, 1);
        let vs = validate(&m);
        assert!(vs
            .iter()
            .any(|v| matches!(v, Violation::UseNotDominated { name, .. } if name == "x")));
    }

    #[test]
    fn cross_block_dominance() {
        let m = parsed(
            "define i32 @f(i1 %c) {\nentry:\n  br i1 %c, label %a, label %b\na:\n  %x = add i32 1, 2\n  br label %join\nb:\n  br label %join\njoin:\n  %y = add i32 3, 4\n  ret i32 %y\n}\n",
        );
        let mut m = m;
        // Use %x (defined only on the `a` arm) in the join block.
        use crate::ir::types::{Instruction, Value};
        m.functions[0].blocks[3].body[0] = Instruction::Binary {
            result: "y".into(),
            op: BinOp::Add,
            ty: IrType::Int(32),
            lhs: Value::local("x"),
            rhs: Value::const_int(32, 4),
        };
        let vs = validate(&m);
        assert!(vs
            .iter()
            .any(|v| matches!(v, Violation::UseNotDominated { name, .. } if name == "x")));
    }

    #[test]
    fn call_signature_checked() {
        let mut m = parsed(
            "define i32 @g() {\nentry:\n  ret i32 0\n}\n\ndefine i32 @f() {\nentry:\n  %x = call i32 @g()\n  ret i32 %x\n}\n",
        );
        // Flip the callee's return type out from under the call site.
        m.functions[0].ret = IrType::Void;
        m.functions[0].blocks[0].term = Terminator::Ret(None);
        let vs = validate(&m);
        assert!(vs
            .iter()
            .any(|v| matches!(v, Violation::CalleeSignatureMismatch { .. })));
    }

    #[test]
    fn variadic_definition_rejected() {
        let mut m = parsed("define i32 @f() {\nentry:\n  ret i32 0\n}\n");
        m.functions[0].variadic = true;
        let vs = validate(&m);
        assert!(vs
            .iter()
            .any(|v| matches!(v, Violation::VariadicDefinition { .. })));
    }
}
