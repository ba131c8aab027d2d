//! Core IR data model: a typed, SSA-form subset of textual LLVM IR.
//!
//! The subset covers integer arithmetic, comparisons, casts, stack memory
//! (`alloca`/`load`/`store`/`getelementptr`), direct calls, `select`, `phi`,
//! and the four terminators `ret`/`br`/`switch`/`unreachable`. Pointers are
//! opaque (`ptr`); every memory instruction carries its own value type, so
//! pointee types are never needed.

use std::collections::HashSet;
use std::fmt;

/// Integer bit widths admitted by the subset.
pub const ALLOWED_WIDTHS: [u32; 5] = [1, 8, 16, 32, 64];

/// A first-class type.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IrType {
    Void,
    /// `iN` with N in {1, 8, 16, 32, 64}.
    Int(u32),
    /// Opaque pointer (`ptr`).
    Ptr,
    /// `[len x elem]`.
    Array(u64, Box<IrType>),
    /// Function signature type, used in varargs call syntax.
    Func(Box<FuncSig>),
}

impl IrType {
    pub fn array(len: u64, elem: IrType) -> IrType {
        IrType::Array(len, Box::new(elem))
    }

    pub fn is_int(&self) -> bool {
        matches!(self, IrType::Int(_))
    }

    /// Byte size of a stored value of this type, if it is storable.
    pub fn byte_size(&self) -> Option<u64> {
        match self {
            IrType::Void | IrType::Func(_) => None,
            IrType::Int(w) => Some((*w as u64).div_ceil(8)),
            IrType::Ptr => Some(8),
            IrType::Array(n, elem) => elem.byte_size().map(|s| n * s),
        }
    }
}

impl fmt::Display for IrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IrType::Void => write!(f, "void"),
            IrType::Int(w) => write!(f, "i{w}"),
            IrType::Ptr => write!(f, "ptr"),
            IrType::Array(n, elem) => write!(f, "[{n} x {elem}]"),
            IrType::Func(sig) => {
                write!(f, "{} (", sig.ret)?;
                for (i, p) in sig.params.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{p}")?;
                }
                if sig.variadic {
                    if sig.params.is_empty() {
                        write!(f, "...")?;
                    } else {
                        write!(f, ", ...")?;
                    }
                }
                write!(f, ")")
            }
        }
    }
}

/// Return type plus parameter types of a function.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FuncSig {
    pub ret: IrType,
    pub params: Vec<IrType>,
    pub variadic: bool,
}

/// A two's-complement integer constant, stored as the zero-extended low
/// `width` bits. Construction wraps out-of-range values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConstInt {
    width: u32,
    bits: u64,
}

impl ConstInt {
    /// Wraps `value` to `width` bits.
    pub fn new(width: u32, value: i64) -> ConstInt {
        ConstInt {
            width,
            bits: (value as u64) & Self::mask(width),
        }
    }

    pub fn from_bits(width: u32, bits: u64) -> ConstInt {
        ConstInt {
            width,
            bits: bits & Self::mask(width),
        }
    }

    pub fn bool_const(v: bool) -> ConstInt {
        ConstInt::from_bits(1, v as u64)
    }

    fn mask(width: u32) -> u64 {
        if width >= 64 {
            u64::MAX
        } else {
            (1u64 << width) - 1
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Raw bits, zero-extended to 64.
    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Signed (sign-extended) interpretation.
    pub fn value(&self) -> i64 {
        let shift = 64 - self.width;
        ((self.bits << shift) as i64) >> shift
    }

    pub fn ty(&self) -> IrType {
        IrType::Int(self.width)
    }
}

impl fmt::Display for ConstInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.width == 1 {
            write!(f, "{}", if self.bits == 1 { "true" } else { "false" })
        } else {
            write!(f, "{}", self.value())
        }
    }
}

/// An instruction or terminator operand.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    /// `%name`
    Local(String),
    /// `@name`
    Global(String),
    Const(ConstInt),
    /// `c"..."` byte-array constant (first-class in `store` and initializers).
    Bytes(Vec<u8>),
    /// `undef` of the given type.
    Undef(IrType),
}

impl Value {
    pub fn local(name: impl Into<String>) -> Value {
        Value::Local(name.into())
    }

    pub fn const_int(width: u32, value: i64) -> Value {
        Value::Const(ConstInt::new(width, value))
    }

    pub fn as_local(&self) -> Option<&str> {
        match self {
            Value::Local(n) => Some(n),
            _ => None,
        }
    }
}

/// Integer binary opcodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    SDiv,
    UDiv,
    SRem,
    URem,
    And,
    Or,
    Xor,
    Shl,
    LShr,
    AShr,
}

impl BinOp {
    pub fn mnemonic(&self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::SDiv => "sdiv",
            BinOp::UDiv => "udiv",
            BinOp::SRem => "srem",
            BinOp::URem => "urem",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
            BinOp::Shl => "shl",
            BinOp::LShr => "lshr",
            BinOp::AShr => "ashr",
        }
    }
}

/// `icmp` predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IcmpPred {
    Eq,
    Ne,
    Slt,
    Sle,
    Sgt,
    Sge,
    Ult,
    Ule,
    Ugt,
    Uge,
}

impl IcmpPred {
    pub fn mnemonic(&self) -> &'static str {
        match self {
            IcmpPred::Eq => "eq",
            IcmpPred::Ne => "ne",
            IcmpPred::Slt => "slt",
            IcmpPred::Sle => "sle",
            IcmpPred::Sgt => "sgt",
            IcmpPred::Sge => "sge",
            IcmpPred::Ult => "ult",
            IcmpPred::Ule => "ule",
            IcmpPred::Ugt => "ugt",
            IcmpPred::Uge => "uge",
        }
    }
}

/// Integer cast opcodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CastOp {
    Zext,
    Sext,
    Trunc,
}

impl CastOp {
    pub fn mnemonic(&self) -> &'static str {
        match self {
            CastOp::Zext => "zext",
            CastOp::Sext => "sext",
            CastOp::Trunc => "trunc",
        }
    }
}

/// A non-phi, non-terminator instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instruction {
    Binary {
        result: String,
        op: BinOp,
        ty: IrType,
        lhs: Value,
        rhs: Value,
    },
    Icmp {
        result: String,
        pred: IcmpPred,
        ty: IrType,
        lhs: Value,
        rhs: Value,
    },
    Cast {
        result: String,
        op: CastOp,
        from: IrType,
        value: Value,
        to: IrType,
    },
    Alloca {
        result: String,
        allocated: IrType,
    },
    Load {
        result: String,
        ty: IrType,
        ptr: Value,
    },
    Store {
        ty: IrType,
        value: Value,
        ptr: Value,
    },
    Gep {
        result: String,
        base: IrType,
        ptr: Value,
        indices: Vec<(IrType, Value)>,
    },
    Call {
        /// Absent for void calls and for calls whose value is discarded.
        result: Option<String>,
        ret: IrType,
        /// Full callee type, required in the textual form for variadic callees.
        sig: Option<FuncSig>,
        callee: String,
        args: Vec<(IrType, Value)>,
    },
    Select {
        result: String,
        ty: IrType,
        cond: Value,
        then_value: Value,
        else_value: Value,
    },
}

impl Instruction {
    /// The local name this instruction defines, if any.
    pub fn result(&self) -> Option<&str> {
        match self {
            Instruction::Binary { result, .. }
            | Instruction::Icmp { result, .. }
            | Instruction::Cast { result, .. }
            | Instruction::Alloca { result, .. }
            | Instruction::Load { result, .. }
            | Instruction::Gep { result, .. }
            | Instruction::Select { result, .. } => Some(result),
            Instruction::Call { result, .. } => result.as_deref(),
            Instruction::Store { .. } => None,
        }
    }

    pub fn result_mut(&mut self) -> Option<&mut String> {
        match self {
            Instruction::Binary { result, .. }
            | Instruction::Icmp { result, .. }
            | Instruction::Cast { result, .. }
            | Instruction::Alloca { result, .. }
            | Instruction::Load { result, .. }
            | Instruction::Gep { result, .. }
            | Instruction::Select { result, .. } => Some(result),
            Instruction::Call { result, .. } => result.as_mut(),
            Instruction::Store { .. } => None,
        }
    }

    /// Visits every operand value.
    pub fn for_each_value(&self, mut f: impl FnMut(&Value)) {
        match self {
            Instruction::Binary { lhs, rhs, .. } | Instruction::Icmp { lhs, rhs, .. } => {
                f(lhs);
                f(rhs);
            }
            Instruction::Cast { value, .. } => f(value),
            Instruction::Alloca { .. } => {}
            Instruction::Load { ptr, .. } => f(ptr),
            Instruction::Store { value, ptr, .. } => {
                f(value);
                f(ptr);
            }
            Instruction::Gep { ptr, indices, .. } => {
                f(ptr);
                for (_, v) in indices {
                    f(v);
                }
            }
            Instruction::Call { args, .. } => {
                for (_, v) in args {
                    f(v);
                }
            }
            Instruction::Select {
                cond,
                then_value,
                else_value,
                ..
            } => {
                f(cond);
                f(then_value);
                f(else_value);
            }
        }
    }

    /// Mutable operand visitor, used by renaming rewrites.
    pub fn for_each_value_mut(&mut self, mut f: impl FnMut(&mut Value)) {
        match self {
            Instruction::Binary { lhs, rhs, .. } | Instruction::Icmp { lhs, rhs, .. } => {
                f(lhs);
                f(rhs);
            }
            Instruction::Cast { value, .. } => f(value),
            Instruction::Alloca { .. } => {}
            Instruction::Load { ptr, .. } => f(ptr),
            Instruction::Store { value, ptr, .. } => {
                f(value);
                f(ptr);
            }
            Instruction::Gep { ptr, indices, .. } => {
                f(ptr);
                for (_, v) in indices {
                    f(v);
                }
            }
            Instruction::Call { args, .. } => {
                for (_, v) in args {
                    f(v);
                }
            }
            Instruction::Select {
                cond,
                then_value,
                else_value,
                ..
            } => {
                f(cond);
                f(then_value);
                f(else_value);
            }
        }
    }

    /// Result type of the instruction, if it defines a value.
    pub fn result_type(&self) -> Option<IrType> {
        match self {
            Instruction::Binary { ty, .. } => Some(ty.clone()),
            Instruction::Icmp { .. } => Some(IrType::Int(1)),
            Instruction::Cast { to, .. } => Some(to.clone()),
            Instruction::Alloca { .. } | Instruction::Gep { .. } => Some(IrType::Ptr),
            Instruction::Load { ty, .. } => Some(ty.clone()),
            Instruction::Store { .. } => None,
            Instruction::Call { result, ret, .. } => result.as_ref().map(|_| ret.clone()),
            Instruction::Select { ty, .. } => Some(ty.clone()),
        }
    }
}

/// A phi node. Kept separate from [`Instruction`] so blocks hold them as a
/// structural prefix and passes cannot misplace one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phi {
    pub result: String,
    pub ty: IrType,
    /// One `(value, predecessor label)` pair per CFG predecessor.
    pub incomings: Vec<(Value, String)>,
}

/// A block terminator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Terminator {
    Ret(Option<(IrType, Value)>),
    Br(String),
    CondBr {
        cond: Value,
        then_label: String,
        else_label: String,
    },
    Switch {
        ty: IrType,
        value: Value,
        default: String,
        cases: Vec<(ConstInt, String)>,
    },
    Unreachable,
}

impl Terminator {
    /// Successor labels in textual order.
    pub fn successors(&self) -> Vec<&str> {
        match self {
            Terminator::Ret(_) | Terminator::Unreachable => vec![],
            Terminator::Br(l) => vec![l],
            Terminator::CondBr {
                then_label,
                else_label,
                ..
            } => vec![then_label, else_label],
            Terminator::Switch { default, cases, .. } => {
                let mut out = vec![default.as_str()];
                out.extend(cases.iter().map(|(_, l)| l.as_str()));
                out
            }
        }
    }

    pub fn for_each_value(&self, mut f: impl FnMut(&Value)) {
        match self {
            Terminator::Ret(Some((_, v))) => f(v),
            Terminator::CondBr { cond, .. } => f(cond),
            Terminator::Switch { value, .. } => f(value),
            _ => {}
        }
    }

    pub fn for_each_value_mut(&mut self, mut f: impl FnMut(&mut Value)) {
        match self {
            Terminator::Ret(Some((_, v))) => f(v),
            Terminator::CondBr { cond, .. } => f(cond),
            Terminator::Switch { value, .. } => f(value),
            _ => {}
        }
    }

    /// True for `ret` and `unreachable`: blocks that leave the function.
    pub fn is_terminal(&self) -> bool {
        matches!(self, Terminator::Ret(_) | Terminator::Unreachable)
    }
}

/// A basic block: phi prefix, straight-line body, one terminator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub label: String,
    pub phis: Vec<Phi>,
    pub body: Vec<Instruction>,
    pub term: Terminator,
}

impl BasicBlock {
    pub fn new(label: impl Into<String>, term: Terminator) -> BasicBlock {
        BasicBlock {
            label: label.into(),
            phis: Vec::new(),
            body: Vec::new(),
            term,
        }
    }
}

/// A named function parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: IrType,
}

/// A function definition or declaration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrFunction {
    pub name: String,
    pub ret: IrType,
    pub params: Vec<Param>,
    /// Variadic functions may only be declared, never defined.
    pub variadic: bool,
    pub blocks: Vec<BasicBlock>,
    pub is_declaration: bool,
}

impl IrFunction {
    pub fn signature(&self) -> FuncSig {
        FuncSig {
            ret: self.ret.clone(),
            params: self.params.iter().map(|p| p.ty.clone()).collect(),
            variadic: self.variadic,
        }
    }

    pub fn entry(&self) -> Option<&BasicBlock> {
        self.blocks.first()
    }

    pub fn block(&self, label: &str) -> Option<&BasicBlock> {
        self.blocks.iter().find(|b| b.label == label)
    }

    pub fn block_mut(&mut self, label: &str) -> Option<&mut BasicBlock> {
        self.blocks.iter_mut().find(|b| b.label == label)
    }
}

/// Initializer of a module-level global.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GlobalInit {
    Int(ConstInt),
    /// `c"..."` byte array; the global's type must be `[len x i8]`.
    Bytes(Vec<u8>),
    Zero,
}

/// A module-level global variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalVar {
    pub name: String,
    pub ty: IrType,
    pub init: GlobalInit,
}

/// A whole translation unit: globals plus defined and declared functions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IrModule {
    pub globals: Vec<GlobalVar>,
    pub functions: Vec<IrFunction>,
}

impl IrModule {
    pub fn function(&self, name: &str) -> Option<&IrFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_mut(&mut self, name: &str) -> Option<&mut IrFunction> {
        self.functions.iter_mut().find(|f| f.name == name)
    }

    pub fn global(&self, name: &str) -> Option<&GlobalVar> {
        self.globals.iter().find(|g| g.name == name)
    }

    /// Defined (non-declaration) functions in module order.
    pub fn definitions(&self) -> impl Iterator<Item = &IrFunction> {
        self.functions.iter().filter(|f| !f.is_declaration)
    }
}

/// Generates names unique within one function. Locals and labels share the
/// namespace, matching LLVM where labels are `%`-prefixed in branch operands.
#[derive(Debug, Clone)]
pub struct FreshNames {
    used: HashSet<String>,
    counter: u64,
}

impl FreshNames {
    pub fn for_function(f: &IrFunction) -> FreshNames {
        let mut used = HashSet::new();
        for p in &f.params {
            used.insert(p.name.clone());
        }
        for b in &f.blocks {
            used.insert(b.label.clone());
            for phi in &b.phis {
                used.insert(phi.result.clone());
            }
            for inst in &b.body {
                if let Some(r) = inst.result() {
                    used.insert(r.to_string());
                }
            }
        }
        FreshNames { used, counter: 0 }
    }

    /// Returns `"{base}.{n}"` for the first monotone `n` not yet in use.
    pub fn fresh(&mut self, base: &str) -> String {
        loop {
            self.counter += 1;
            let candidate = format!("{base}.{}", self.counter);
            if self.used.insert(candidate.clone()) {
                return candidate;
            }
        }
    }

    /// Marks an externally chosen name as taken.
    pub fn reserve(&mut self, name: &str) {
        self.used.insert(name.to_string());
    }

    pub fn is_used(&self, name: &str) -> bool {
        self.used.contains(name)
    }
}
