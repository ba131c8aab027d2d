//! Deterministic interpreter for the IR subset.
//!
//! This is the ground-truth semantics behind the differential oracle and the
//! coverage probe that shows bogus paths never execute. Everything is fixed:
//! two's-complement wrapping arithmetic, little-endian memory, zero-reading
//! `undef`, trapping division corner cases. Identical inputs always produce
//! identical results, including the extern-event order and block hit counts.

mod vectors;

pub use vectors::{gen_vectors, ArgValue, VectorError};

use std::collections::{BTreeMap, HashMap};
use std::hash::{BuildHasherDefault, Hasher};

use crate::ir::*;

/// FNV-1a hasher for the interpreter's hot maps: local names and labels are
/// short, trusted strings.
#[derive(Default)]
struct FnvHasher(u64);

impl Hasher for FnvHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        let mut h = if self.0 == 0 { 0xcbf29ce484222325 } else { self.0 };
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        self.0 = h;
    }
}

type FastMap<K, V> = HashMap<K, V, BuildHasherDefault<FnvHasher>>;

/// Ceiling on interpreted steps per run. Flattened loops inflate step counts
/// a few times over, so this still keeps a runaway test under a second.
pub const DEFAULT_FUEL: u64 = 1_000_000;

/// Calls deeper than this trap instead of exhausting the host stack.
const MAX_CALL_DEPTH: u32 = 256;

/// A value inside the machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuntimeValue {
    Int(ConstInt),
    /// Pointer into allocation `alloc` at a byte offset (possibly out of
    /// bounds until dereferenced).
    Ptr { alloc: usize, offset: i64 },
    /// First-class byte-array constant flowing into a store or call.
    Bytes(Vec<u8>),
}

impl std::fmt::Display for RuntimeValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RuntimeValue::Int(c) => write!(f, "{} {}", c.ty(), c),
            RuntimeValue::Ptr { alloc, offset } => write!(f, "ptr a{alloc}+{offset}"),
            RuntimeValue::Bytes(b) => write!(f, "{} bytes", b.len()),
        }
    }
}

/// Why execution trapped. Compared by class in the differential oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrapReason {
    DivByZero,
    /// `INT_MIN sdiv/srem -1`, mirroring hardware #DE conservatively.
    SignedOverflow,
    OobAccess,
    /// Dereference or rendering of a pointer that never pointed anywhere.
    InvalidPointer,
    /// `icmp` between pointers into different allocations.
    CrossAllocationCompare,
    CallDepthExceeded,
    /// Call of an extern the policy refuses to model.
    UnknownExtern,
}

impl std::fmt::Display for TrapReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TrapReason::DivByZero => "division by zero",
            TrapReason::SignedOverflow => "signed division overflow",
            TrapReason::OobAccess => "out-of-bounds memory access",
            TrapReason::InvalidPointer => "invalid pointer",
            TrapReason::CrossAllocationCompare => "pointer comparison across allocations",
            TrapReason::CallDepthExceeded => "call depth exceeded",
            TrapReason::UnknownExtern => "call to unmodeled external function",
        };
        f.write_str(s)
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Returned(Option<RuntimeValue>),
    Trapped(TrapReason),
    OutOfFuel,
}

/// One observable call to a declared-only function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternEvent {
    pub callee: String,
    pub args: Vec<EventArg>,
}

/// Rendered extern-call argument: integers verbatim, pointers as the
/// NUL-terminated byte string they reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventArg {
    Int(ConstInt),
    Str(String),
}

impl std::fmt::Display for EventArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EventArg::Int(c) => write!(f, "{c}"),
            EventArg::Str(s) => write!(f, "{s:?}"),
        }
    }
}

/// Everything observable about one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecResult {
    pub outcome: Outcome,
    pub events: Vec<ExternEvent>,
    pub steps: u64,
    /// Visit count per block of the entry function (all its labels present,
    /// unvisited ones at zero).
    pub block_hits: BTreeMap<String, u64>,
}

/// What declared-only callees return.
#[derive(Debug, Clone)]
pub struct ExternPolicy {
    /// Callee name -> returned constant (masked to the declared width).
    pub default_return: BTreeMap<String, ConstInt>,
    pub unknown_callee: UnknownCallee,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownCallee {
    Trap,
    ReturnZero,
}

impl Default for ExternPolicy {
    /// printf-like behavior: record the call, return zero.
    fn default() -> Self {
        ExternPolicy {
            default_return: BTreeMap::new(),
            unknown_callee: UnknownCallee::ReturnZero,
        }
    }
}

/// Errors raised before execution starts.
#[derive(Debug, Clone, thiserror::Error)]
pub enum InterpError {
    #[error("unknown function '@{0}'")]
    UnknownFunction(String),
    #[error("'@{0}' is a declaration, not a definition")]
    NotADefinition(String),
    #[error("argument mismatch for '@{function}': {detail}")]
    ArgMismatch { function: String, detail: String },
}

/// Runs `@name` on `args` with a step budget.
///
/// Arithmetic wraps, division corner cases trap, memory accesses are bounds
/// checked, and declared-only callees consume `policy` while appending an
/// [`ExternEvent`]. Execution ends at `ret` of the entry frame, at a trap,
/// or when `fuel` steps have been spent.
pub fn run_function(
    module: &IrModule,
    name: &str,
    args: &[ArgValue],
    fuel: u64,
    policy: &ExternPolicy,
) -> Result<ExecResult, InterpError> {
    let f = module
        .function(name)
        .ok_or_else(|| InterpError::UnknownFunction(name.to_string()))?;
    if f.is_declaration {
        return Err(InterpError::NotADefinition(name.to_string()));
    }
    if args.len() != f.params.len() {
        return Err(InterpError::ArgMismatch {
            function: name.to_string(),
            detail: format!("{} arguments, {} expected", args.len(), f.params.len()),
        });
    }
    for (i, (arg, param)) in args.iter().zip(&f.params).enumerate() {
        let ok = match (arg, &param.ty) {
            (ArgValue::Int(c), IrType::Int(w)) => c.width() == *w,
            (ArgValue::Buffer(_), IrType::Ptr) => true,
            _ => false,
        };
        if !ok {
            return Err(InterpError::ArgMismatch {
                function: name.to_string(),
                detail: format!("argument {i} does not fit parameter type '{}'", param.ty),
            });
        }
    }

    let mut machine = Machine {
        module,
        policy,
        fuel,
        steps: 0,
        events: Vec::new(),
        allocs: Vec::new(),
        globals: HashMap::new(),
        root: name.to_string(),
        hits: vec![0; f.blocks.len()],
    };
    machine.materialize_globals();

    let mut bound = Vec::with_capacity(args.len());
    for arg in args {
        bound.push(match arg {
            ArgValue::Int(c) => RuntimeValue::Int(*c),
            ArgValue::Buffer(bytes) => {
                let alloc = machine.alloc(bytes.clone());
                RuntimeValue::Ptr { alloc, offset: 0 }
            }
        });
    }

    let outcome = match machine.exec_function(f, bound, 0) {
        Ok(v) => Outcome::Returned(v),
        Err(Stop::Trap(t)) => Outcome::Trapped(t),
        Err(Stop::OutOfFuel) => Outcome::OutOfFuel,
    };
    let block_hits = f
        .blocks
        .iter()
        .zip(&machine.hits)
        .map(|(b, h)| (b.label.clone(), *h))
        .collect();
    Ok(ExecResult {
        outcome,
        events: machine.events,
        steps: machine.steps,
        block_hits,
    })
}

enum Stop {
    Trap(TrapReason),
    OutOfFuel,
}

struct Machine<'m> {
    module: &'m IrModule,
    policy: &'m ExternPolicy,
    fuel: u64,
    steps: u64,
    events: Vec<ExternEvent>,
    allocs: Vec<Vec<u8>>,
    globals: HashMap<String, usize>,
    root: String,
    /// Visit counters aligned with the root function's block order.
    hits: Vec<u64>,
}

impl<'m> Machine<'m> {
    fn materialize_globals(&mut self) {
        for g in &self.module.globals {
            let bytes = match &g.init {
                GlobalInit::Int(c) => {
                    let sz = c.ty().byte_size().unwrap_or(8) as usize;
                    c.bits().to_le_bytes()[..sz].to_vec()
                }
                GlobalInit::Bytes(b) => b.clone(),
                GlobalInit::Zero => vec![0; g.ty.byte_size().unwrap_or(0) as usize],
            };
            let alloc = self.alloc(bytes);
            self.globals.insert(g.name.clone(), alloc);
        }
    }

    fn alloc(&mut self, bytes: Vec<u8>) -> usize {
        self.allocs.push(bytes);
        self.allocs.len() - 1
    }

    fn step(&mut self) -> Result<(), Stop> {
        if self.steps >= self.fuel {
            return Err(Stop::OutOfFuel);
        }
        self.steps += 1;
        Ok(())
    }

    fn exec_function(
        &mut self,
        f: &IrFunction,
        args: Vec<RuntimeValue>,
        depth: u32,
    ) -> Result<Option<RuntimeValue>, Stop> {
        if depth > MAX_CALL_DEPTH {
            return Err(Stop::Trap(TrapReason::CallDepthExceeded));
        }
        let mut locals: FastMap<&str, RuntimeValue> = FastMap::default();
        for (p, v) in f.params.iter().zip(args) {
            locals.insert(p.name.as_str(), v);
        }
        // Hash the labels only when linear search would start to hurt.
        let label_index: Option<FastMap<&str, usize>> = if f.blocks.len() > 8 {
            Some(
                f.blocks
                    .iter()
                    .enumerate()
                    .map(|(i, b)| (b.label.as_str(), i))
                    .collect(),
            )
        } else {
            None
        };
        let find_block = |label: &str| -> usize {
            match &label_index {
                Some(map) => map[label],
                None => f
                    .blocks
                    .iter()
                    .position(|b| b.label == label)
                    .expect("validated label"),
            }
        };
        let is_root = f.name == self.root;

        let mut cur_idx = 0usize;
        let mut previous_label: Option<&str> = None;
        loop {
            let current: &BasicBlock = &f.blocks[cur_idx];
            // A block visit always spends at least one step; refusing entry
            // on empty fuel keeps sum(block_hits) <= steps.
            if self.steps >= self.fuel {
                return Err(Stop::OutOfFuel);
            }
            if is_root {
                self.hits[cur_idx] += 1;
            }

            // Phis read their incoming values simultaneously.
            if !current.phis.is_empty() {
                let pred = previous_label.expect("entry has no phis (validated)");
                let mut updates = Vec::with_capacity(current.phis.len());
                for phi in &current.phis {
                    self.step()?;
                    let (value, _) = phi
                        .incomings
                        .iter()
                        .find(|(_, l)| l == pred)
                        .expect("phi covers every predecessor (validated)");
                    updates.push((phi.result.as_str(), self.eval(value, &locals)?));
                }
                for (name, v) in updates {
                    locals.insert(name, v);
                }
            }

            for inst in &current.body {
                self.step()?;
                if let Some((name, v)) = self.exec_instruction(inst, &locals, depth)? {
                    locals.insert(name, v);
                }
            }

            self.step()?;
            match &current.term {
                Terminator::Ret(None) => return Ok(None),
                Terminator::Ret(Some((_, v))) => return Ok(Some(self.eval(v, &locals)?)),
                Terminator::Br(label) => {
                    previous_label = Some(&current.label);
                    cur_idx = find_block(label);
                }
                Terminator::CondBr {
                    cond,
                    then_label,
                    else_label,
                } => {
                    let c = self.eval_int(cond, &locals)?;
                    let target = if c.bits() != 0 { then_label } else { else_label };
                    previous_label = Some(&current.label);
                    cur_idx = find_block(target);
                }
                Terminator::Switch {
                    value,
                    default,
                    cases,
                    ..
                } => {
                    let v = self.eval_int(value, &locals)?;
                    let target = cases
                        .iter()
                        .find(|(c, _)| c.bits() == v.bits())
                        .map(|(_, l)| l)
                        .unwrap_or(default);
                    previous_label = Some(&current.label);
                    cur_idx = find_block(target);
                }
                Terminator::Unreachable => {
                    // Reaching `unreachable` is a program bug; treat it as an
                    // invalid-pointer-class trap so it stays comparable.
                    return Err(Stop::Trap(TrapReason::InvalidPointer));
                }
            }
        }
    }

    fn eval(
        &mut self,
        v: &Value,
        locals: &FastMap<&str, RuntimeValue>,
    ) -> Result<RuntimeValue, Stop> {
        Ok(match v {
            Value::Local(n) => locals
                .get(n.as_str())
                .expect("validated dominance guarantees a value")
                .clone(),
            Value::Global(n) => match self.globals.get(n.as_str()) {
                Some(&alloc) => RuntimeValue::Ptr { alloc, offset: 0 },
                // A function address; calls are direct in the subset, so any
                // dereference of this will trap.
                None => RuntimeValue::Ptr {
                    alloc: usize::MAX,
                    offset: 0,
                },
            },
            Value::Const(c) => RuntimeValue::Int(*c),
            Value::Bytes(b) => RuntimeValue::Bytes(b.clone()),
            // Reading undef yields zero, keeping the oracle deterministic.
            Value::Undef(ty) => match ty {
                IrType::Int(w) => RuntimeValue::Int(ConstInt::new(*w, 0)),
                _ => RuntimeValue::Ptr {
                    alloc: usize::MAX,
                    offset: 0,
                },
            },
        })
    }

    fn eval_int(
        &mut self,
        v: &Value,
        locals: &FastMap<&str, RuntimeValue>,
    ) -> Result<ConstInt, Stop> {
        match self.eval(v, locals)? {
            RuntimeValue::Int(c) => Ok(c),
            _ => Err(Stop::Trap(TrapReason::InvalidPointer)),
        }
    }

    fn exec_instruction<'f>(
        &mut self,
        inst: &'f Instruction,
        locals: &FastMap<&str, RuntimeValue>,
        depth: u32,
    ) -> Result<Option<(&'f str, RuntimeValue)>, Stop> {
        match inst {
            Instruction::Binary {
                result,
                op,
                lhs,
                rhs,
                ..
            } => {
                let a = self.eval_int(lhs, locals)?;
                let b = self.eval_int(rhs, locals)?;
                let r = apply_binop(*op, a, b).map_err(Stop::Trap)?;
                Ok(Some((result, RuntimeValue::Int(r))))
            }
            Instruction::Icmp {
                result, pred, lhs, rhs, ..
            } => {
                let a = self.eval(lhs, locals)?;
                let b = self.eval(rhs, locals)?;
                let r = apply_icmp(*pred, &a, &b).map_err(Stop::Trap)?;
                Ok(Some((result, RuntimeValue::Int(ConstInt::bool_const(r)))))
            }
            Instruction::Cast {
                result, op, value, to, ..
            } => {
                let v = self.eval_int(value, locals)?;
                let IrType::Int(tw) = to else { unreachable!("validated cast") };
                let r = match op {
                    CastOp::Zext => ConstInt::from_bits(*tw, v.bits()),
                    CastOp::Sext => ConstInt::new(*tw, v.value()),
                    CastOp::Trunc => ConstInt::from_bits(*tw, v.bits()),
                };
                Ok(Some((result, RuntimeValue::Int(r))))
            }
            Instruction::Alloca { result, allocated } => {
                let size = allocated.byte_size().expect("validated alloca type") as usize;
                let alloc = self.alloc(vec![0; size]);
                Ok(Some((result, RuntimeValue::Ptr { alloc, offset: 0 })))
            }
            Instruction::Load { result, ty, ptr } => {
                let p = self.eval(ptr, locals)?;
                let v = self.load(ty, &p)?;
                Ok(Some((result, v)))
            }
            Instruction::Store { ty, value, ptr } => {
                let v = self.eval(value, locals)?;
                let p = self.eval(ptr, locals)?;
                self.store(ty, &v, &p)?;
                Ok(None)
            }
            Instruction::Gep {
                result,
                base,
                ptr,
                indices,
            } => {
                let p = self.eval(ptr, locals)?;
                let RuntimeValue::Ptr { alloc, offset } = p else {
                    return Err(Stop::Trap(TrapReason::InvalidPointer));
                };
                let mut off = offset;
                for (i, (_, iv)) in indices.iter().enumerate() {
                    let idx = self.eval_int(iv, locals)?.value();
                    let elem_size = match (i, base) {
                        (0, _) => base.byte_size().expect("validated gep base"),
                        (_, IrType::Array(_, elem)) => elem.byte_size().expect("validated"),
                        _ => unreachable!("validated index count"),
                    } as i64;
                    off = off.wrapping_add(idx.wrapping_mul(elem_size));
                }
                Ok(Some((result, RuntimeValue::Ptr { alloc, offset: off })))
            }
            Instruction::Call {
                result,
                callee,
                args,
                ..
            } => {
                let mut arg_values = Vec::with_capacity(args.len());
                for (_, av) in args {
                    arg_values.push(self.eval(av, locals)?);
                }
                let target = self
                    .module
                    .function(callee)
                    .expect("validated call target");
                let value = if target.is_declaration {
                    self.extern_call(target, &arg_values)?
                } else {
                    self.exec_function(target, arg_values, depth + 1)?
                };
                match (result, value) {
                    (Some(r), Some(v)) => Ok(Some((r, v))),
                    (Some(_), None) => unreachable!("validated non-void result"),
                    (None, _) => Ok(None),
                }
            }
            Instruction::Select {
                result,
                cond,
                then_value,
                else_value,
                ..
            } => {
                let c = self.eval_int(cond, locals)?;
                let v = if c.bits() != 0 {
                    self.eval(then_value, locals)?
                } else {
                    self.eval(else_value, locals)?
                };
                Ok(Some((result, v)))
            }
        }
    }

    fn bounds(&self, alloc: usize, offset: i64, size: u64) -> Result<usize, Stop> {
        let Some(buf) = self.allocs.get(alloc) else {
            return Err(Stop::Trap(TrapReason::InvalidPointer));
        };
        if offset < 0 || (offset as u64).saturating_add(size) > buf.len() as u64 {
            return Err(Stop::Trap(TrapReason::OobAccess));
        }
        Ok(offset as usize)
    }

    fn load(&mut self, ty: &IrType, p: &RuntimeValue) -> Result<RuntimeValue, Stop> {
        let RuntimeValue::Ptr { alloc, offset } = p else {
            return Err(Stop::Trap(TrapReason::InvalidPointer));
        };
        match ty {
            IrType::Int(w) => {
                let size = ty.byte_size().unwrap();
                let at = self.bounds(*alloc, *offset, size)?;
                let mut bytes = [0u8; 8];
                bytes[..size as usize].copy_from_slice(&self.allocs[*alloc][at..at + size as usize]);
                Ok(RuntimeValue::Int(ConstInt::from_bits(*w, u64::from_le_bytes(bytes))))
            }
            IrType::Ptr => {
                let at = self.bounds(*alloc, *offset, 8)?;
                let mut bytes = [0u8; 8];
                bytes.copy_from_slice(&self.allocs[*alloc][at..at + 8]);
                Ok(decode_ptr(u64::from_le_bytes(bytes)))
            }
            _ => Err(Stop::Trap(TrapReason::InvalidPointer)),
        }
    }

    fn store(&mut self, ty: &IrType, v: &RuntimeValue, p: &RuntimeValue) -> Result<(), Stop> {
        let RuntimeValue::Ptr { alloc, offset } = p else {
            return Err(Stop::Trap(TrapReason::InvalidPointer));
        };
        match (ty, v) {
            (IrType::Int(_), RuntimeValue::Int(c)) => {
                let size = ty.byte_size().unwrap();
                let at = self.bounds(*alloc, *offset, size)?;
                let bytes = c.bits().to_le_bytes();
                self.allocs[*alloc][at..at + size as usize].copy_from_slice(&bytes[..size as usize]);
                Ok(())
            }
            (IrType::Ptr, RuntimeValue::Ptr { alloc: pa, offset: po }) => {
                let at = self.bounds(*alloc, *offset, 8)?;
                let bytes = encode_ptr(*pa, *po).to_le_bytes();
                self.allocs[*alloc][at..at + 8].copy_from_slice(&bytes);
                Ok(())
            }
            (IrType::Array(_, _), RuntimeValue::Bytes(bs)) => {
                let at = self.bounds(*alloc, *offset, bs.len() as u64)?;
                let len = bs.len();
                self.allocs[*alloc][at..at + len].copy_from_slice(bs);
                Ok(())
            }
            _ => Err(Stop::Trap(TrapReason::InvalidPointer)),
        }
    }

    fn extern_call(
        &mut self,
        target: &IrFunction,
        args: &[RuntimeValue],
    ) -> Result<Option<RuntimeValue>, Stop> {
        let mut rendered = Vec::with_capacity(args.len());
        for a in args {
            rendered.push(match a {
                RuntimeValue::Int(c) => EventArg::Int(*c),
                RuntimeValue::Ptr { alloc, offset } => EventArg::Str(self.render_cstr(*alloc, *offset)?),
                RuntimeValue::Bytes(b) => EventArg::Str(render_bytes(b)),
            });
        }
        self.events.push(ExternEvent {
            callee: target.name.clone(),
            args: rendered,
        });

        if target.ret == IrType::Void {
            return Ok(None);
        }
        match self.policy.default_return.get(&target.name) {
            Some(c) => match &target.ret {
                IrType::Int(w) => Ok(Some(RuntimeValue::Int(ConstInt::from_bits(*w, c.bits())))),
                _ => Ok(Some(RuntimeValue::Ptr {
                    alloc: usize::MAX,
                    offset: 0,
                })),
            },
            None => match self.policy.unknown_callee {
                UnknownCallee::Trap => Err(Stop::Trap(TrapReason::UnknownExtern)),
                UnknownCallee::ReturnZero => match &target.ret {
                    IrType::Int(w) => Ok(Some(RuntimeValue::Int(ConstInt::new(*w, 0)))),
                    _ => Ok(Some(RuntimeValue::Ptr {
                        alloc: usize::MAX,
                        offset: 0,
                    })),
                },
            },
        }
    }

    /// Reads the NUL-terminated byte string at `alloc+offset`, stopping at
    /// the end of the allocation if no NUL appears.
    fn render_cstr(&self, alloc: usize, offset: i64) -> Result<String, Stop> {
        let Some(buf) = self.allocs.get(alloc) else {
            return Err(Stop::Trap(TrapReason::InvalidPointer));
        };
        if offset < 0 || offset as usize > buf.len() {
            return Err(Stop::Trap(TrapReason::OobAccess));
        }
        let tail = &buf[offset as usize..];
        let end = tail.iter().position(|&b| b == 0).unwrap_or(tail.len());
        Ok(render_bytes(&tail[..end]))
    }
}

fn render_bytes(bytes: &[u8]) -> String {
    let end = bytes.iter().position(|&b| b == 0).unwrap_or(bytes.len());
    String::from_utf8_lossy(&bytes[..end]).into_owned()
}

/// Pointers in memory: allocation index + 1 in the high half, offset in the
/// low half. All-zero bytes decode to an invalid pointer, so uninitialized
/// slots trap on use instead of aliasing allocation 0.
fn encode_ptr(alloc: usize, offset: i64) -> u64 {
    ((alloc as u64 + 1) << 32) | (offset as i32 as u32 as u64)
}

fn decode_ptr(bits: u64) -> RuntimeValue {
    let hi = bits >> 32;
    if hi == 0 {
        return RuntimeValue::Ptr {
            alloc: usize::MAX,
            offset: 0,
        };
    }
    RuntimeValue::Ptr {
        alloc: (hi - 1) as usize,
        offset: bits as u32 as i32 as i64,
    }
}

fn apply_binop(op: BinOp, a: ConstInt, b: ConstInt) -> Result<ConstInt, TrapReason> {
    let w = a.width();
    let out = match op {
        BinOp::Add => ConstInt::from_bits(w, a.bits().wrapping_add(b.bits())),
        BinOp::Sub => ConstInt::from_bits(w, a.bits().wrapping_sub(b.bits())),
        BinOp::Mul => ConstInt::from_bits(w, a.bits().wrapping_mul(b.bits())),
        BinOp::UDiv => {
            if b.bits() == 0 {
                return Err(TrapReason::DivByZero);
            }
            ConstInt::from_bits(w, a.bits() / b.bits())
        }
        BinOp::URem => {
            if b.bits() == 0 {
                return Err(TrapReason::DivByZero);
            }
            ConstInt::from_bits(w, a.bits() % b.bits())
        }
        BinOp::SDiv => {
            if b.bits() == 0 {
                return Err(TrapReason::DivByZero);
            }
            if a.value() == min_signed(w) && b.value() == -1 {
                return Err(TrapReason::SignedOverflow);
            }
            ConstInt::new(w, a.value().wrapping_div(b.value()))
        }
        BinOp::SRem => {
            if b.bits() == 0 {
                return Err(TrapReason::DivByZero);
            }
            if a.value() == min_signed(w) && b.value() == -1 {
                return Err(TrapReason::SignedOverflow);
            }
            ConstInt::new(w, a.value().wrapping_rem(b.value()))
        }
        BinOp::And => ConstInt::from_bits(w, a.bits() & b.bits()),
        BinOp::Or => ConstInt::from_bits(w, a.bits() | b.bits()),
        BinOp::Xor => ConstInt::from_bits(w, a.bits() ^ b.bits()),
        // Shift amounts reduce modulo the width, as on common hardware;
        // keeps the semantics total and deterministic.
        BinOp::Shl => ConstInt::from_bits(w, a.bits() << shift_amount(w, b)),
        BinOp::LShr => ConstInt::from_bits(w, a.bits() >> shift_amount(w, b)),
        BinOp::AShr => {
            let sh = shift_amount(w, b);
            ConstInt::new(w, a.value() >> sh)
        }
    };
    Ok(out)
}

fn shift_amount(width: u32, b: ConstInt) -> u32 {
    (b.bits() % width as u64) as u32
}

fn min_signed(width: u32) -> i64 {
    match width {
        64 => i64::MIN,
        w => -(1i64 << (w - 1)),
    }
}

fn apply_icmp(pred: IcmpPred, a: &RuntimeValue, b: &RuntimeValue) -> Result<bool, TrapReason> {
    match (a, b) {
        (RuntimeValue::Int(x), RuntimeValue::Int(y)) => Ok(icmp_ints(pred, *x, *y)),
        (
            RuntimeValue::Ptr { alloc: aa, offset: ao },
            RuntimeValue::Ptr { alloc: ba, offset: bo },
        ) => {
            if aa != ba {
                return Err(TrapReason::CrossAllocationCompare);
            }
            let (x, y) = (*ao, *bo);
            Ok(match pred {
                IcmpPred::Eq => x == y,
                IcmpPred::Ne => x != y,
                IcmpPred::Slt | IcmpPred::Ult => x < y,
                IcmpPred::Sle | IcmpPred::Ule => x <= y,
                IcmpPred::Sgt | IcmpPred::Ugt => x > y,
                IcmpPred::Sge | IcmpPred::Uge => x >= y,
            })
        }
        _ => Err(TrapReason::InvalidPointer),
    }
}

fn icmp_ints(pred: IcmpPred, a: ConstInt, b: ConstInt) -> bool {
    match pred {
        IcmpPred::Eq => a.bits() == b.bits(),
        IcmpPred::Ne => a.bits() != b.bits(),
        IcmpPred::Slt => a.value() < b.value(),
        IcmpPred::Sle => a.value() <= b.value(),
        IcmpPred::Sgt => a.value() > b.value(),
        IcmpPred::Sge => a.value() >= b.value(),
        IcmpPred::Ult => a.bits() < b.bits(),
        IcmpPred::Ule => a.bits() <= b.bits(),
        IcmpPred::Ugt => a.bits() > b.bits(),
        IcmpPred::Uge => a.bits() >= b.bits(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_module;

    fn run(src: &str, name: &str, args: &[i64]) -> ExecResult {
        let m = parse_module(src).unwrap();
        let f = m.function(name).unwrap();
        let argv: Vec<ArgValue> = args
            .iter()
            .zip(&f.params)
            .map(|(v, p)| match p.ty {
                IrType::Int(w) => ArgValue::Int(ConstInt::new(w, *v)),
                _ => panic!("int args only in this helper"),
            })
            .collect();
        run_function(&m, name, &argv, DEFAULT_FUEL, &ExternPolicy::default()).unwrap()
    }

    const CALC: &str =
        "define i32 @calculate(i32 %a, i32 %b) {\nentry:\n  %sum = add i32 %a, %b\n  ret i32 %sum\n}\n";

    #[test]
    fn calculate_5_3_returns_8_in_2_steps() {
        let r = run(CALC, "calculate", &[5, 3]);
        assert_eq!(
            r.outcome,
            Outcome::Returned(Some(RuntimeValue::Int(ConstInt::new(32, 8))))
        );
        assert_eq!(r.steps, 2);
        assert_eq!(r.block_hits.get("entry"), Some(&1));
    }

    #[test]
    fn add_wraps_two_complement() {
        let r = run(
            "define i32 @f() {\nentry:\n  %x = add i32 2147483647, 1\n  ret i32 %x\n}\n",
            "f",
            &[],
        );
        assert_eq!(
            r.outcome,
            Outcome::Returned(Some(RuntimeValue::Int(ConstInt::new(32, -2147483648))))
        );
    }

    #[test]
    fn sdiv_by_zero_traps() {
        let r = run(
            "define i32 @f() {\nentry:\n  %x = sdiv i32 1, 0\n  ret i32 %x\n}\n",
            "f",
            &[],
        );
        assert_eq!(r.outcome, Outcome::Trapped(TrapReason::DivByZero));
    }

    #[test]
    fn int_min_sdiv_minus_one_traps() {
        let r = run(
            "define i32 @f() {\nentry:\n  %x = sdiv i32 -2147483648, -1\n  ret i32 %x\n}\n",
            "f",
            &[],
        );
        assert_eq!(r.outcome, Outcome::Trapped(TrapReason::SignedOverflow));
    }

    #[test]
    fn infinite_loop_exhausts_fuel_exactly() {
        let m = parse_module("define void @spin() {\nentry:\n  br label %loop\nloop:\n  br label %loop\n}\n").unwrap();
        let r = run_function(&m, "spin", &[], 1000, &ExternPolicy::default()).unwrap();
        assert_eq!(r.outcome, Outcome::OutOfFuel);
        assert_eq!(r.steps, 1000);
        let total: u64 = r.block_hits.values().sum();
        assert!(total <= r.steps);
    }

    #[test]
    fn fuel_monotonicity() {
        let src = "define i32 @f(i32 %n) {\nentry:\n  br label %head\nhead:\n  %i = phi i32 [ %n, %entry ], [ %d, %body ]\n  %c = icmp sgt i32 %i, 0\n  br i1 %c, label %body, label %done\nbody:\n  %d = sub i32 %i, 1\n  br label %head\ndone:\n  ret i32 %i\n}\n";
        let a = run(src, "f", &[10]);
        let m = parse_module(src).unwrap();
        let args = [ArgValue::Int(ConstInt::new(32, 10))];
        let b = run_function(&m, "f", &args, a.steps, &ExternPolicy::default()).unwrap();
        let c = run_function(&m, "f", &args, a.steps + 500, &ExternPolicy::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn printf_records_rendered_event() {
        let src = r#"define i32 @main() {
entry:
  %s = alloca [12 x i8]
  store [12 x i8] c"Result: %d\0A\00", ptr %s
  call i32 (ptr, ...) @printf(ptr %s, i32 8)
  ret i32 0
}

declare i32 @printf(ptr, ...)
"#;
        let r = run(src, "main", &[]);
        assert_eq!(r.events.len(), 1);
        assert_eq!(r.events[0].callee, "printf");
        assert_eq!(
            r.events[0].args,
            vec![
                EventArg::Str("Result: %d\n".into()),
                EventArg::Int(ConstInt::new(32, 8))
            ]
        );
    }

    #[test]
    fn memory_oob_traps() {
        let src = "define i8 @f() {\nentry:\n  %buf = alloca [4 x i8]\n  %p = getelementptr [4 x i8], ptr %buf, i64 0, i64 9\n  %v = load i8, ptr %p\n  ret i8 %v\n}\n";
        let r = run(src, "f", &[]);
        assert_eq!(r.outcome, Outcome::Trapped(TrapReason::OobAccess));
    }

    #[test]
    fn gep_and_array_store_load() {
        let src = "define i8 @f() {\nentry:\n  %buf = alloca [4 x i8]\n  %p2 = getelementptr [4 x i8], ptr %buf, i64 0, i64 2\n  store i8 77, ptr %p2\n  %v = load i8, ptr %p2\n  ret i8 %v\n}\n";
        let r = run(src, "f", &[]);
        assert_eq!(
            r.outcome,
            Outcome::Returned(Some(RuntimeValue::Int(ConstInt::new(8, 77))))
        );
    }

    #[test]
    fn pointer_round_trip_through_memory() {
        let src = "define i8 @f() {\nentry:\n  %buf = alloca [2 x i8]\n  store i8 9, ptr %buf\n  %cell = alloca ptr\n  store ptr %buf, ptr %cell\n  %q = load ptr, ptr %cell\n  %v = load i8, ptr %q\n  ret i8 %v\n}\n";
        let r = run(src, "f", &[]);
        assert_eq!(
            r.outcome,
            Outcome::Returned(Some(RuntimeValue::Int(ConstInt::new(8, 9))))
        );
    }

    #[test]
    fn recursion_works_and_depth_is_bounded() {
        let src = "define i32 @fact(i32 %n) {\nentry:\n  %c = icmp sle i32 %n, 1\n  br i1 %c, label %base, label %rec\nbase:\n  ret i32 1\nrec:\n  %n1 = sub i32 %n, 1\n  %r = call i32 @fact(i32 %n1)\n  %out = mul i32 %n, %r\n  ret i32 %out\n}\n";
        let r = run(src, "fact", &[10]);
        assert_eq!(
            r.outcome,
            Outcome::Returned(Some(RuntimeValue::Int(ConstInt::new(32, 3628800))))
        );
        let deep = run(src, "fact", &[100000]);
        assert_eq!(deep.outcome, Outcome::Trapped(TrapReason::CallDepthExceeded));
    }

    #[test]
    fn cross_allocation_compare_traps() {
        let src = "define i1 @f() {\nentry:\n  %a = alloca i32\n  %b = alloca i32\n  %c = icmp eq ptr %a, %b\n  ret i1 %c\n}\n";
        let r = run(src, "f", &[]);
        assert_eq!(r.outcome, Outcome::Trapped(TrapReason::CrossAllocationCompare));
    }

    #[test]
    fn determinism_across_runs() {
        let src = r#"@g = global i32 11

define i32 @f(i32 %x) {
entry:
  %v = load i32, ptr @g
  %s = add i32 %v, %x
  store i32 %s, ptr @g
  %again = load i32, ptr @g
  ret i32 %again
}
"#;
        let a = run(src, "f", &[5]);
        let b = run(src, "f", &[5]);
        assert_eq!(a, b);
        assert_eq!(
            a.outcome,
            Outcome::Returned(Some(RuntimeValue::Int(ConstInt::new(32, 16))))
        );
    }
}
