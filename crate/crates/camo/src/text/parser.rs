//! Recursive-descent parser for the `.ll` subset.

use super::lexer::{lex, Tok, Token};
use super::{ParseError, ParseErrorKind, SourceSpan};
use crate::ir::validate::validate;
use crate::ir::*;

/// Parses textual IR into a validated module.
///
/// Clang-style annotations the passes do not need (alignment, metadata,
/// attribute groups, parameter attributes, linkage keywords) are accepted and
/// discarded. Valid LLVM constructs outside the subset are rejected with
/// [`ParseErrorKind::Unsupported`], naming the construct. A module that
/// parses but breaks an IR invariant is rejected with
/// [`ParseErrorKind::Invalid`].
pub fn parse_module(text: &str) -> Result<IrModule, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let module = p.module()?;
    let violations = validate(&module);
    if let Some(first) = violations.first() {
        return Err(ParseError {
            span: SourceSpan {
                line: 1,
                column: 1,
                length: 0,
            },
            message: format!(
                "module failed validation ({} violation{}): {first}",
                violations.len(),
                if violations.len() == 1 { "" } else { "s" }
            ),
            expected: None,
            kind: ParseErrorKind::Invalid,
        });
    }
    Ok(module)
}

/// Linkage/visibility keywords accepted and dropped in front of globals and
/// functions.
const LINKAGE_WORDS: &[&str] = &[
    "private",
    "internal",
    "external",
    "weak",
    "weak_odr",
    "linkonce",
    "linkonce_odr",
    "common",
    "appending",
    "hidden",
    "protected",
    "default",
    "dso_local",
    "dso_preemptable",
    "unnamed_addr",
    "local_unnamed_addr",
    "externally_initialized",
    "thread_local",
];

/// Parameter attributes accepted and dropped.
const PARAM_ATTR_WORDS: &[&str] = &[
    "noundef", "nonnull", "nocapture", "noalias", "readonly", "readnone", "writeonly", "signext",
    "zeroext", "inreg", "returned", "nofree", "captures",
];

/// Parameter attributes carrying a parenthesized argument, also dropped.
const PARAM_ATTR_PARENS: &[&str] = &["dereferenceable", "dereferenceable_or_null", "byval", "sret", "byref", "align"];

/// Trailing per-instruction attributes accepted and dropped.
const TRAILING_ATTR_WORDS: &[&str] = &[
    "nounwind",
    "willreturn",
    "memory",
    "norecurse",
    "nosync",
    "nuw",
    "nsw",
];

/// Instruction keywords that are valid LLVM but outside the subset.
const UNSUPPORTED_OPS: &[&str] = &[
    "fneg", "fadd", "fsub", "fmul", "fdiv", "frem", "fcmp", "fptoui", "fptosi", "uitofp", "sitofp",
    "fptrunc", "fpext", "ptrtoint", "inttoptr", "bitcast", "addrspacecast", "extractelement",
    "insertelement", "shufflevector", "extractvalue", "insertvalue", "atomicrmw", "cmpxchg",
    "fence", "invoke", "callbr", "resume", "catchswitch", "catchret", "cleanupret", "landingpad",
    "va_arg", "freeze", "indirectbr",
];

/// Type keywords that are valid LLVM but outside the subset.
const UNSUPPORTED_TYPES: &[&str] = &["float", "double", "half", "bfloat", "fp128", "x86_fp80", "ppc_fp128", "x86_amx", "x86_mmx", "token", "metadata", "label"];

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + offset).map(|t| &t.tok)
    }

    fn span(&self) -> SourceSpan {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map(|t| t.span)
            .unwrap_or(SourceSpan {
                line: 1,
                column: 1,
                length: 0,
            })
    }

    /// Span just past the previous token, for end-of-input diagnostics.
    fn span_after_prev(&self) -> SourceSpan {
        match self.tokens.get(self.pos.wrapping_sub(1)) {
            Some(t) => SourceSpan {
                line: t.span.line,
                column: t.span.column + t.span.length.max(1),
                length: 1,
            },
            None => SourceSpan {
                line: 1,
                column: 1,
                length: 0,
            },
        }
    }

    fn line(&self) -> u32 {
        self.tokens
            .get(self.pos)
            .map(|t| t.span.line)
            .unwrap_or(u32::MAX)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>, expected: Option<&str>) -> ParseError {
        let span = if self.pos < self.tokens.len() {
            self.span()
        } else {
            self.span_after_prev()
        };
        ParseError {
            span,
            message: message.into(),
            expected: expected.map(str::to_string),
            kind: ParseErrorKind::Syntax,
        }
    }

    fn unsupported(&self, construct: impl Into<String>) -> ParseError {
        ParseError {
            span: self.span(),
            message: String::new(),
            expected: None,
            kind: ParseErrorKind::Unsupported {
                construct: construct.into(),
            },
        }
    }

    fn describe(&self) -> String {
        match self.peek() {
            None => "end of input".into(),
            Some(Tok::Word(w)) => format!("'{w}'"),
            Some(Tok::Local(n)) => format!("'%{n}'"),
            Some(Tok::Global(n)) => format!("'@{n}'"),
            Some(Tok::Int(n)) => format!("'{n}'"),
            Some(Tok::Str(_)) => "string".into(),
            Some(Tok::CStr(_)) => "byte string".into(),
            Some(Tok::Metadata(m)) => format!("'!{m}'"),
            Some(Tok::AttrGroup(n)) => format!("'#{n}'"),
            Some(t) => format!("'{}'", punct(t)),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("found {}", self.describe()), Some(what)))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        match self.peek() {
            Some(Tok::Word(x)) if x == w => {
                self.pos += 1;
                true
            }
            _ => false,
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<(), ParseError> {
        if self.eat_word(w) {
            Ok(())
        } else {
            Err(self.error(format!("found {}", self.describe()), Some(&format!("'{w}'"))))
        }
    }

    fn skip_rest_of_line(&mut self) {
        let line = match self.tokens.get(self.pos.saturating_sub(1)) {
            Some(t) => t.span.line,
            None => return,
        };
        while self.pos < self.tokens.len() && self.tokens[self.pos].span.line == line {
            self.pos += 1;
        }
    }

    fn skip_linkage_words(&mut self) {
        loop {
            match self.peek() {
                Some(Tok::Word(w)) if LINKAGE_WORDS.contains(&w.as_str()) => {
                    self.pos += 1;
                }
                _ => break,
            }
        }
    }

    fn skip_param_attrs(&mut self) -> Result<(), ParseError> {
        loop {
            match self.peek() {
                Some(Tok::Word(w)) if PARAM_ATTR_WORDS.contains(&w.as_str()) => {
                    self.pos += 1;
                }
                Some(Tok::Word(w)) if PARAM_ATTR_PARENS.contains(&w.as_str()) => {
                    let w = w.clone();
                    self.pos += 1;
                    if w == "align" {
                        // `align 4` or `align(4)`
                        if self.eat(&Tok::LParen) {
                            self.skip_balanced(Tok::LParen, Tok::RParen, 1)?;
                        } else if matches!(self.peek(), Some(Tok::Int(_))) {
                            self.pos += 1;
                        }
                    } else if self.eat(&Tok::LParen) {
                        self.skip_balanced(Tok::LParen, Tok::RParen, 1)?;
                    }
                }
                _ => break,
            }
        }
        Ok(())
    }

    /// Consumes until `open`/`close` nesting returns to zero. `depth` is the
    /// nesting already consumed.
    fn skip_balanced(&mut self, open: Tok, close: Tok, mut depth: u32) -> Result<(), ParseError> {
        while depth > 0 {
            match self.next() {
                None => return Err(self.error("unbalanced delimiters", None)),
                Some(t) if t == open => depth += 1,
                Some(t) if t == close => depth -= 1,
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Drops trailing annotations after an instruction: `, align N`,
    /// `, !dbg !7`, `#0`, bare attribute words. Constrained to `line`.
    fn skip_trailing_annotations(&mut self, line: u32) {
        while self.pos < self.tokens.len() && self.tokens[self.pos].span.line == line {
            match self.peek() {
                Some(Tok::AttrGroup(_)) | Some(Tok::Metadata(_)) => {
                    self.pos += 1;
                }
                Some(Tok::Word(w)) if TRAILING_ATTR_WORDS.contains(&w.as_str()) => {
                    self.pos += 1;
                }
                Some(Tok::Comma) => {
                    let after = self.peek_at(1);
                    let is_annot = matches!(after, Some(Tok::Metadata(_)))
                        || matches!(after, Some(Tok::Word(w)) if w == "align");
                    if !is_annot {
                        break;
                    }
                    self.pos += 1; // comma
                    if self.eat_word("align") {
                        if matches!(self.peek(), Some(Tok::Int(_))) {
                            self.pos += 1;
                        }
                    } else {
                        // `!dbg !7` style pair
                        self.pos += 1;
                        if matches!(self.peek(), Some(Tok::Metadata(_))) {
                            self.pos += 1;
                        }
                    }
                }
                _ => break,
            }
        }
    }

    // ---- types ----------------------------------------------------------

    fn parse_type(&mut self) -> Result<IrType, ParseError> {
        let base = self.parse_type_base()?;
        if matches!(self.peek(), Some(Tok::Star)) {
            return Err(self.unsupported("typed pointer (use opaque 'ptr')"));
        }
        Ok(base)
    }

    fn parse_type_base(&mut self) -> Result<IrType, ParseError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                if w == "void" {
                    self.pos += 1;
                    return Ok(IrType::Void);
                }
                if w == "ptr" {
                    self.pos += 1;
                    return Ok(IrType::Ptr);
                }
                if UNSUPPORTED_TYPES.contains(&w.as_str()) {
                    return Err(self.unsupported(format!("type '{w}'")));
                }
                if let Some(width) = w.strip_prefix('i').and_then(|d| d.parse::<u32>().ok()) {
                    if !ALLOWED_WIDTHS.contains(&width) {
                        return Err(self.unsupported(format!("integer width 'i{width}'")));
                    }
                    self.pos += 1;
                    return Ok(IrType::Int(width));
                }
                Err(self.error(format!("found {}", self.describe()), Some("a type")))
            }
            Some(Tok::LBracket) => {
                self.pos += 1;
                let len = match self.next() {
                    Some(Tok::Int(n)) if n >= 0 => n as u64,
                    _ => return Err(self.error("bad array length", Some("a non-negative integer"))),
                };
                self.expect_word("x")?;
                let elem = self.parse_type()?;
                self.expect(Tok::RBracket, "']'")?;
                Ok(IrType::array(len, elem))
            }
            Some(Tok::LAngle) => Err(self.unsupported("vector type")),
            Some(Tok::LBrace) => Err(self.unsupported("struct type")),
            Some(Tok::Local(n)) => Err(self.unsupported(format!("named type '%{n}'"))),
            _ => Err(self.error(format!("found {}", self.describe()), Some("a type"))),
        }
    }

    // ---- values ----------------------------------------------------------

    fn parse_value(&mut self, ty: &IrType) -> Result<Value, ParseError> {
        match self.peek() {
            Some(Tok::Local(n)) => {
                let v = Value::Local(n.clone());
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Global(n)) => {
                let v = Value::Global(n.clone());
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Int(n)) => {
                let IrType::Int(w) = ty else {
                    return Err(self.error(
                        format!("integer constant where a value of type '{ty}' is required"),
                        None,
                    ));
                };
                let c = ConstInt::from_bits(*w, *n as u64);
                self.pos += 1;
                Ok(Value::Const(c))
            }
            Some(Tok::Word(w)) if w == "true" || w == "false" => {
                if *ty != IrType::Int(1) {
                    return Err(self.error(
                        format!("boolean constant where a value of type '{ty}' is required"),
                        None,
                    ));
                }
                let v = Value::Const(ConstInt::bool_const(w == "true"));
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Word(w)) if w == "undef" => {
                self.pos += 1;
                Ok(Value::Undef(ty.clone()))
            }
            Some(Tok::CStr(bytes)) => {
                let v = Value::Bytes(bytes.clone());
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Word(w)) if w == "null" || w == "poison" || w == "blockaddress" || w == "zeroinitializer" => {
                Err(self.unsupported(format!("'{w}' constant in operand position")))
            }
            _ => Err(self.error(format!("found {}", self.describe()), Some("a value"))),
        }
    }

    // ---- module items ----------------------------------------------------

    fn module(&mut self) -> Result<IrModule, ParseError> {
        let mut m = IrModule::default();
        loop {
            match self.peek() {
                None => break,
                Some(Tok::Word(w)) if w == "source_filename" || w == "target" => {
                    self.pos += 1;
                    self.skip_rest_of_line();
                }
                Some(Tok::Word(w)) if w == "attributes" => {
                    self.pos += 1;
                    match self.next() {
                        Some(Tok::AttrGroup(_)) => {}
                        _ => return Err(self.error("malformed attributes group", Some("'#N'"))),
                    }
                    self.expect(Tok::Equals, "'='")?;
                    self.expect(Tok::LBrace, "'{'")?;
                    self.skip_balanced(Tok::LBrace, Tok::RBrace, 1)?;
                }
                Some(Tok::Metadata(_)) => {
                    self.pos += 1;
                    self.skip_rest_of_line();
                }
                Some(Tok::Word(w)) if w == "declare" => {
                    self.pos += 1;
                    let f = self.declaration()?;
                    m.functions.push(f);
                }
                Some(Tok::Word(w)) if w == "define" => {
                    self.pos += 1;
                    let f = self.definition()?;
                    m.functions.push(f);
                }
                Some(Tok::Global(_)) => {
                    let g = self.global_var()?;
                    m.globals.push(g);
                }
                Some(Tok::Local(n)) => {
                    return Err(self.unsupported(format!("module-level named type '%{n}'")));
                }
                _ => {
                    return Err(self.error(
                        format!("found {} at module level", self.describe()),
                        Some("'define', 'declare' or a global"),
                    ))
                }
            }
        }
        Ok(m)
    }

    fn global_var(&mut self) -> Result<GlobalVar, ParseError> {
        let name = match self.next() {
            Some(Tok::Global(n)) => n,
            _ => unreachable!("caller checked"),
        };
        self.expect(Tok::Equals, "'='")?;
        self.skip_linkage_words();
        if !self.eat_word("global") && !self.eat_word("constant") {
            return Err(self.error(format!("found {}", self.describe()), Some("'global' or 'constant'")));
        }
        let ty = self.parse_type()?;
        let init = match self.peek() {
            Some(Tok::Int(n)) => {
                let IrType::Int(w) = &ty else {
                    return Err(self.error("integer initializer on a non-integer global", None));
                };
                let c = ConstInt::from_bits(*w, *n as u64);
                self.pos += 1;
                GlobalInit::Int(c)
            }
            Some(Tok::Word(w)) if w == "true" || w == "false" => {
                let v = w == "true";
                self.pos += 1;
                GlobalInit::Int(ConstInt::bool_const(v))
            }
            Some(Tok::CStr(bytes)) => {
                let b = bytes.clone();
                self.pos += 1;
                GlobalInit::Bytes(b)
            }
            Some(Tok::Word(w)) if w == "zeroinitializer" => {
                self.pos += 1;
                GlobalInit::Zero
            }
            _ => {
                return Err(self.error(
                    format!("found {}", self.describe()),
                    Some("an integer, 'c\"...\"' or 'zeroinitializer' initializer"),
                ))
            }
        };
        // `, align 4` and friends.
        let line = self.tokens.get(self.pos.saturating_sub(1)).map(|t| t.span.line).unwrap_or(0);
        self.skip_trailing_annotations(line);
        Ok(GlobalVar { name, ty, init })
    }

    fn declaration(&mut self) -> Result<IrFunction, ParseError> {
        self.skip_linkage_words();
        let ret = self.parse_type()?;
        let name = match self.next() {
            Some(Tok::Global(n)) => n,
            _ => return Err(self.error(format!("found {}", self.describe()), Some("'@name'"))),
        };
        self.expect(Tok::LParen, "'('")?;
        let mut params = Vec::new();
        let mut variadic = false;
        if !self.eat(&Tok::RParen) {
            loop {
                if self.eat(&Tok::Ellipsis) {
                    variadic = true;
                    self.expect(Tok::RParen, "')'")?;
                    break;
                }
                let ty = self.parse_type()?;
                self.skip_param_attrs()?;
                // Parameter names in declarations are allowed and ignored.
                if matches!(self.peek(), Some(Tok::Local(_))) {
                    self.pos += 1;
                }
                params.push(Param {
                    name: String::new(),
                    ty,
                });
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma, "','")?;
            }
        }
        self.skip_rest_of_line();
        Ok(IrFunction {
            name,
            ret,
            params,
            variadic,
            blocks: vec![],
            is_declaration: true,
        })
    }

    fn definition(&mut self) -> Result<IrFunction, ParseError> {
        self.skip_linkage_words();
        let ret = self.parse_type()?;
        let name = match self.next() {
            Some(Tok::Global(n)) => n,
            _ => return Err(self.error(format!("found {}", self.describe()), Some("'@name'"))),
        };
        self.expect(Tok::LParen, "'('")?;
        let mut params = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                if matches!(self.peek(), Some(Tok::Ellipsis)) {
                    return Err(self.unsupported("variadic function definition"));
                }
                let ty = self.parse_type()?;
                self.skip_param_attrs()?;
                let pname = match self.peek() {
                    Some(Tok::Local(n)) => {
                        let n = n.clone();
                        self.pos += 1;
                        n
                    }
                    // Unnamed parameters take their position as a name.
                    _ => params.len().to_string(),
                };
                params.push(Param { name: pname, ty });
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma, "','")?;
            }
        }
        // Function attributes, personality, section strings... up to the body.
        loop {
            match self.peek() {
                Some(Tok::LBrace) => {
                    self.pos += 1;
                    break;
                }
                Some(Tok::Word(_)) | Some(Tok::Str(_)) | Some(Tok::AttrGroup(_))
                | Some(Tok::Equals) | Some(Tok::Int(_)) | Some(Tok::Metadata(_)) => {
                    self.pos += 1;
                }
                _ => return Err(self.error(format!("found {}", self.describe()), Some("'{'"))),
            }
        }

        let blocks = self.function_body()?;
        Ok(IrFunction {
            name,
            ret,
            params,
            variadic: false,
            blocks,
            is_declaration: false,
        })
    }

    fn function_body(&mut self) -> Result<Vec<BasicBlock>, ParseError> {
        let mut blocks: Vec<BasicBlock> = Vec::new();
        let mut label: Option<String> = None;
        let mut phis: Vec<Phi> = Vec::new();
        let mut body: Vec<Instruction> = Vec::new();
        let mut saw_any = false;

        loop {
            // Block label?
            if let Some(l) = self.try_block_label()? {
                if saw_any {
                    return Err(self.error(
                        format!("block '{}' has no terminator", label.as_deref().unwrap_or("entry")),
                        Some("a terminator before the next label"),
                    ));
                }
                label = Some(l);
                continue;
            }
            if self.eat(&Tok::RBrace) {
                if saw_any {
                    return Err(self.error("last block has no terminator", None));
                }
                return Ok(blocks);
            }
            if self.peek().is_none() {
                return Err(self.error("unterminated function body", Some("'}'")));
            }

            saw_any = true;
            match self.statement()? {
                Stmt::Phi(phi) => {
                    if !body.is_empty() {
                        return Err(self.error("phi after a non-phi instruction", None));
                    }
                    phis.push(phi);
                }
                Stmt::Inst(inst) => body.push(inst),
                Stmt::Term(term) => {
                    let lbl = label.take().unwrap_or_else(|| {
                        if blocks.is_empty() {
                            "entry".to_string()
                        } else {
                            // Unlabeled non-entry blocks are not produced by
                            // the printer; give them a positional name.
                            blocks.len().to_string()
                        }
                    });
                    blocks.push(BasicBlock {
                        label: lbl,
                        phis: std::mem::take(&mut phis),
                        body: std::mem::take(&mut body),
                        term,
                    });
                    saw_any = false;
                }
            }
        }
    }

    fn try_block_label(&mut self) -> Result<Option<String>, ParseError> {
        let name = match (self.peek(), self.peek_at(1)) {
            (Some(Tok::Word(w)), Some(Tok::Colon)) => w.clone(),
            (Some(Tok::Int(n)), Some(Tok::Colon)) => n.to_string(),
            (Some(Tok::Str(s)), Some(Tok::Colon)) => s.clone(),
            _ => return Ok(None),
        };
        self.pos += 2;
        Ok(Some(name))
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        let line = self.line();
        // `%r = op ...`
        if let (Some(Tok::Local(result)), Some(Tok::Equals)) = (self.peek(), self.peek_at(1)) {
            let result = result.clone();
            self.pos += 2;
            let stmt = self.rhs_statement(Some(result))?;
            self.skip_trailing_annotations(line);
            return Ok(stmt);
        }
        let stmt = self.rhs_statement(None)?;
        self.skip_trailing_annotations(line);
        Ok(stmt)
    }

    fn rhs_statement(&mut self, result: Option<String>) -> Result<Stmt, ParseError> {
        let word = match self.peek() {
            Some(Tok::Word(w)) => w.clone(),
            _ => {
                return Err(self.error(
                    format!("found {}", self.describe()),
                    Some("an instruction"),
                ))
            }
        };
        if UNSUPPORTED_OPS.contains(&word.as_str()) {
            return Err(self.unsupported(format!("instruction '{word}'")));
        }

        let named = |r: Option<String>, p: &Self| -> Result<String, ParseError> {
            r.ok_or_else(|| p.error(format!("'{word}' requires a result name"), Some("'%name ='")))
        };

        match word.as_str() {
            "add" | "sub" | "mul" | "sdiv" | "udiv" | "srem" | "urem" | "and" | "or" | "xor"
            | "shl" | "lshr" | "ashr" => {
                self.pos += 1;
                let op = bin_op_of(&word);
                // nuw/nsw/exact wrapping flags are dropped.
                while self.eat_word("nuw") || self.eat_word("nsw") || self.eat_word("exact") {}
                let ty = self.parse_type()?;
                let lhs = self.parse_value(&ty)?;
                self.expect(Tok::Comma, "','")?;
                let rhs = self.parse_value(&ty)?;
                Ok(Stmt::Inst(Instruction::Binary {
                    result: named(result, self)?,
                    op,
                    ty,
                    lhs,
                    rhs,
                }))
            }
            "icmp" => {
                self.pos += 1;
                let pred = match self.next() {
                    Some(Tok::Word(p)) => icmp_pred_of(&p)
                        .ok_or_else(|| self.error(format!("unknown icmp predicate '{p}'"), None))?,
                    _ => return Err(self.error("missing icmp predicate", Some("a predicate"))),
                };
                let ty = self.parse_type()?;
                let lhs = self.parse_value(&ty)?;
                self.expect(Tok::Comma, "','")?;
                let rhs = self.parse_value(&ty)?;
                Ok(Stmt::Inst(Instruction::Icmp {
                    result: named(result, self)?,
                    pred,
                    ty,
                    lhs,
                    rhs,
                }))
            }
            "zext" | "sext" | "trunc" => {
                self.pos += 1;
                let op = match word.as_str() {
                    "zext" => CastOp::Zext,
                    "sext" => CastOp::Sext,
                    _ => CastOp::Trunc,
                };
                let from = self.parse_type()?;
                let value = self.parse_value(&from)?;
                self.expect_word("to")?;
                let to = self.parse_type()?;
                Ok(Stmt::Inst(Instruction::Cast {
                    result: named(result, self)?,
                    op,
                    from,
                    value,
                    to,
                }))
            }
            "alloca" => {
                self.pos += 1;
                let allocated = self.parse_type()?;
                Ok(Stmt::Inst(Instruction::Alloca {
                    result: named(result, self)?,
                    allocated,
                }))
            }
            "load" => {
                self.pos += 1;
                if self.eat_word("volatile") || self.eat_word("atomic") {
                    return Err(self.unsupported("volatile/atomic load"));
                }
                let ty = self.parse_type()?;
                self.expect(Tok::Comma, "','")?;
                let pty = self.parse_type()?;
                if pty != IrType::Ptr {
                    return Err(self.error(format!("load address must be 'ptr', found '{pty}'"), None));
                }
                let ptr = self.parse_value(&pty)?;
                Ok(Stmt::Inst(Instruction::Load {
                    result: named(result, self)?,
                    ty,
                    ptr,
                }))
            }
            "store" => {
                self.pos += 1;
                if result.is_some() {
                    return Err(self.error("store does not produce a result", None));
                }
                if self.eat_word("volatile") || self.eat_word("atomic") {
                    return Err(self.unsupported("volatile/atomic store"));
                }
                let ty = self.parse_type()?;
                let value = self.parse_value(&ty)?;
                self.expect(Tok::Comma, "','")?;
                let pty = self.parse_type()?;
                if pty != IrType::Ptr {
                    return Err(self.error(format!("store address must be 'ptr', found '{pty}'"), None));
                }
                let ptr = self.parse_value(&pty)?;
                Ok(Stmt::Inst(Instruction::Store { ty, value, ptr }))
            }
            "getelementptr" => {
                self.pos += 1;
                while self.eat_word("inbounds") || self.eat_word("nuw") || self.eat_word("nusw") {}
                let base = self.parse_type()?;
                self.expect(Tok::Comma, "','")?;
                let pty = self.parse_type()?;
                if pty != IrType::Ptr {
                    return Err(self.error(
                        format!("getelementptr base must be 'ptr', found '{pty}'"),
                        None,
                    ));
                }
                let ptr = self.parse_value(&pty)?;
                let mut indices = Vec::new();
                while self.eat(&Tok::Comma) {
                    let ity = self.parse_type()?;
                    let iv = self.parse_value(&ity)?;
                    indices.push((ity, iv));
                }
                if indices.is_empty() {
                    return Err(self.error("getelementptr requires at least one index", None));
                }
                Ok(Stmt::Inst(Instruction::Gep {
                    result: named(result, self)?,
                    base,
                    ptr,
                    indices,
                }))
            }
            "tail" | "musttail" | "notail" => {
                self.pos += 1;
                self.rhs_statement(result)
            }
            "call" => {
                self.pos += 1;
                let ret = self.parse_type()?;
                // Optional full function type for variadic callees.
                let sig = if self.eat(&Tok::LParen) {
                    let mut ptys = Vec::new();
                    let mut variadic = false;
                    if !self.eat(&Tok::RParen) {
                        loop {
                            if self.eat(&Tok::Ellipsis) {
                                variadic = true;
                                self.expect(Tok::RParen, "')'")?;
                                break;
                            }
                            ptys.push(self.parse_type()?);
                            if self.eat(&Tok::RParen) {
                                break;
                            }
                            self.expect(Tok::Comma, "','")?;
                        }
                    }
                    Some(FuncSig {
                        ret: ret.clone(),
                        params: ptys,
                        variadic,
                    })
                } else {
                    None
                };
                let callee = match self.next() {
                    Some(Tok::Global(n)) => n,
                    Some(Tok::Local(n)) => {
                        return Err(self.unsupported(format!("indirect call through '%{n}'")))
                    }
                    _ => return Err(self.error(format!("found {}", self.describe()), Some("'@callee'"))),
                };
                self.expect(Tok::LParen, "'('")?;
                let mut args = Vec::new();
                if !self.eat(&Tok::RParen) {
                    loop {
                        let aty = self.parse_type()?;
                        self.skip_param_attrs()?;
                        let av = self.parse_value(&aty)?;
                        args.push((aty, av));
                        if self.eat(&Tok::RParen) {
                            break;
                        }
                        self.expect(Tok::Comma, "','")?;
                    }
                }
                Ok(Stmt::Inst(Instruction::Call {
                    result,
                    ret,
                    sig,
                    callee,
                    args,
                }))
            }
            "select" => {
                self.pos += 1;
                let cty = self.parse_type()?;
                if cty != IrType::Int(1) {
                    return Err(self.unsupported("vector select"));
                }
                let cond = self.parse_value(&cty)?;
                self.expect(Tok::Comma, "','")?;
                let ty = self.parse_type()?;
                let then_value = self.parse_value(&ty)?;
                self.expect(Tok::Comma, "','")?;
                let ty2 = self.parse_type()?;
                if ty2 != ty {
                    return Err(self.error("select arm types differ", None));
                }
                let else_value = self.parse_value(&ty)?;
                Ok(Stmt::Inst(Instruction::Select {
                    result: named(result, self)?,
                    ty,
                    cond,
                    then_value,
                    else_value,
                }))
            }
            "phi" => {
                self.pos += 1;
                let ty = self.parse_type()?;
                let mut incomings = Vec::new();
                loop {
                    self.expect(Tok::LBracket, "'['")?;
                    let v = self.parse_value(&ty)?;
                    self.expect(Tok::Comma, "','")?;
                    let label = match self.next() {
                        Some(Tok::Local(l)) => l,
                        _ => return Err(self.error(format!("found {}", self.describe()), Some("'%label'"))),
                    };
                    self.expect(Tok::RBracket, "']'")?;
                    incomings.push((v, label));
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                Ok(Stmt::Phi(Phi {
                    result: named(result, self)?,
                    ty,
                    incomings,
                }))
            }
            "ret" => {
                self.pos += 1;
                if result.is_some() {
                    return Err(self.error("ret does not produce a result", None));
                }
                let ty = self.parse_type()?;
                if ty == IrType::Void {
                    Ok(Stmt::Term(Terminator::Ret(None)))
                } else {
                    let v = self.parse_value(&ty)?;
                    Ok(Stmt::Term(Terminator::Ret(Some((ty, v)))))
                }
            }
            "br" => {
                self.pos += 1;
                if result.is_some() {
                    return Err(self.error("br does not produce a result", None));
                }
                if self.eat_word("label") {
                    let label = match self.next() {
                        Some(Tok::Local(l)) => l,
                        _ => return Err(self.error(format!("found {}", self.describe()), Some("'%label'"))),
                    };
                    return Ok(Stmt::Term(Terminator::Br(label)));
                }
                let cty = self.parse_type()?;
                if cty != IrType::Int(1) {
                    return Err(self.error("br condition must be i1", None));
                }
                let cond = self.parse_value(&cty)?;
                self.expect(Tok::Comma, "','")?;
                self.expect_word("label")?;
                let then_label = match self.next() {
                    Some(Tok::Local(l)) => l,
                    _ => return Err(self.error(format!("found {}", self.describe()), Some("'%label'"))),
                };
                self.expect(Tok::Comma, "','")?;
                self.expect_word("label")?;
                let else_label = match self.next() {
                    Some(Tok::Local(l)) => l,
                    _ => return Err(self.error(format!("found {}", self.describe()), Some("'%label'"))),
                };
                Ok(Stmt::Term(Terminator::CondBr {
                    cond,
                    then_label,
                    else_label,
                }))
            }
            "switch" => {
                self.pos += 1;
                if result.is_some() {
                    return Err(self.error("switch does not produce a result", None));
                }
                let ty = self.parse_type()?;
                let value = self.parse_value(&ty)?;
                self.expect(Tok::Comma, "','")?;
                self.expect_word("label")?;
                let default = match self.next() {
                    Some(Tok::Local(l)) => l,
                    _ => return Err(self.error(format!("found {}", self.describe()), Some("'%label'"))),
                };
                self.expect(Tok::LBracket, "'['")?;
                let mut cases = Vec::new();
                while !self.eat(&Tok::RBracket) {
                    let cty = self.parse_type()?;
                    if cty != ty {
                        return Err(self.error("switch case type differs from scrutinee", None));
                    }
                    let cv = match self.parse_value(&cty)? {
                        Value::Const(c) => c,
                        _ => return Err(self.error("switch case must be an integer constant", None)),
                    };
                    self.expect(Tok::Comma, "','")?;
                    self.expect_word("label")?;
                    let label = match self.next() {
                        Some(Tok::Local(l)) => l,
                        _ => return Err(self.error(format!("found {}", self.describe()), Some("'%label'"))),
                    };
                    cases.push((cv, label));
                }
                Ok(Stmt::Term(Terminator::Switch {
                    ty,
                    value,
                    default,
                    cases,
                }))
            }
            "unreachable" => {
                self.pos += 1;
                if result.is_some() {
                    return Err(self.error("unreachable does not produce a result", None));
                }
                Ok(Stmt::Term(Terminator::Unreachable))
            }
            other => Err(self.error(format!("unknown instruction '{other}'"), None)),
        }
    }
}

enum Stmt {
    Phi(Phi),
    Inst(Instruction),
    Term(Terminator),
}

fn bin_op_of(w: &str) -> BinOp {
    match w {
        "add" => BinOp::Add,
        "sub" => BinOp::Sub,
        "mul" => BinOp::Mul,
        "sdiv" => BinOp::SDiv,
        "udiv" => BinOp::UDiv,
        "srem" => BinOp::SRem,
        "urem" => BinOp::URem,
        "and" => BinOp::And,
        "or" => BinOp::Or,
        "xor" => BinOp::Xor,
        "shl" => BinOp::Shl,
        "lshr" => BinOp::LShr,
        "ashr" => BinOp::AShr,
        _ => unreachable!("caller checked"),
    }
}

fn icmp_pred_of(w: &str) -> Option<IcmpPred> {
    Some(match w {
        "eq" => IcmpPred::Eq,
        "ne" => IcmpPred::Ne,
        "slt" => IcmpPred::Slt,
        "sle" => IcmpPred::Sle,
        "sgt" => IcmpPred::Sgt,
        "sge" => IcmpPred::Sge,
        "ult" => IcmpPred::Ult,
        "ule" => IcmpPred::Ule,
        "ugt" => IcmpPred::Ugt,
        "uge" => IcmpPred::Uge,
        _ => return None,
    })
}

fn punct(t: &Tok) -> &'static str {
    match t {
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::LBrace => "{",
        Tok::RBrace => "}",
        Tok::LBracket => "[",
        Tok::RBracket => "]",
        Tok::LAngle => "<",
        Tok::Star => "*",
        Tok::Comma => ",",
        Tok::Equals => "=",
        Tok::Colon => ":",
        Tok::Ellipsis => "...",
        _ => "?",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE2: &str = r#"; Function to add two integers
define i32 @calculate(i32 %a, i32 %b) {
entry:
  %sum = add i32 %a, %b
  ret i32 %sum
}

; Main function
define i32 @main() {
entry:
  %result = call i32 @calculate(i32 5, i32 3)
  %formatStr = alloca [12 x i8], align 1
  store [12 x i8] c"Result: %d\0A\00", ptr %formatStr
  call i32 (ptr, ...) @printf(ptr %formatStr, i32 %result)
  ret i32 0
}

declare i32 @printf(ptr, ...)
"#;

    #[test]
    fn parses_the_two_function_module() {
        let m = parse_module(TABLE2).unwrap();
        assert_eq!(
            m.functions.iter().map(|f| f.name.as_str()).collect::<Vec<_>>(),
            vec!["calculate", "main", "printf"]
        );
        assert!(m.function("printf").unwrap().is_declaration);
        assert!(m.function("printf").unwrap().variadic);
        let main = m.function("main").unwrap();
        assert_eq!(main.blocks.len(), 1);
        assert_eq!(main.blocks[0].body.len(), 4);
    }

    #[test]
    fn empty_input_is_an_empty_module() {
        let m = parse_module("").unwrap();
        assert!(m.globals.is_empty());
        assert!(m.functions.is_empty());
    }

    #[test]
    fn syntax_error_points_past_open_paren() {
        let err = parse_module("define i32 @f(").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Syntax);
        assert_eq!(err.span.line, 1);
        assert!(err.span.column > 14, "column {} should be past '('", err.span.column);
    }

    #[test]
    fn unsupported_constructs_are_named() {
        let err = parse_module(
            "define float @f() {\nentry:\n  ret float 0\n}\n",
        )
        .unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Unsupported { ref construct } if construct.contains("float")));

        let err = parse_module(
            "define i32 @f(i32 %x) {\nentry:\n  %p = inttoptr i32 %x to ptr\n  ret i32 0\n}\n",
        )
        .unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Unsupported { ref construct } if construct.contains("inttoptr")));

        let err = parse_module("define i32 @f(i8* %p) {\nentry:\n  ret i32 0\n}\n").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Unsupported { ref construct } if construct.contains("pointer")));
    }

    #[test]
    fn invalid_modules_are_rejected_after_parse() {
        // Uses an undefined value; grammar is fine, validation is not.
        let err = parse_module(
            "define i32 @f() {\nentry:\n  ret i32 %nope\n}\n",
        )
        .unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Invalid);
    }

    #[test]
    fn clang_style_annotations_are_discarded() {
        let src = r#"source_filename = "t.c"
target datalayout = "e-m:e-p270:32:32-p271:32:32-p272:64:64-i64:64-f80:128-n8:16:32:64-S128"
target triple = "x86_64-unknown-linux-gnu"

define dso_local i32 @f(i32 noundef %a) #0 {
entry:
  %x = add nsw i32 %a, 1, !dbg !7
  ret i32 %x
}

attributes #0 = { noinline nounwind optnone uwtable "frame-pointer"="all" }
!7 = !{}
"#;
        let m = parse_module(src).unwrap();
        assert_eq!(m.functions.len(), 1);
        assert_eq!(m.functions[0].blocks[0].body.len(), 1);
    }

    #[test]
    fn switch_and_phi_parse() {
        let src = r#"define i32 @f(i32 %x) {
entry:
  switch i32 %x, label %def [
    i32 0, label %a
    i32 1, label %b
  ]
a:
  br label %join
b:
  br label %join
def:
  br label %join
join:
  %r = phi i32 [ 10, %a ], [ 20, %b ], [ 30, %def ]
  ret i32 %r
}
"#;
        let m = parse_module(src).unwrap();
        let f = m.function("f").unwrap();
        assert!(matches!(f.blocks[0].term, Terminator::Switch { ref cases, .. } if cases.len() == 2));
        assert_eq!(f.blocks[4].phis.len(), 1);
    }
}
