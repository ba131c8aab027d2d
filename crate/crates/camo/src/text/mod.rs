//! Textual IR front end: parsing `.ll` text into [`crate::ir::IrModule`] and
//! printing modules back in a canonical form.
//!
//! The canonical form is deterministic: one instruction per line, two-space
//! indentation, labels as `name:`, single-space token separation. Parsing
//! accepts a superset of what the printer emits (alignment, metadata and
//! attribute annotations are discarded), so `print ∘ parse` reaches a byte
//! fixed point after one normalization pass.

mod lexer;
mod parser;
mod printer;

use std::fmt;

pub use parser::parse_module;
pub use printer::print_module;

/// 1-based source location of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

/// Why a parse was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    /// Malformed input.
    Syntax,
    /// Valid LLVM IR, but outside the supported subset.
    Unsupported { construct: String },
    /// Syntactically fine, but the resulting module broke an IR invariant.
    Invalid,
}

/// A parse failure with its source location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
    /// Token class the parser was looking for, when known.
    pub expected: Option<String>,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Unsupported { construct } => {
                write!(f, "{}: unsupported construct: {construct}", self.span)
            }
            _ => {
                write!(f, "{}: {}", self.span, self.message)?;
                if let Some(e) = &self.expected {
                    write!(f, " (expected {e})")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ParseError {}
