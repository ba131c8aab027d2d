//! Tokenizer for the textual IR subset.
//!
//! Comments (`;` to end of line) and whitespace are dropped; every token
//! keeps its 1-based source position so errors can point at the offender.

use super::{ParseError, ParseErrorKind, SourceSpan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    /// `%name` or `%"quoted name"`.
    Local(String),
    /// `@name` or `@"quoted name"`.
    Global(String),
    /// Bare word: keywords, opcodes, types, label names.
    Word(String),
    /// Integer literal, possibly negative.
    Int(i128),
    /// `c"..."` byte string.
    CStr(Vec<u8>),
    /// Plain `"..."` string (file names, attribute strings).
    Str(String),
    /// `#N` attribute group reference.
    AttrGroup(u64),
    /// `!name` / `!N` metadata reference, or bare `!` before `{`.
    Metadata(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LAngle,
    Star,
    Comma,
    Equals,
    Colon,
    Ellipsis,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

pub fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    Lexer {
        chars: text.chars().collect(),
        pos: 0,
        line: 1,
        column: 1,
    }
    .run()
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    column: u32,
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '$' | '-')
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<char> {
        self.chars.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn span_here(&self, len: u32) -> SourceSpan {
        SourceSpan {
            line: self.line,
            column: self.column,
            length: len,
        }
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            span: self.span_here(1),
            message: message.into(),
            expected: None,
            kind: ParseErrorKind::Syntax,
        }
    }

    fn run(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            if c == ';' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
                continue;
            }
            if c.is_whitespace() {
                self.bump();
                continue;
            }

            let span_start = self.span_here(1);
            let tok = match c {
                '(' => {
                    self.bump();
                    Tok::LParen
                }
                ')' => {
                    self.bump();
                    Tok::RParen
                }
                '{' => {
                    self.bump();
                    Tok::LBrace
                }
                '}' => {
                    self.bump();
                    Tok::RBrace
                }
                '[' => {
                    self.bump();
                    Tok::LBracket
                }
                ']' => {
                    self.bump();
                    Tok::RBracket
                }
                '<' => {
                    self.bump();
                    Tok::LAngle
                }
                '*' => {
                    self.bump();
                    Tok::Star
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                '=' => {
                    self.bump();
                    Tok::Equals
                }
                ':' => {
                    self.bump();
                    Tok::Colon
                }
                '%' | '@' => {
                    let sigil = c;
                    self.bump();
                    let name = if self.peek() == Some('"') {
                        self.quoted_string()?
                    } else {
                        let w = self.word();
                        if w.is_empty() {
                            return Err(self.error(format!("expected name after '{sigil}'")));
                        }
                        w
                    };
                    if sigil == '%' {
                        Tok::Local(name)
                    } else {
                        Tok::Global(name)
                    }
                }
                '#' => {
                    self.bump();
                    let w = self.word();
                    let n = w
                        .parse::<u64>()
                        .map_err(|_| self.error("expected a number after '#'"))?;
                    Tok::AttrGroup(n)
                }
                '!' => {
                    self.bump();
                    let name = if self.peek() == Some('"') {
                        self.quoted_string()?
                    } else {
                        self.word()
                    };
                    Tok::Metadata(name)
                }
                '"' => Tok::Str(self.quoted_string()?),
                'c' if self.peek2() == Some('"') => {
                    self.bump(); // 'c'
                    Tok::CStr(self.c_string_bytes()?)
                }
                '.' if self.peek2() == Some('.') => {
                    self.bump();
                    self.bump();
                    if self.peek() == Some('.') {
                        self.bump();
                        Tok::Ellipsis
                    } else {
                        return Err(self.error("expected '...'"));
                    }
                }
                '-' => {
                    if self.peek2().map(|c| c.is_ascii_digit()).unwrap_or(false) {
                        self.bump();
                        let digits = self.word();
                        let n: i128 = digits
                            .parse()
                            .map_err(|_| self.error(format!("bad integer literal '-{digits}'")))?;
                        Tok::Int(-n)
                    } else {
                        // '-' may begin an identifier-like word.
                        let w = self.word();
                        Tok::Word(w)
                    }
                }
                c if c.is_ascii_digit() => {
                    let w = self.word();
                    if w.chars().all(|c| c.is_ascii_digit()) {
                        Tok::Int(
                            w.parse::<i128>()
                                .map_err(|_| self.error(format!("bad integer literal '{w}'")))?,
                        )
                    } else {
                        // Mixed like "0x" or a numeric-leading label name.
                        Tok::Word(w)
                    }
                }
                c if is_ident_char(c) => Tok::Word(self.word()),
                other => return Err(self.error(format!("unexpected character '{other}'"))),
            };
            out.push(Token {
                tok,
                span: span_start,
            });
        }
        Ok(out)
    }

    fn word(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if is_ident_char(c) {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    /// Reads a `"..."` string; bytes above 0x7f and escapes `\XX`, `\\` are
    /// decoded. Returns the string lossily as UTF-8.
    fn quoted_string(&mut self) -> Result<String, ParseError> {
        let bytes = self.string_bytes()?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    fn c_string_bytes(&mut self) -> Result<Vec<u8>, ParseError> {
        self.string_bytes()
    }

    fn string_bytes(&mut self) -> Result<Vec<u8>, ParseError> {
        debug_assert_eq!(self.peek(), Some('"'));
        self.bump();
        let mut bytes = Vec::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(self.error("unterminated string")),
                Some('"') => return Ok(bytes),
                Some('\\') => {
                    let hi = self.bump().ok_or_else(|| self.error("unterminated escape"))?;
                    if hi == '\\' {
                        bytes.push(b'\\');
                        continue;
                    }
                    let lo = self.bump().ok_or_else(|| self.error("unterminated escape"))?;
                    let hex: String = [hi, lo].iter().collect();
                    let b = u8::from_str_radix(&hex, 16)
                        .map_err(|_| self.error(format!("bad escape '\\{hex}'")))?;
                    bytes.push(b);
                }
                Some(c) => {
                    let mut buf = [0u8; 4];
                    bytes.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        lex(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn lexes_instruction_line() {
        assert_eq!(
            toks("%sum = add i32 %a, %b"),
            vec![
                Tok::Local("sum".into()),
                Tok::Equals,
                Tok::Word("add".into()),
                Tok::Word("i32".into()),
                Tok::Local("a".into()),
                Tok::Comma,
                Tok::Local("b".into()),
            ]
        );
    }

    #[test]
    fn lexes_c_string_with_escapes() {
        let t = toks(r#"c"Result: %d\0A\00""#);
        assert_eq!(t, vec![Tok::CStr(b"Result: %d\n\0".to_vec())]);
    }

    #[test]
    fn comments_and_negative_ints() {
        assert_eq!(
            toks("; a comment\nret i32 -7 ; trailing"),
            vec![Tok::Word("ret".into()), Tok::Word("i32".into()), Tok::Int(-7)]
        );
    }

    #[test]
    fn ellipsis_and_attr_group() {
        assert_eq!(
            toks("(ptr, ...) #0"),
            vec![
                Tok::LParen,
                Tok::Word("ptr".into()),
                Tok::Comma,
                Tok::Ellipsis,
                Tok::RParen,
                Tok::AttrGroup(0),
            ]
        );
    }

    #[test]
    fn spans_are_one_based() {
        let tokens = lex("a\n  b").unwrap();
        assert_eq!(tokens[0].span.line, 1);
        assert_eq!(tokens[0].span.column, 1);
        assert_eq!(tokens[1].span.line, 2);
        assert_eq!(tokens[1].span.column, 3);
    }

    #[test]
    fn quoted_names() {
        assert_eq!(
            toks(r#"%"a b" @"x""#),
            vec![Tok::Local("a b".into()), Tok::Global("x".into())]
        );
    }
}
