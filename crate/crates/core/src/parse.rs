//! Concrete syntax for terms.
//!
//! ```text
//! term  := IDENT | pair(term, term) | senc(term, term) | enc(term, term)
//!        | aenc(term, key) | sig(term, priv(key)) | priv(key)
//!        | { term . term . ... } | aci(term, ...)
//! ```
//!
//! Identifiers starting with a lowercase letter or digit are atoms; identifiers starting
//! with an uppercase letter or `?` are variables. Whitespace is insignificant.

use thiserror::Error;

use crate::term::{BinOp, Term, TermError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("column {column}: {message}")]
pub struct ParseError {
    /// 1-based character column in the parsed text.
    pub column: usize,
    pub message: String,
}

pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(text);
    let t = p.term()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(t)
}

/// Parse a comma-separated list of terms, possibly empty.
pub fn parse_term_list(text: &str) -> Result<Vec<Term>, ParseError> {
    let mut p = Parser::new(text);
    let ts = p.list()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(ts)
}

/// True for names usable as atoms in user input.
pub fn is_atom_name(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit())
        && cs.all(is_ident_char)
}

/// True for names usable as variables in user input.
pub fn is_var_name(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_uppercase() || c == '?') && cs.all(is_ident_char)
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

pub(crate) struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(src: &'a str) -> Self {
        Parser { src, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    pub(crate) fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            column: self.src[..self.pos].chars().count() + 1,
            message: message.into(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(d) if d == c => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(d) => Err(self.error(format!("expected `{c}`, found `{d}`"))),
            None => Err(self.error(format!("expected `{c}`, found end of input"))),
        }
    }

    fn ident(&mut self) -> Result<&'a str, ParseError> {
        self.skip_ws();
        let rest = self.rest();
        let mut len = 0;
        for (i, c) in rest.char_indices() {
            if is_ident_char(c) || (i == 0 && c == '?') {
                len = i + c.len_utf8();
            } else {
                break;
            }
        }
        if len == 0 {
            return Err(match rest.chars().next() {
                Some(c) => self.error(format!("unexpected `{c}`")),
                None => self.error("unexpected end of input"),
            });
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    fn lift(&self, e: TermError) -> ParseError {
        self.error(e.to_string())
    }

    pub(crate) fn list(&mut self) -> Result<Vec<Term>, ParseError> {
        let mut out = Vec::new();
        match self.peek() {
            None | Some(')') => return Ok(out),
            _ => {}
        }
        loop {
            out.push(self.term()?);
            if self.peek() == Some(',') {
                self.pos += 1;
            } else {
                return Ok(out);
            }
        }
    }

    pub(crate) fn term(&mut self) -> Result<Term, ParseError> {
        if self.peek() == Some('{') {
            self.pos += 1;
            let mut items = vec![self.term()?];
            while self.peek() == Some('.') {
                self.pos += 1;
                items.push(self.term()?);
            }
            self.expect('}')?;
            return Term::aci(items).map_err(|e| self.lift(e));
        }
        let start = self.pos;
        let name = self.ident()?;
        if self.peek() == Some('(') {
            let op = match name {
                "pair" => Some(BinOp::Pair),
                "senc" | "enc" => Some(BinOp::SEnc),
                "aenc" => Some(BinOp::AEnc),
                "sig" => Some(BinOp::Sig),
                "priv" | "aci" => None,
                _ => {
                    self.pos = start;
                    return Err(self.error(format!("unknown constructor `{name}`")));
                }
            };
            self.pos += 1;
            let t = match (op, name) {
                (Some(op), _) => {
                    let a = self.term()?;
                    self.expect(',')?;
                    let b = self.term()?;
                    Term::bin(op, a, b).map_err(|e| self.lift(e))?
                }
                (None, "priv") => {
                    let k = self.term()?;
                    Term::private(k).map_err(|e| self.lift(e))?
                }
                _ => Term::aci(self.list()?).map_err(|e| self.lift(e))?,
            };
            self.expect(')')?;
            return Ok(t);
        }
        if is_var_name(name) {
            Ok(Term::var(name))
        } else if is_atom_name(name) {
            Ok(Term::atom(name))
        } else {
            self.pos = start;
            Err(self.error(format!("bad identifier `{name}`")))
        }
    }
}
