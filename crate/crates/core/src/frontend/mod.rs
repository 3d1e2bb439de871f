//! Mini loop language: lexer, parser, pretty-printer and static facts.
//!
//! ```text
//! program  ::= [ "program" IDENT ";" ] [ "vars" IDENT { "," IDENT } ";" ]
//!              "pre" ":" formula ";"
//!              "while" "(" formula ")" block
//!              "post" ":" formula ";"
//! block    ::= "{" { stmt } "}"
//! stmt     ::= IDENT ( "=" | "+=" | "-=" | "*=" ) expr ";"
//!            | IDENT ( "++" | "--" ) ";"
//!            | "if" "(" ( "unknown" "(" ")" | formula ) ")" branch [ "else" branch ]
//!            | ";"
//! branch   ::= block | stmt
//! formula  ::= conj { ( "||" | "\/" ) conj }
//! conj     ::= unary { ( "&&" | "/\" ) unary }
//! unary    ::= "!" unary | "true" | "false" | "(" formula ")" | expr RELOP expr
//! RELOP    ::= "==" | "=" | "!=" | "<" | ">" | "<=" | ">="
//! expr     ::= term { ( "+" | "-" ) term }
//! term     ::= factor { ( "*" | "/" ) factor }
//! factor   ::= "-" factor | atom [ "^" NAT ]
//! atom     ::= NUMBER | IDENT | "(" expr ")"
//! ```
//!
//! Numbers are exact decimals. `-c` and `p/q` of literals fold into a single
//! rational constant; `-e` of anything else becomes `0 - e`.

mod analyze;
mod lexer;
mod parser;
mod printer;

use std::fmt;

use thiserror::Error;

pub use analyze::{analyze, interval_bounds, var_const_atom, Bound, Interval, StaticFacts};
pub use parser::{parse_expr, parse_formula, parse_program};
pub use printer::{print_expr, print_formula, print_program};

use crate::ast::Program;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {} error: {message}", match .kind { ParseErrorKind::Syntax => "syntax", ParseErrorKind::Semantic => "semantic" })]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub pos: Pos,
    pub message: String,
}

impl ParseError {
    pub fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        ParseError { kind: ParseErrorKind::Syntax, pos, message: message.into() }
    }

    pub fn semantic(pos: Pos, message: impl Into<String>) -> Self {
        ParseError { kind: ParseErrorKind::Semantic, pos, message: message.into() }
    }
}

/// Parses a program file's text.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    parse_program(source)
}
