use super::{ParseError, Pos};
use crate::ast::{parse_rational, Rational};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(Rational),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

const KEYWORDS: &[&str] = &[
    "program", "vars", "pre", "post", "while", "if", "else", "true", "false", "unknown",
];

// Longest symbols first so that `<=` wins over `<`.
const SYMBOLS: &[&str] = &[
    "&&", "||", "/\\", "\\/", "==", "!=", "<=", ">=", "++", "--", "+=", "-=", "*=", "<", ">", "=", "!", "+",
    "-", "*", "/", "^", "(", ")", "{", "}", ";", ":", ",",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize, chars: &[char]| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1, &chars);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let start = Pos { line, col };
            advance(&mut i, &mut line, &mut col, 2, &chars);
            loop {
                if i + 1 >= chars.len() {
                    return Err(ParseError::syntax(start, "unterminated block comment"));
                }
                if chars[i] == '*' && chars[i + 1] == '/' {
                    advance(&mut i, &mut line, &mut col, 2, &chars);
                    break;
                }
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            continue;
        }
        let pos = Pos { line, col };
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            let text: String = chars[start..i].iter().collect();
            let value = parse_rational(&text)
                .ok_or_else(|| ParseError::syntax(pos, format!("malformed number `{text}`")))?;
            out.push(Token { tok: Tok::Num(value), pos });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            let text: String = chars[start..i].iter().collect();
            let tok = match KEYWORDS.iter().find(|k| **k == text) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(text),
            };
            out.push(Token { tok, pos });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                advance(&mut i, &mut line, &mut col, sym.chars().count(), &chars);
                out.push(Token { tok: Tok::Sym(sym), pos });
            }
            None => return Err(ParseError::syntax(pos, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, pos: Pos { line, col } });
    Ok(out)
}
