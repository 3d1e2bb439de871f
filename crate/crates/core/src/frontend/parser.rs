use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, Pos};
use crate::ast::{CmpOp, Cond, Expr, Formula, Program, Rational, Stmt};
use num_traits::{ToPrimitive, Zero};

struct Parser {
    toks: Vec<Token>,
    at: usize,
    /// First occurrence of every identifier, for the declared-vars check.
    seen: Vec<(String, Pos)>,
}

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser { toks: tokenize(src)?, at: 0, seen: Vec::new() };
    p.program()
}

pub fn parse_formula(src: &str) -> Result<Formula, ParseError> {
    let mut p = Parser { toks: tokenize(src)?, at: 0, seen: Vec::new() };
    let f = p.formula()?;
    p.expect_eof()?;
    Ok(f)
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: tokenize(src)?, at: 0, seen: Vec::new() };
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Num(n) => format!("number `{n}`"),
        Tok::Kw(k) => format!("keyword `{k}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Kw(x) if *x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{s}`")))
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<(), ParseError> {
        if self.is_kw(k) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{k}`")))
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        ParseError::syntax(self.pos(), format!("expected {wanted}, found {}", describe(self.peek())))
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                if !self.seen.iter().any(|(n, _)| *n == name) {
                    self.seen.push((name.clone(), pos));
                }
                Ok(name)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut name = String::from("main");
        if self.is_kw("program") {
            self.bump();
            name = match self.peek().clone() {
                Tok::Ident(n) => {
                    self.bump();
                    n
                }
                _ => return Err(self.unexpected("program name")),
            };
            self.expect_sym(";")?;
        }
        let mut declared: Option<Vec<String>> = None;
        if self.is_kw("vars") {
            self.bump();
            let mut vs = Vec::new();
            loop {
                let pos = self.pos();
                let v = match self.peek().clone() {
                    Tok::Ident(v) => {
                        self.bump();
                        v
                    }
                    _ => return Err(self.unexpected("variable name")),
                };
                if vs.contains(&v) {
                    return Err(ParseError::semantic(pos, format!("variable `{v}` declared twice")));
                }
                vs.push(v);
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym(";")?;
            declared = Some(vs);
        }
        self.expect_kw("pre")?;
        self.expect_sym(":")?;
        let pre = self.formula()?;
        self.expect_sym(";")?;
        self.expect_kw("while")?;
        self.expect_sym("(")?;
        let loop_cond = self.formula()?;
        self.expect_sym(")")?;
        let body = self.block()?;
        self.expect_kw("post")?;
        self.expect_sym(":")?;
        let post = self.formula()?;
        self.expect_sym(";")?;
        self.expect_eof()?;

        let vars = match declared {
            Some(vs) => {
                if let Some((v, pos)) = self.seen.iter().find(|(n, _)| !vs.contains(n)) {
                    return Err(ParseError::semantic(*pos, format!("undeclared variable `{v}`")));
                }
                vs
            }
            None => self.seen.iter().map(|(n, _)| n.clone()).collect(),
        };
        Ok(Program { name, vars, pre, loop_cond, body, post })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.is_sym("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.unexpected("`}`"));
            }
            if let Some(s) = self.stmt()? {
                out.push(s);
            }
        }
        self.bump();
        Ok(out)
    }

    /// A braced block or a single statement.
    fn branch(&mut self) -> Result<Vec<Stmt>, ParseError> {
        if self.is_sym("{") {
            self.block()
        } else {
            Ok(self.stmt()?.into_iter().collect())
        }
    }

    fn stmt(&mut self) -> Result<Option<Stmt>, ParseError> {
        let pos = self.pos();
        if self.is_kw("while") {
            return Err(ParseError::semantic(pos, "nested loops are not supported"));
        }
        if self.eat_sym(";") {
            return Ok(None);
        }
        if self.is_kw("if") {
            self.bump();
            self.expect_sym("(")?;
            let cond = if self.is_kw("unknown") {
                self.bump();
                self.expect_sym("(")?;
                self.expect_sym(")")?;
                Cond::Nondet
            } else {
                Cond::Formula(self.formula()?)
            };
            self.expect_sym(")")?;
            let then_branch = self.branch()?;
            let else_branch = if self.is_kw("else") {
                self.bump();
                self.branch()?
            } else {
                Vec::new()
            };
            return Ok(Some(Stmt::IfElse { cond, then_branch, else_branch }));
        }
        let target = self.ident()?;
        let var = Expr::Var(target.clone());
        let expr = if self.eat_sym("++") {
            Expr::add(var, Expr::int(1))
        } else if self.eat_sym("--") {
            Expr::sub(var, Expr::int(1))
        } else if self.eat_sym("+=") {
            Expr::add(var, self.expr()?)
        } else if self.eat_sym("-=") {
            Expr::sub(var, self.expr()?)
        } else if self.eat_sym("*=") {
            Expr::mul(var, self.expr()?)
        } else if self.eat_sym("=") {
            self.expr()?
        } else {
            return Err(self.unexpected("assignment"));
        };
        self.expect_sym(";")?;
        Ok(Some(Stmt::Assign { target, expr }))
    }

    pub fn formula(&mut self) -> Result<Formula, ParseError> {
        let first = self.conj()?;
        if !(self.is_sym("||") || self.is_sym("\\/")) {
            return Ok(first);
        }
        let mut parts = vec![first];
        while self.eat_sym("||") || self.eat_sym("\\/") {
            parts.push(self.conj()?);
        }
        Ok(Formula::Or(parts))
    }

    fn conj(&mut self) -> Result<Formula, ParseError> {
        let first = self.unary_formula()?;
        if !(self.is_sym("&&") || self.is_sym("/\\")) {
            return Ok(first);
        }
        let mut parts = vec![first];
        while self.eat_sym("&&") || self.eat_sym("/\\") {
            parts.push(self.unary_formula()?);
        }
        Ok(Formula::And(parts))
    }

    fn unary_formula(&mut self) -> Result<Formula, ParseError> {
        if self.eat_sym("!") {
            return Ok(Formula::not(self.unary_formula()?));
        }
        if self.is_kw("true") {
            self.bump();
            return Ok(Formula::True);
        }
        if self.is_kw("false") {
            self.bump();
            return Ok(Formula::False);
        }
        if self.is_sym("(") {
            // Either a parenthesized formula or an arithmetic expression that
            // starts a comparison; try the former and backtrack.
            let save = (self.at, self.seen.len());
            self.bump();
            if let Ok(f) = self.formula() {
                if self.eat_sym(")") && !self.continues_expression() {
                    return Ok(f);
                }
            }
            self.at = save.0;
            self.seen.truncate(save.1);
        }
        self.comparison()
    }

    fn continues_expression(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Sym("+" | "-" | "*" | "/" | "^" | "<" | ">" | "<=" | ">=" | "==" | "!=" | "=")
        )
    }

    fn comparison(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Sym("==") | Tok::Sym("=") => CmpOp::Eq,
            Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => return Err(self.unexpected("comparison operator")),
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Formula::Cmp(op, lhs, rhs))
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat_sym("+") {
                acc = Expr::add(acc, self.term()?);
            } else if self.eat_sym("-") {
                acc = Expr::sub(acc, self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            if self.eat_sym("*") {
                acc = Expr::mul(acc, self.factor()?);
            } else if self.eat_sym("/") {
                let rhs = self.factor()?;
                // Literal quotients are exact constants.
                acc = match (acc, rhs) {
                    (Expr::Const(a), Expr::Const(b)) if !b.is_zero() => Expr::Const(a / b),
                    (a, b) => Expr::div(a, b),
                };
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat_sym("-") {
            return Ok(match self.factor()? {
                Expr::Const(c) => Expr::Const(-c),
                e => Expr::sub(Expr::Const(Rational::zero()), e),
            });
        }
        let base = self.atom()?;
        if self.eat_sym("^") {
            let pos = self.pos();
            match self.peek().clone() {
                Tok::Num(n) if n.is_integer() => {
                    self.bump();
                    let exp = n
                        .to_integer()
                        .to_u32()
                        .ok_or_else(|| ParseError::syntax(pos, "exponent out of range"))?;
                    return Ok(Expr::pow(base, exp));
                }
                _ => return Err(ParseError::syntax(pos, "exponent must be a nonnegative integer literal")),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::Const(n))
            }
            Tok::Ident(_) => Ok(Expr::Var(self.ident()?)),
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}
