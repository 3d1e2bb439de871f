//! Syntax trees shared by every stage: arithmetic expressions, quantifier-free
//! formulas and single-loop programs.
//!
//! All constants are exact rationals. Evaluation never rounds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Pow, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = BigRational;

/// A variable assignment. Ordered so traces and reports are deterministic.
pub type State = BTreeMap<String, Rational>;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => r.to_f64().unwrap_or(f64::NAN),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("variable `{0}` is unassigned")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Var(String),
    Const(Rational),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn int(n: i64) -> Expr {
        Expr::Const(rat(n))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn pow(a: Expr, n: u32) -> Expr {
        Expr::Pow(Box::new(a), n)
    }

    pub fn eval(&self, state: &State) -> Result<Rational, EvalError> {
        Ok(match self {
            Expr::Var(v) => state.get(v).cloned().ok_or_else(|| EvalError::Unbound(v.clone()))?,
            Expr::Const(c) => c.clone(),
            Expr::Add(a, b) => a.eval(state)? + b.eval(state)?,
            Expr::Sub(a, b) => a.eval(state)? - b.eval(state)?,
            Expr::Mul(a, b) => a.eval(state)? * b.eval(state)?,
            Expr::Div(a, b) => {
                let d = b.eval(state)?;
                if d.is_zero() {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval(state)? / d
            }
            Expr::Pow(a, n) => Pow::pow(a.eval(state)?, *n),
        })
    }

    /// Floating-point evaluation over a dense variable vector, used on the
    /// training side where exactness is no longer required.
    pub fn eval_f64(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Option<f64> {
        Some(match self {
            Expr::Var(v) => lookup(v)?,
            Expr::Const(c) => rat_to_f64(c),
            Expr::Add(a, b) => a.eval_f64(lookup)? + b.eval_f64(lookup)?,
            Expr::Sub(a, b) => a.eval_f64(lookup)? - b.eval_f64(lookup)?,
            Expr::Mul(a, b) => a.eval_f64(lookup)? * b.eval_f64(lookup)?,
            Expr::Div(a, b) => a.eval_f64(lookup)? / b.eval_f64(lookup)?,
            Expr::Pow(a, n) => a.eval_f64(lookup)?.powi(*n as i32),
        })
    }

    pub fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Expr::Const(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Pow(a, _) => a.collect_vars(out),
        }
    }

    pub fn collect_consts(&self, out: &mut BTreeSet<Rational>) {
        match self {
            Expr::Var(_) => {}
            Expr::Const(c) => {
                out.insert(c.clone());
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_consts(out);
                b.collect_consts(out);
            }
            Expr::Pow(a, _) => a.collect_consts(out),
        }
    }

    /// Polynomial degree; `None` when the expression divides by a non-constant.
    pub fn degree(&self) -> Option<u32> {
        Some(match self {
            Expr::Var(_) => 1,
            Expr::Const(_) => 0,
            Expr::Add(a, b) | Expr::Sub(a, b) => a.degree()?.max(b.degree()?),
            Expr::Mul(a, b) => a.degree()? + b.degree()?,
            Expr::Div(a, b) => {
                if b.degree()? > 0 {
                    return None;
                }
                a.degree()?
            }
            Expr::Pow(a, n) => a.degree()? * n,
        })
    }

    pub fn has_division(&self) -> bool {
        match self {
            Expr::Var(_) | Expr::Const(_) => false,
            Expr::Div(..) => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.has_division() || b.has_division(),
            Expr::Pow(a, _) => a.has_division(),
        }
    }

    pub fn substitute(&self, map: &BTreeMap<String, Expr>) -> Expr {
        match self {
            Expr::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Expr::Const(_) => self.clone(),
            Expr::Add(a, b) => Expr::add(a.substitute(map), b.substitute(map)),
            Expr::Sub(a, b) => Expr::sub(a.substitute(map), b.substitute(map)),
            Expr::Mul(a, b) => Expr::mul(a.substitute(map), b.substitute(map)),
            Expr::Div(a, b) => Expr::div(a.substitute(map), b.substitute(map)),
            Expr::Pow(a, n) => Expr::pow(a.substitute(map), *n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    /// Operator with its operands swapped: `a op b` iff `b op.flip() a`.
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Cmp(CmpOp, Expr, Expr),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn cmp(op: CmpOp, lhs: Expr, rhs: Expr) -> Formula {
        Formula::Cmp(op, lhs, rhs)
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    /// Conjunction that drops `True`, short-circuits on `False` and flattens.
    pub fn and_all(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    pub fn or_all(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::or_all([Formula::not(a), b])
    }

    pub fn eval(&self, state: &State) -> Result<bool, EvalError> {
        Ok(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Cmp(op, l, r) => op.holds(&l.eval(state)?, &r.eval(state)?),
            Formula::Not(f) => !f.eval(state)?,
            Formula::And(fs) => {
                for f in fs {
                    if !f.eval(state)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Or(fs) => {
                for f in fs {
                    if f.eval(state)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }

    /// Floating-point evaluation where sides within `tol` compare equal.
    pub fn eval_f64(&self, lookup: &dyn Fn(&str) -> Option<f64>, tol: f64) -> Option<bool> {
        Some(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Cmp(op, l, r) => {
                let d = l.eval_f64(lookup)? - r.eval_f64(lookup)?;
                match op {
                    CmpOp::Eq => d.abs() <= tol,
                    CmpOp::Ne => d.abs() > tol,
                    CmpOp::Lt => d < -tol,
                    CmpOp::Gt => d > tol,
                    CmpOp::Le => d <= tol,
                    CmpOp::Ge => d >= -tol,
                }
            }
            Formula::Not(f) => !f.eval_f64(lookup, tol)?,
            Formula::And(fs) => {
                for f in fs {
                    if !f.eval_f64(lookup, tol)? {
                        return Some(false);
                    }
                }
                true
            }
            Formula::Or(fs) => {
                for f in fs {
                    if f.eval_f64(lookup, tol)? {
                        return Some(true);
                    }
                }
                false
            }
        })
    }

    pub fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Cmp(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Formula::Not(f) => f.collect_vars(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_vars(out)),
        }
    }

    pub fn collect_consts(&self, out: &mut BTreeSet<Rational>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Cmp(_, l, r) => {
                l.collect_consts(out);
                r.collect_consts(out);
            }
            Formula::Not(f) => f.collect_consts(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_consts(out)),
        }
    }

    /// Maximum polynomial degree over all atoms; `None` if some atom divides
    /// by a non-constant term.
    pub fn degree(&self) -> Option<u32> {
        match self {
            Formula::True | Formula::False => Some(0),
            Formula::Cmp(_, l, r) => Some(l.degree()?.max(r.degree()?)),
            Formula::Not(f) => f.degree(),
            Formula::And(fs) | Formula::Or(fs) => {
                let mut d = 0;
                for f in fs {
                    d = d.max(f.degree()?);
                }
                Some(d)
            }
        }
    }

    pub fn has_division(&self) -> bool {
        match self {
            Formula::True | Formula::False => false,
            Formula::Cmp(_, l, r) => l.has_division() || r.has_division(),
            Formula::Not(f) => f.has_division(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().any(Formula::has_division),
        }
    }

    pub fn substitute(&self, map: &BTreeMap<String, Expr>) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Cmp(op, l, r) => Formula::Cmp(*op, l.substitute(map), r.substitute(map)),
            Formula::Not(f) => Formula::not(f.substitute(map)),
            Formula::And(fs) => Formula::And(fs.iter().map(|f| f.substitute(map)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|f| f.substitute(map)).collect()),
        }
    }

    /// Top-level conjuncts.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(fs) => fs.iter().flat_map(|f| f.conjuncts()).collect(),
            Formula::True => Vec::new(),
            other => vec![other],
        }
    }

    /// Pushes negations down to atoms.
    pub fn nnf(&self) -> Formula {
        fn go(f: &Formula, negated: bool) -> Formula {
            match (f, negated) {
                (Formula::True, false) | (Formula::False, true) => Formula::True,
                (Formula::True, true) | (Formula::False, false) => Formula::False,
                (Formula::Cmp(op, l, r), neg) => {
                    let op = if neg { op.negate() } else { *op };
                    Formula::Cmp(op, l.clone(), r.clone())
                }
                (Formula::Not(inner), neg) => go(inner, !neg),
                (Formula::And(fs), false) | (Formula::Or(fs), true) => {
                    Formula::and_all(fs.iter().map(|g| go(g, negated)))
                }
                (Formula::Or(fs), false) | (Formula::And(fs), true) => {
                    Formula::or_all(fs.iter().map(|g| go(g, negated)))
                }
            }
        }
        go(self, false)
    }

    /// Structural check that the tree is a well-formed quantifier-free
    /// formula: connectives have at least two operands and exponents are
    /// nonnegative integers (guaranteed by the type).
    pub fn is_well_formed(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Cmp(..) => true,
            Formula::Not(f) => f.is_well_formed(),
            Formula::And(fs) | Formula::Or(fs) => fs.len() >= 2 && fs.iter().all(Formula::is_well_formed),
        }
    }
}

/// Condition of an `if`: a formula or the nondeterministic `unknown()`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cond {
    Formula(Formula),
    Nondet,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Stmt {
    Assign { target: String, expr: Expr },
    IfElse { cond: Cond, then_branch: Vec<Stmt>, else_branch: Vec<Stmt> },
}

impl Stmt {
    pub fn assigned_vars(stmts: &[Stmt], out: &mut Vec<String>) {
        for s in stmts {
            match s {
                Stmt::Assign { target, .. } => {
                    if !out.contains(target) {
                        out.push(target.clone());
                    }
                }
                Stmt::IfElse { then_branch, else_branch, .. } => {
                    Stmt::assigned_vars(then_branch, out);
                    Stmt::assigned_vars(else_branch, out);
                }
            }
        }
    }

    fn visit<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
        for s in stmts {
            f(s);
            if let Stmt::IfElse { then_branch, else_branch, .. } = s {
                Stmt::visit(then_branch, f);
                Stmt::visit(else_branch, f);
            }
        }
    }
}

/// Arithmetic domain the program's variables range over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Real,
    Int,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Real => "real",
            Domain::Int => "int",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    pub name: String,
    pub vars: Vec<String>,
    pub pre: Formula,
    pub loop_cond: Formula,
    pub body: Vec<Stmt>,
    pub post: Formula,
}

impl Program {
    /// Every formula and expression in program order: pre, loop condition,
    /// body conditions and right-hand sides, post.
    pub fn for_each_formula(&self, f: &mut dyn FnMut(&Formula)) {
        f(&self.pre);
        f(&self.loop_cond);
        Stmt::visit(&self.body, &mut |s| {
            if let Stmt::IfElse { cond: Cond::Formula(c), .. } = s {
                f(c);
            }
        });
        f(&self.post);
    }

    pub fn for_each_expr(&self, f: &mut dyn FnMut(&Expr)) {
        Stmt::visit(&self.body, &mut |s| {
            if let Stmt::Assign { expr, .. } = s {
                f(expr);
            }
        });
    }

    pub fn literals(&self) -> BTreeSet<Rational> {
        let mut out = BTreeSet::new();
        self.for_each_formula(&mut |g| g.collect_consts(&mut out));
        self.for_each_expr(&mut |e| e.collect_consts(&mut out));
        out
    }

    /// `Int` when every literal is an integer and nothing divides, which is
    /// the shape of C-style integer benchmark loops.
    pub fn natural_domain(&self) -> Domain {
        let integral = self.literals().iter().all(|c| c.is_integer());
        let mut divides = false;
        self.for_each_formula(&mut |g| divides |= g.has_division());
        self.for_each_expr(&mut |e| divides |= e.has_division());
        if integral && !divides {
            Domain::Int
        } else {
            Domain::Real
        }
    }

    pub fn max_degree(&self) -> Option<u32> {
        let mut d = Some(0u32);
        self.for_each_formula(&mut |g| d = d.and_then(|d| g.degree().map(|e| d.max(e))));
        self.for_each_expr(&mut |e| d = d.and_then(|d| e.degree().map(|e| d.max(e))));
        d
    }

    pub fn has_nondet(&self) -> bool {
        let mut found = false;
        Stmt::visit(&self.body, &mut |s| {
            if let Stmt::IfElse { cond: Cond::Nondet, .. } = s {
                found = true;
            }
        });
        found
    }

    pub fn assigned_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        Stmt::assigned_vars(&self.body, &mut out);
        out
    }
}

/// Prints a rational as an integer or `p/q`.
pub fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p`, `p/q` or a plain decimal like `-1.25` exactly.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let denom = Pow::pow(BigInt::from(10), frac_part.len() as u32);
    let v = Rational::new(numer, denom);
    Some(if neg { -v } else { v })
}
