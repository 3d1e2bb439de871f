//! Quantifier-free verification-condition terms, SMT-LIB emission and
//! model parsing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use num_traits::{One, Signed, Zero};

use crate::ast::{parse_rational, CmpOp, Domain, EvalError, Expr, Formula, Rational, State};

/// Arithmetic term. Unlike [`Expr`] it can branch on a proposition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(Rational),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Div(Box<Term>, Box<Term>),
    Pow(Box<Term>, u32),
    Ite(Box<Prop>, Box<Term>, Box<Term>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prop {
    True,
    False,
    /// Free boolean symbol, used for nondeterministic choices.
    Var(String),
    Cmp(CmpOp, Term, Term),
    Not(Box<Prop>),
    And(Vec<Prop>),
    Or(Vec<Prop>),
}

/// Numeric and boolean assignment for evaluating terms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    pub nums: State,
    pub bools: BTreeMap<String, bool>,
}

impl Term {
    /// Translates `e`, replacing variables found in `env`.
    pub fn from_expr(e: &Expr, env: &BTreeMap<String, Term>) -> Term {
        let go = |x: &Expr| Box::new(Term::from_expr(x, env));
        match e {
            Expr::Var(v) => env.get(v).cloned().unwrap_or_else(|| Term::Var(v.clone())),
            Expr::Const(c) => Term::Const(c.clone()),
            Expr::Add(a, b) => Term::Add(go(a), go(b)),
            Expr::Sub(a, b) => Term::Sub(go(a), go(b)),
            Expr::Mul(a, b) => Term::Mul(go(a), go(b)),
            Expr::Div(a, b) => Term::Div(go(a), go(b)),
            Expr::Pow(a, n) => Term::Pow(go(a), *n),
        }
    }

    pub fn eval(&self, a: &Assignment) -> Result<Rational, EvalError> {
        Ok(match self {
            Term::Var(v) => a.nums.get(v).cloned().ok_or_else(|| EvalError::Unbound(v.clone()))?,
            Term::Const(c) => c.clone(),
            Term::Add(x, y) => x.eval(a)? + y.eval(a)?,
            Term::Sub(x, y) => x.eval(a)? - y.eval(a)?,
            Term::Mul(x, y) => x.eval(a)? * y.eval(a)?,
            Term::Div(x, y) => {
                let d = y.eval(a)?;
                if d.is_zero() {
                    return Err(EvalError::DivisionByZero);
                }
                x.eval(a)? / d
            }
            Term::Pow(x, n) => num_traits::pow(x.eval(a)?, *n as usize),
            Term::Ite(c, x, y) => {
                if c.eval(a)? {
                    x.eval(a)?
                } else {
                    y.eval(a)?
                }
            }
        })
    }

    /// Polynomial degree; `None` for division by a non-constant.
    pub fn degree(&self) -> Option<u32> {
        match self {
            Term::Var(_) => Some(1),
            Term::Const(_) => Some(0),
            Term::Add(a, b) | Term::Sub(a, b) => Some(a.degree()?.max(b.degree()?)),
            Term::Mul(a, b) => Some(a.degree()? + b.degree()?),
            Term::Div(a, b) => match b.degree()? {
                0 => a.degree(),
                _ => None,
            },
            Term::Pow(a, n) => Some(a.degree()? * n),
            Term::Ite(c, a, b) => Some(c.degree()?.max(a.degree()?).max(b.degree()?)),
        }
    }

    fn vars(&self, nums: &mut BTreeSet<String>, bools: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                nums.insert(v.clone());
            }
            Term::Const(_) => {}
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) | Term::Div(a, b) => {
                a.vars(nums, bools);
                b.vars(nums, bools);
            }
            Term::Pow(a, _) => a.vars(nums, bools),
            Term::Ite(c, a, b) => {
                c.vars(nums, bools);
                a.vars(nums, bools);
                b.vars(nums, bools);
            }
        }
    }

    fn smt(&self, out: &mut String) {
        let bin = |op: &str, a: &Term, b: &Term, out: &mut String| {
            let _ = write!(out, "({op} ");
            a.smt(out);
            out.push(' ');
            b.smt(out);
            out.push(')');
        };
        match self {
            Term::Var(v) => out.push_str(&symbol(v)),
            Term::Const(c) => out.push_str(&smt_rational(c)),
            Term::Add(a, b) => bin("+", a, b, out),
            Term::Sub(a, b) => bin("-", a, b, out),
            Term::Mul(a, b) => bin("*", a, b, out),
            Term::Div(a, b) => bin("/", a, b, out),
            Term::Pow(a, n) => match n {
                0 => out.push('1'),
                1 => a.smt(out),
                _ => {
                    out.push_str("(*");
                    for _ in 0..*n {
                        out.push(' ');
                        a.smt(out);
                    }
                    out.push(')');
                }
            },
            Term::Ite(c, a, b) => {
                out.push_str("(ite ");
                c.smt(out);
                out.push(' ');
                a.smt(out);
                out.push(' ');
                b.smt(out);
                out.push(')');
            }
        }
    }
}

impl Prop {
    pub fn from_formula(f: &Formula, env: &BTreeMap<String, Term>) -> Prop {
        match f {
            Formula::True => Prop::True,
            Formula::False => Prop::False,
            Formula::Cmp(op, l, r) => Prop::Cmp(*op, Term::from_expr(l, env), Term::from_expr(r, env)),
            Formula::Not(g) => Prop::Not(Box::new(Prop::from_formula(g, env))),
            Formula::And(gs) => Prop::And(gs.iter().map(|g| Prop::from_formula(g, env)).collect()),
            Formula::Or(gs) => Prop::Or(gs.iter().map(|g| Prop::from_formula(g, env)).collect()),
        }
    }

    pub fn not(p: Prop) -> Prop {
        Prop::Not(Box::new(p))
    }

    pub fn eval(&self, a: &Assignment) -> Result<bool, EvalError> {
        Ok(match self {
            Prop::True => true,
            Prop::False => false,
            Prop::Var(v) => *a.bools.get(v).ok_or_else(|| EvalError::Unbound(v.clone()))?,
            Prop::Cmp(op, l, r) => op.holds(&l.eval(a)?, &r.eval(a)?),
            Prop::Not(p) => !p.eval(a)?,
            Prop::And(ps) => {
                for p in ps {
                    if !p.eval(a)? {
                        return Ok(false);
                    }
                }
                true
            }
            Prop::Or(ps) => {
                for p in ps {
                    if p.eval(a)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }

    pub fn degree(&self) -> Option<u32> {
        match self {
            Prop::True | Prop::False | Prop::Var(_) => Some(0),
            Prop::Cmp(_, l, r) => Some(l.degree()?.max(r.degree()?)),
            Prop::Not(p) => p.degree(),
            Prop::And(ps) | Prop::Or(ps) => ps.iter().try_fold(0, |m, p| Some(m.max(p.degree()?))),
        }
    }

    /// Numeric and boolean symbols, each sorted.
    pub fn symbols(&self) -> (BTreeSet<String>, BTreeSet<String>) {
        let mut nums = BTreeSet::new();
        let mut bools = BTreeSet::new();
        self.vars(&mut nums, &mut bools);
        (nums, bools)
    }

    fn vars(&self, nums: &mut BTreeSet<String>, bools: &mut BTreeSet<String>) {
        match self {
            Prop::True | Prop::False => {}
            Prop::Var(v) => {
                bools.insert(v.clone());
            }
            Prop::Cmp(_, l, r) => {
                l.vars(nums, bools);
                r.vars(nums, bools);
            }
            Prop::Not(p) => p.vars(nums, bools),
            Prop::And(ps) | Prop::Or(ps) => ps.iter().for_each(|p| p.vars(nums, bools)),
        }
    }

    fn smt(&self, out: &mut String) {
        let many = |op: &str, ps: &[Prop], unit: &str, out: &mut String| match ps {
            [] => out.push_str(unit),
            [p] => p.smt(out),
            _ => {
                let _ = write!(out, "({op}");
                for p in ps {
                    out.push(' ');
                    p.smt(out);
                }
                out.push(')');
            }
        };
        match self {
            Prop::True => out.push_str("true"),
            Prop::False => out.push_str("false"),
            Prop::Var(v) => out.push_str(&symbol(v)),
            Prop::Cmp(op, l, r) => {
                let name = match op {
                    CmpOp::Eq => "=",
                    CmpOp::Ne => "distinct",
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                };
                let _ = write!(out, "({name} ");
                l.smt(out);
                out.push(' ');
                r.smt(out);
                out.push(')');
            }
            Prop::Not(p) => {
                out.push_str("(not ");
                p.smt(out);
                out.push(')');
            }
            Prop::And(ps) => many("and", ps, "true", out),
            Prop::Or(ps) => many("or", ps, "false", out),
        }
    }

    pub fn to_smt(&self) -> String {
        let mut s = String::new();
        self.smt(&mut s);
        s
    }
}

/// SMT-LIB rendering of a formula over program variables.
pub fn formula_to_smt(f: &Formula) -> String {
    Prop::from_formula(f, &BTreeMap::new()).to_smt()
}

const RESERVED: &[&str] = &[
    "true", "false", "not", "and", "or", "ite", "let", "forall", "exists", "distinct", "div", "mod", "abs", "par", "as",
    "_", "!",
];

/// A simple symbol when possible, otherwise `|name|`.
pub fn symbol(name: &str) -> String {
    let simple = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !RESERVED.contains(&name);
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

/// `5`, `(- 5)`, `(/ 1 3)` or `(- (/ 1 3))`.
pub fn smt_rational(r: &Rational) -> String {
    let mag = r.abs();
    let body = if mag.denom().is_one() { mag.numer().to_string() } else { format!("(/ {} {})", mag.numer(), mag.denom()) };
    if r.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

pub fn logic_for(vc: &Prop, domain: Domain) -> &'static str {
    let linear = vc.degree().is_some_and(|d| d <= 1);
    match (domain, linear) {
        (Domain::Real, true) => "QF_LRA",
        (Domain::Real, false) => "QF_NRA",
        (Domain::Int, true) => "QF_LIA",
        (Domain::Int, false) => "QF_NIA",
    }
}

/// A complete SMT-LIB script asserting `vc`.
pub fn emit_smtlib(vc: &Prop, domain: Domain) -> String {
    let (nums, bools) = vc.symbols();
    let sort = match domain {
        Domain::Real => "Real",
        Domain::Int => "Int",
    };
    let mut out = String::new();
    let _ = writeln!(out, "(set-logic {})", logic_for(vc, domain));
    for v in &nums {
        let _ = writeln!(out, "(declare-fun {} () {sort})", symbol(v));
    }
    for v in &bools {
        let _ = writeln!(out, "(declare-fun {} () Bool)", symbol(v));
    }
    let _ = writeln!(out, "(assert {})", vc.to_smt());
    out.push_str("(check-sat)\n(get-model)\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExp {
    Atom(String),
    List(Vec<SExp>),
}

/// Parses a sequence of s-expressions. `|quoted|` symbols keep their inner
/// text; string literals and comments are skipped.
pub fn parse_sexps(text: &str) -> Option<Vec<SExp>> {
    let mut stack: Vec<Vec<SExp>> = vec![Vec::new()];
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' => stack.push(Vec::new()),
            ')' => {
                let done = stack.pop()?;
                stack.last_mut()?.push(SExp::List(done));
            }
            ';' => {
                for d in chars.by_ref() {
                    if d == '\n' {
                        break;
                    }
                }
            }
            '|' => {
                let mut s = String::new();
                for d in chars.by_ref() {
                    if d == '|' {
                        break;
                    }
                    s.push(d);
                }
                stack.last_mut()?.push(SExp::Atom(s));
            }
            '"' => {
                let mut s = String::new();
                while let Some(d) = chars.next() {
                    if d == '"' {
                        if chars.peek() == Some(&'"') {
                            chars.next();
                            s.push('"');
                            continue;
                        }
                        break;
                    }
                    s.push(d);
                }
                stack.last_mut()?.push(SExp::Atom(format!("\"{s}\"")));
            }
            c if c.is_whitespace() => {}
            c => {
                let mut s = String::from(c);
                while let Some(&d) = chars.peek() {
                    if d.is_whitespace() || d == '(' || d == ')' {
                        break;
                    }
                    s.push(d);
                    chars.next();
                }
                stack.last_mut()?.push(SExp::Atom(s));
            }
        }
    }
    if stack.len() != 1 {
        return None;
    }
    stack.pop()
}

/// Value of a model constant: decimals, integers, `(- x)` and `(/ p q)`.
pub fn sexp_value(e: &SExp) -> Option<Rational> {
    match e {
        SExp::Atom(a) => parse_rational(a),
        SExp::List(items) => match items.as_slice() {
            [SExp::Atom(op), x] if op == "-" => Some(-sexp_value(x)?),
            [SExp::Atom(op), p, q] if op == "/" => {
                let q = sexp_value(q)?;
                if q.is_zero() {
                    None
                } else {
                    Some(sexp_value(p)? / q)
                }
            }
            _ => None,
        },
    }
}

/// Numeric constants of a `(model ...)` or bare `(...)` model block.
/// Irrational or otherwise unreadable values are left out.
pub fn parse_model(text: &str) -> Option<State> {
    let exps = parse_sexps(text)?;
    let mut out = State::new();
    for e in exps {
        let SExp::List(items) = e else { continue };
        let body = match items.first() {
            Some(SExp::Atom(m)) if m == "model" => &items[1..],
            _ => &items[..],
        };
        for def in body {
            let SExp::List(parts) = def else { continue };
            if let [SExp::Atom(kw), SExp::Atom(name), SExp::List(args), _sort, value] = parts.as_slice() {
                if kw == "define-fun" && args.is_empty() {
                    if let Some(v) = sexp_value(value) {
                        out.insert(name.clone(), v);
                    }
                }
            }
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{rat, ratio};
    use crate::frontend::parse_formula;

    #[test]
    fn rationals_print_in_smt_form() {
        assert_eq!(smt_rational(&rat(5)), "5");
        assert_eq!(smt_rational(&rat(-5)), "(- 5)");
        assert_eq!(smt_rational(&ratio(1, 3)), "(/ 1 3)");
        assert_eq!(smt_rational(&ratio(-2, 3)), "(- (/ 2 3))");
    }

    #[test]
    fn symbols_are_quoted_when_needed() {
        assert_eq!(symbol("t"), "t");
        assert_eq!(symbol("t'"), "|t'|");
        assert_eq!(symbol("and"), "|and|");
    }

    #[test]
    fn logic_follows_degree_and_domain() {
        let lin = Prop::from_formula(&parse_formula("x + 2 * y > 0").unwrap(), &BTreeMap::new());
        let quad = Prop::from_formula(&parse_formula("x * y > 0").unwrap(), &BTreeMap::new());
        let by_var = Prop::from_formula(&parse_formula("x / y > 0").unwrap(), &BTreeMap::new());
        assert_eq!(logic_for(&lin, Domain::Real), "QF_LRA");
        assert_eq!(logic_for(&quad, Domain::Real), "QF_NRA");
        assert_eq!(logic_for(&by_var, Domain::Real), "QF_NRA");
        assert_eq!(logic_for(&lin, Domain::Int), "QF_LIA");
        assert_eq!(logic_for(&quad, Domain::Int), "QF_NIA");
    }

    #[test]
    fn script_shape() {
        let p = Prop::from_formula(&parse_formula("x > 0 && x < 0").unwrap(), &BTreeMap::new());
        assert_eq!(
            emit_smtlib(&p, Domain::Real),
            "(set-logic QF_LRA)\n(declare-fun x () Real)\n(assert (and (> x 0) (< x 0)))\n(check-sat)\n(get-model)\n"
        );
    }

    #[test]
    fn models_in_both_layouts() {
        let old = "(model\n  (define-fun t () Real 10.0)\n  (define-fun u () Real (- 2.5))\n  (define-fun |t'| () Real (/ 1.0 3.0))\n)";
        let m = parse_model(old).unwrap();
        assert_eq!(m["t"], rat(10));
        assert_eq!(m["u"], ratio(-5, 2));
        assert_eq!(m["t'"], ratio(1, 3));
        let new = "(\n  (define-fun nd0 () Bool\n    true)\n  (define-fun x () Int\n    (- 4))\n  (define-fun r () Real\n    (root-obj (+ (^ x 2) (- 2)) 1))\n)";
        let m = parse_model(new).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m["x"], rat(-4));
        assert!(parse_model("((define-fun").is_none());
    }

    #[test]
    fn ite_terms_evaluate_by_branch() {
        let t = Term::Ite(
            Box::new(Prop::Var("c".into())),
            Box::new(Term::Const(rat(1))),
            Box::new(Term::Pow(Box::new(Term::Var("x".into())), 2)),
        );
        let mut a = Assignment::default();
        a.nums.insert("x".into(), rat(3));
        a.bools.insert("c".into(), false);
        assert_eq!(t.eval(&a), Ok(rat(9)));
        a.bools.insert("c".into(), true);
        assert_eq!(t.eval(&a), Ok(rat(1)));
        let mut s = String::new();
        t.smt(&mut s);
        assert_eq!(s, "(ite c 1 (* x x))");
    }
}
