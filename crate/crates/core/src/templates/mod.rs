//! Candidate invariant shapes with learnable coefficient slots.
//!
//! A template atom compares `c_1*t_1 + ... + c_n*t_n + b` against zero, where
//! each `t_i` is a monomial over program variables and every coefficient and
//! the bias is either learnable or fixed to an exact rational.

mod enumerate;
mod strengthen;

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::ast::{fmt_rational, CmpOp, Expr, Formula, Rational};
use crate::frontend::print_expr;

pub use enumerate::{enumerate, equality_nullity, prefilter, Family, PlanConfig, PlanError, TemplatePlan};
pub use strengthen::{reconstruct, side_condition, strengthen, Discharge, ReconstructError, StrengthenedProblem};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Slot {
    Learnable,
    Fixed(Rational),
}

impl Slot {
    pub fn is_learnable(&self) -> bool {
        matches!(self, Slot::Learnable)
    }
}

/// Relation between an atom's linear form and zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomKind {
    Eq,
    Ge,
    Gt,
    Le,
    Lt,
}

impl AtomKind {
    pub fn cmp_op(self) -> CmpOp {
        match self {
            AtomKind::Eq => CmpOp::Eq,
            AtomKind::Ge => CmpOp::Ge,
            AtomKind::Gt => CmpOp::Gt,
            AtomKind::Le => CmpOp::Le,
            AtomKind::Lt => CmpOp::Lt,
        }
    }

    pub fn from_cmp(op: CmpOp) -> Option<AtomKind> {
        Some(match op {
            CmpOp::Eq => AtomKind::Eq,
            CmpOp::Ge => AtomKind::Ge,
            CmpOp::Gt => AtomKind::Gt,
            CmpOp::Le => AtomKind::Le,
            CmpOp::Lt => AtomKind::Lt,
            CmpOp::Ne => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TemplateAtom {
    pub kind: AtomKind,
    pub terms: Vec<(Slot, Expr)>,
    pub bias: Slot,
}

impl TemplateAtom {
    /// An atom with no learnable slots.
    pub fn fixed(kind: AtomKind, terms: Vec<(Rational, Expr)>, bias: Rational) -> Self {
        TemplateAtom {
            kind,
            terms: terms.into_iter().map(|(c, t)| (Slot::Fixed(c), t)).collect(),
            bias: Slot::Fixed(bias),
        }
    }

    /// Fixed coefficients and a learnable bias.
    pub fn bound(kind: AtomKind, terms: Vec<(Rational, Expr)>) -> Self {
        TemplateAtom {
            kind,
            terms: terms.into_iter().map(|(c, t)| (Slot::Fixed(c), t)).collect(),
            bias: Slot::Learnable,
        }
    }

    /// Every coefficient and the bias learnable.
    pub fn linear(kind: AtomKind, terms: Vec<Expr>) -> Self {
        TemplateAtom {
            kind,
            terms: terms.into_iter().map(|t| (Slot::Learnable, t)).collect(),
            bias: Slot::Learnable,
        }
    }

    pub fn num_learnable(&self) -> usize {
        self.terms.iter().filter(|(s, _)| s.is_learnable()).count() + usize::from(self.bias.is_learnable())
    }

    pub fn has_learnable_coeffs(&self) -> bool {
        self.terms.iter().any(|(s, _)| s.is_learnable())
    }

    /// The concrete formula `sum c_i*t_i  op  -b`, folded to a constant when
    /// every coefficient is zero.
    pub fn instantiate(&self, coeffs: &[Rational], bias: &Rational) -> Formula {
        assert_eq!(coeffs.len(), self.terms.len(), "coefficient count mismatch");
        let lhs = linear_expr(coeffs.iter().zip(self.terms.iter().map(|(_, t)| t)));
        let rhs = -bias.clone();
        match lhs {
            None => {
                if self.kind.cmp_op().holds(&Rational::zero(), &rhs) {
                    Formula::True
                } else {
                    Formula::False
                }
            }
            Some(lhs) => Formula::cmp(self.kind.cmp_op(), lhs, Expr::Const(rhs)),
        }
    }

    /// Values of the fixed slots, `None` where a slot is learnable.
    pub fn fixed_values(&self) -> (Vec<Option<Rational>>, Option<Rational>) {
        let get = |s: &Slot| match s {
            Slot::Fixed(c) => Some(c.clone()),
            Slot::Learnable => None,
        };
        (self.terms.iter().map(|(s, _)| get(s)).collect(), get(&self.bias))
    }
}

/// `c_1*t_1 + ...` with unit coefficients elided and negative ones
/// subtracted. `None` when every coefficient is zero.
pub fn linear_expr<'a>(parts: impl IntoIterator<Item = (&'a Rational, &'a Expr)>) -> Option<Expr> {
    let mut acc: Option<Expr> = None;
    for (c, t) in parts {
        if c.is_zero() {
            continue;
        }
        let mag = c.abs();
        let scaled = if mag.is_one() { t.clone() } else { Expr::mul(Expr::Const(mag), t.clone()) };
        acc = Some(match acc {
            None if c.is_negative() => Expr::mul(Expr::Const(c.clone()), t.clone()),
            None => scaled,
            Some(a) if c.is_negative() => Expr::sub(a, scaled),
            Some(a) => Expr::add(a, scaled),
        });
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TemplateFormula {
    True,
    False,
    Atom(TemplateAtom),
    Not(Box<TemplateFormula>),
    And(Vec<TemplateFormula>),
    Or(Vec<TemplateFormula>),
}

impl TemplateFormula {
    /// Atoms in depth-first, left-to-right order. Atom indices used by the
    /// graph and the trainer refer to this order.
    pub fn atoms(&self) -> Vec<&TemplateAtom> {
        let mut out = Vec::new();
        fn go<'a>(f: &'a TemplateFormula, out: &mut Vec<&'a TemplateAtom>) {
            match f {
                TemplateFormula::True | TemplateFormula::False => {}
                TemplateFormula::Atom(a) => out.push(a),
                TemplateFormula::Not(g) => go(g, out),
                TemplateFormula::And(gs) | TemplateFormula::Or(gs) => gs.iter().for_each(|g| go(g, out)),
            }
        }
        go(self, &mut out);
        out
    }

    /// Replaces atoms in depth-first order with `leaf(index, atom)`.
    pub fn map_atoms(&self, leaf: &mut dyn FnMut(usize, &TemplateAtom) -> Formula) -> Formula {
        fn go(f: &TemplateFormula, next: &mut usize, leaf: &mut dyn FnMut(usize, &TemplateAtom) -> Formula) -> Formula {
            match f {
                TemplateFormula::True => Formula::True,
                TemplateFormula::False => Formula::False,
                TemplateFormula::Atom(a) => {
                    let i = *next;
                    *next += 1;
                    leaf(i, a)
                }
                TemplateFormula::Not(g) => match go(g, next, leaf) {
                    Formula::True => Formula::False,
                    Formula::False => Formula::True,
                    other => Formula::not(other),
                },
                TemplateFormula::And(gs) => Formula::and_all(gs.iter().map(|g| go(g, next, leaf)).collect::<Vec<_>>()),
                TemplateFormula::Or(gs) => Formula::or_all(gs.iter().map(|g| go(g, next, leaf)).collect::<Vec<_>>()),
            }
        }
        go(self, &mut 0, leaf)
    }

    pub fn num_learnable(&self) -> usize {
        self.atoms().iter().map(|a| a.num_learnable()).sum()
    }

    pub fn is_fixed(&self) -> bool {
        self.num_learnable() == 0
    }

    pub fn has_disjunction(&self) -> bool {
        match self {
            TemplateFormula::True | TemplateFormula::False | TemplateFormula::Atom(_) => false,
            TemplateFormula::Or(_) => true,
            TemplateFormula::Not(g) => g.has_disjunction(),
            TemplateFormula::And(gs) => gs.iter().any(TemplateFormula::has_disjunction),
        }
    }

    /// A fully fixed template for a concrete formula. Each comparison
    /// `l op r` becomes the atom `1*(l - r) op 0`; `!=` becomes a negated
    /// equality.
    pub fn from_formula(f: &Formula) -> TemplateFormula {
        match f {
            Formula::True => TemplateFormula::True,
            Formula::False => TemplateFormula::False,
            Formula::Cmp(op, l, r) => {
                let diff = Expr::sub(l.clone(), r.clone());
                let atom = |k| TemplateFormula::Atom(TemplateAtom::fixed(k, vec![(Rational::one(), diff.clone())], Rational::zero()));
                match AtomKind::from_cmp(*op) {
                    Some(k) => atom(k),
                    None => TemplateFormula::Not(Box::new(atom(AtomKind::Eq))),
                }
            }
            Formula::Not(g) => TemplateFormula::Not(Box::new(TemplateFormula::from_formula(g))),
            Formula::And(gs) => TemplateFormula::And(gs.iter().map(TemplateFormula::from_formula).collect()),
            Formula::Or(gs) => TemplateFormula::Or(gs.iter().map(TemplateFormula::from_formula).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Template {
    pub formula: TemplateFormula,
    pub family: Family,
}

impl Template {
    pub fn new(formula: TemplateFormula, family: Family) -> Self {
        Template { formula, family }
    }

    pub fn num_learnable(&self) -> usize {
        self.formula.num_learnable()
    }

    /// The formula with every slot fixed. `None` if any slot is learnable.
    pub fn as_fixed_formula(&self) -> Option<Formula> {
        if !self.formula.is_fixed() {
            return None;
        }
        Some(self.formula.map_atoms(&mut |_, a| {
            let (cs, b) = a.fixed_values();
            let cs: Vec<Rational> = cs.into_iter().map(Option::unwrap).collect();
            a.instantiate(&cs, &b.unwrap())
        }))
    }
}

impl fmt::Display for TemplateAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut w = 0usize;
        let mut parts = Vec::new();
        for (slot, t) in &self.terms {
            let c = match slot {
                Slot::Learnable => {
                    w += 1;
                    format!("?w{}", w - 1)
                }
                Slot::Fixed(c) => format!("({})", fmt_rational(c)),
            };
            parts.push(format!("{c}*{}", paren(t)));
        }
        parts.push(match &self.bias {
            Slot::Learnable => "?b".to_string(),
            Slot::Fixed(c) => format!("({})", fmt_rational(c)),
        });
        write!(f, "{} {} 0", parts.join(" + "), self.kind.cmp_op().symbol())
    }
}

fn paren(t: &Expr) -> String {
    match t {
        Expr::Var(_) | Expr::Pow(..) => print_expr(t),
        _ => format!("({})", print_expr(t)),
    }
}

impl fmt::Display for TemplateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateFormula::True => f.write_str("true"),
            TemplateFormula::False => f.write_str("false"),
            TemplateFormula::Atom(a) => write!(f, "{a}"),
            TemplateFormula::Not(g) => write!(f, "!({g})"),
            TemplateFormula::And(gs) | TemplateFormula::Or(gs) => {
                let sep = if matches!(self, TemplateFormula::And(_)) { " && " } else { " || " };
                let parts: Vec<String> = gs.iter().map(|g| format!("({g})")).collect();
                f.write_str(&parts.join(sep))
            }
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.family, self.formula)
    }
}
