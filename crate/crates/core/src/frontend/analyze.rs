use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};

use crate::ast::{CmpOp, Expr, Formula, Program, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bound {
    pub value: Rational,
    pub strict: bool,
}

/// Interval a precondition confines one variable to; open ends are `None`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interval {
    pub lo: Option<Bound>,
    pub hi: Option<Bound>,
}

impl Interval {
    pub fn point(&self) -> Option<&Rational> {
        match (&self.lo, &self.hi) {
            (Some(l), Some(h)) if l.value == h.value && !l.strict && !h.strict => Some(&l.value),
            _ => None,
        }
    }

    fn tighten_lo(&mut self, b: Bound) {
        let replace = match &self.lo {
            None => true,
            Some(cur) => b.value > cur.value || (b.value == cur.value && b.strict),
        };
        if replace {
            self.lo = Some(b);
        }
    }

    fn tighten_hi(&mut self, b: Bound) {
        let replace = match &self.hi {
            None => true,
            Some(cur) => b.value < cur.value || (b.value == cur.value && b.strict),
        };
        if replace {
            self.hi = Some(b);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticFacts {
    pub constants: BTreeSet<Rational>,
    pub initialized_consts: BTreeMap<String, Rational>,
    pub loop_cond: Formula,
    pub pre_bounds: BTreeMap<String, Interval>,
}

/// `v op c` with the variable on the left, when the atom has that shape.
pub fn var_const_atom(f: &Formula) -> Option<(&str, CmpOp, &Rational)> {
    match f {
        Formula::Cmp(op, Expr::Var(v), Expr::Const(c)) => Some((v, *op, c)),
        Formula::Cmp(op, Expr::Const(c), Expr::Var(v)) => Some((v, op.flip(), c)),
        _ => None,
    }
}

/// Per-variable intervals implied by the top-level conjuncts of `pre`.
pub fn interval_bounds(pre: &Formula) -> BTreeMap<String, Interval> {
    let mut out: BTreeMap<String, Interval> = BTreeMap::new();
    for atom in pre.conjuncts() {
        let Some((v, op, c)) = var_const_atom(atom) else { continue };
        let iv = out.entry(v.to_string()).or_default();
        let b = |strict| Bound { value: c.clone(), strict };
        match op {
            CmpOp::Eq => {
                iv.tighten_lo(b(false));
                iv.tighten_hi(b(false));
            }
            CmpOp::Ge => iv.tighten_lo(b(false)),
            CmpOp::Gt => iv.tighten_lo(b(true)),
            CmpOp::Le => iv.tighten_hi(b(false)),
            CmpOp::Lt => iv.tighten_hi(b(true)),
            CmpOp::Ne => {}
        }
    }
    out.retain(|_, iv| iv.lo.is_some() || iv.hi.is_some());
    out
}

pub fn analyze(p: &Program) -> StaticFacts {
    let mut constants = p.literals();
    constants.insert(Rational::zero());
    constants.insert(Rational::one());

    let assigned = p.assigned_vars();
    let mut initialized_consts = BTreeMap::new();
    for atom in p.pre.conjuncts() {
        if let Some((v, CmpOp::Eq, c)) = var_const_atom(atom) {
            if !assigned.iter().any(|a| a == v) {
                initialized_consts.insert(v.to_string(), c.clone());
            }
        }
    }

    StaticFacts {
        constants,
        initialized_consts,
        loop_cond: p.loop_cond.clone(),
        pre_bounds: interval_bounds(&p.pre),
    }
}
