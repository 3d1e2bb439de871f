use std::collections::BTreeSet;
use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use super::{AtomKind, Template, TemplateAtom, TemplateFormula};
use crate::ast::{CmpOp, Expr, Formula, Program, Rational, State};
use crate::frontend::{var_const_atom, StaticFacts};
use crate::linalg::rank;
use crate::tracer::Trace;

/// Snapshots used by the exact rank check.
pub const RANK_SAMPLE: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Static,
    Bound,
    Equality,
    Conjunction,
    Disjunction,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Static => "static",
            Family::Bound => "bound",
            Family::Equality => "equality",
            Family::Conjunction => "conjunction",
            Family::Disjunction => "disjunction",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanConfig {
    pub max_clauses: usize,
    pub max_degree: u32,
    /// Emit only templates without learnable slots.
    pub static_only: bool,
    pub include_disjunctions: bool,
    pub max_templates: usize,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig { max_clauses: 3, max_degree: 2, static_only: false, include_disjunctions: true, max_templates: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("template plan is empty under the given configuration")]
    Empty,
    #[error("trace is empty")]
    EmptyTrace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplatePlan {
    pub templates: Vec<Template>,
}

impl TemplatePlan {
    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// One template per line.
    pub fn dump(&self) -> String {
        self.templates.iter().map(|t| format!("{t}\n")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Static,
    /// Learnable bound on a single variable. At top level it snaps to the
    /// same tightest data bound a static piece already supplies, so it is
    /// only emitted on its own.
    VarBound,
    Bound,
    LinearEq,
    PolyEq,
}

#[derive(Debug, Clone)]
struct Piece {
    atom: TemplateAtom,
    role: Role,
}

fn state_value(e: &Expr, s: &State) -> Option<Rational> {
    e.eval(s).ok()
}

fn atom_holds(a: &TemplateAtom, s: &State) -> bool {
    let (cs, b) = a.fixed_values();
    let (Some(b), true) = (b, cs.iter().all(Option::is_some)) else { return true };
    let mut acc = b;
    for (c, (_, t)) in cs.iter().zip(&a.terms) {
        match state_value(t, s) {
            Some(v) => acc += c.clone().unwrap() * v,
            None => return false,
        }
    }
    a.kind.cmp_op().holds(&acc, &Rational::zero())
}

/// `l op r` as a fixed atom, keeping a constant right-hand side as the bias.
fn comparison_atom(kind: AtomKind, l: &Expr, r: &Expr) -> TemplateAtom {
    match r {
        Expr::Const(c) => TemplateAtom::fixed(kind, vec![(Rational::one(), l.clone())], -c.clone()),
        _ => TemplateAtom::fixed(kind, vec![(Rational::one(), Expr::sub(l.clone(), r.clone()))], Rational::zero()),
    }
}

fn loop_atoms(lc: &Formula) -> Vec<(CmpOp, Expr, Expr)> {
    fn go(f: &Formula, out: &mut Vec<(CmpOp, Expr, Expr)>) {
        match f {
            Formula::Cmp(op, l, r) => out.push((*op, l.clone(), r.clone())),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| go(g, out)),
            Formula::Not(g) => go(g, out),
            Formula::True | Formula::False => {}
        }
    }
    let mut out = Vec::new();
    go(&lc.nnf(), &mut out);
    out
}

fn static_pieces(p: &Program, facts: &StaticFacts, heads: &[State]) -> Vec<TemplateAtom> {
    let mut out = Vec::new();
    for (v, c) in &facts.initialized_consts {
        out.push(TemplateAtom::fixed(AtomKind::Eq, vec![(Rational::one(), Expr::var(v))], -c.clone()));
    }
    for (op, l, r) in loop_atoms(&facts.loop_cond) {
        let kind = match op {
            CmpOp::Lt | CmpOp::Le => AtomKind::Le,
            CmpOp::Gt | CmpOp::Ge => AtomKind::Ge,
            CmpOp::Eq | CmpOp::Ne => continue,
        };
        out.push(comparison_atom(kind, &l, &r));
    }
    for atom in p.pre.conjuncts() {
        if let Formula::Cmp(op, l, r) = atom {
            if var_const_atom(atom).is_some() {
                continue;
            }
            if let Some(kind) = AtomKind::from_cmp(*op) {
                out.push(comparison_atom(kind, l, r));
            }
        }
    }
    // Tightest data-consistent bound per variable drawn from program constants.
    if !heads.is_empty() {
        for v in &p.vars {
            if facts.initialized_consts.contains_key(v) {
                continue;
            }
            let x = Expr::var(v);
            let vals: Vec<Rational> = heads.iter().filter_map(|s| s.get(v).cloned()).collect();
            let (Some(lo), Some(hi)) = (vals.iter().min(), vals.iter().max()) else { continue };
            if let Some(c) = facts.constants.iter().filter(|c| *c <= lo).max() {
                out.push(TemplateAtom::fixed(AtomKind::Ge, vec![(Rational::one(), x.clone())], -c.clone()));
            }
            if let Some(c) = facts.constants.iter().filter(|c| *c >= hi).min() {
                out.push(TemplateAtom::fixed(AtomKind::Le, vec![(Rational::one(), x.clone())], -c.clone()));
            }
        }
    }
    let mut seen = BTreeSet::new();
    out.retain(|a| heads.iter().all(|s| atom_holds(a, s)) && seen.insert(format!("{a}")));
    out
}

/// Variables that change, in declaration order.
fn moving_vars(p: &Program, facts: &StaticFacts) -> Vec<String> {
    p.vars.iter().filter(|v| !facts.initialized_consts.contains_key(*v)).cloned().collect()
}

fn monomials(vars: &[String], degree: u32) -> Vec<Expr> {
    let mut out: Vec<Expr> = vars.iter().map(|v| Expr::var(v)).collect();
    if degree >= 2 {
        for i in 0..vars.len() {
            out.push(Expr::pow(Expr::var(&vars[i]), 2));
            for j in i + 1..vars.len() {
                out.push(Expr::mul(Expr::var(&vars[i]), Expr::var(&vars[j])));
            }
        }
    }
    out
}

/// Dimension of the space of `(w, b)` with `w.terms(s) + b = 0` on every
/// sampled snapshot.
pub fn equality_nullity(terms: &[Expr], heads: &[State]) -> usize {
    let step = (heads.len() / RANK_SAMPLE).max(1);
    let rows: Vec<Vec<Rational>> = heads
        .iter()
        .step_by(step)
        .take(RANK_SAMPLE)
        .filter_map(|s| {
            let mut row: Vec<Rational> = terms.iter().map(|t| state_value(t, s)).collect::<Option<_>>()?;
            row.push(Rational::one());
            Some(row)
        })
        .collect();
    terms.len() + 1 - rank(&rows)
}

fn conj(parts: Vec<TemplateFormula>) -> TemplateFormula {
    if parts.len() == 1 {
        parts.into_iter().next().unwrap()
    } else {
        TemplateFormula::And(parts)
    }
}

fn atom(p: &Piece) -> TemplateFormula {
    TemplateFormula::Atom(p.atom.clone())
}

fn family_of(pieces: &[&Piece], disjunctive: bool) -> Family {
    if disjunctive {
        return Family::Disjunction;
    }
    match pieces {
        [one] => match one.role {
            Role::Static => Family::Static,
            Role::Bound | Role::VarBound => Family::Bound,
            Role::LinearEq | Role::PolyEq => Family::Equality,
        },
        _ if pieces.iter().all(|p| p.role == Role::Static) => Family::Static,
        _ => Family::Conjunction,
    }
}

fn sort_key(t: &Template) -> (usize, bool, bool, usize) {
    let atoms = t.formula.atoms();
    let has_ineq = atoms.iter().any(|a| a.kind != AtomKind::Eq);
    (t.num_learnable(), has_ineq, t.formula.has_disjunction(), atoms.len())
}

/// Builds the ordered template plan for `p`.
pub fn enumerate(p: &Program, facts: &StaticFacts, trace: &Trace, cfg: &PlanConfig) -> Result<TemplatePlan, PlanError> {
    if trace.is_empty() {
        return Err(PlanError::EmptyTrace);
    }
    let heads = trace.distinct_head_states();
    let mut pieces: Vec<Piece> =
        static_pieces(p, facts, &heads).into_iter().map(|atom| Piece { atom, role: Role::Static }).collect();

    let vars = moving_vars(p, facts);
    let mut lin_nullity = 0;
    if !cfg.static_only {
        for v in &vars {
            for kind in [AtomKind::Ge, AtomKind::Le] {
                pieces.push(Piece { atom: TemplateAtom::bound(kind, vec![(Rational::one(), Expr::var(v))]), role: Role::VarBound });
            }
        }
        for (op, l, r) in loop_atoms(&facts.loop_cond) {
            let diff = Expr::sub(l.clone(), r.clone());
            let mut vs = Vec::new();
            diff.collect_vars(&mut vs);
            vs.sort();
            vs.dedup();
            if vs.len() < 2 || matches!(op, CmpOp::Eq | CmpOp::Ne) {
                continue;
            }
            for kind in [AtomKind::Ge, AtomKind::Le] {
                pieces.push(Piece { atom: TemplateAtom::bound(kind, vec![(Rational::one(), diff.clone())]), role: Role::Bound });
            }
        }
        if !vars.is_empty() {
            let lin = monomials(&vars, 1);
            lin_nullity = equality_nullity(&lin, &heads);
            pieces.push(Piece { atom: TemplateAtom::linear(AtomKind::Eq, lin), role: Role::LinearEq });
            if cfg.max_degree >= 2 && p.max_degree().is_some() {
                let poly = monomials(&vars, cfg.max_degree.min(2));
                if equality_nullity(&poly, &heads) > lin_nullity {
                    pieces.push(Piece { atom: TemplateAtom::linear(AtomKind::Eq, poly), role: Role::PolyEq });
                }
            }
        }
    }

    let mut seen = BTreeSet::new();
    let mut out: Vec<Template> = Vec::new();
    let mut emit = |t: Template, out: &mut Vec<Template>| {
        if seen.insert(t.formula.to_string()) {
            out.push(t);
        }
    };

    // Conjunctions: multisets of pieces where only the linear equality may repeat.
    let k_max = cfg.max_clauses.max(1);
    let n = pieces.len();
    let mut stack: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    while let Some(idx) = stack.pop() {
        let chosen: Vec<&Piece> = idx.iter().map(|&i| &pieces[i]).collect();
        let lin_copies = chosen.iter().filter(|p| p.role == Role::LinearEq).count();
        let valid = lin_copies <= lin_nullity.max(1)
            && !(lin_copies > 0 && chosen.iter().any(|p| p.role == Role::PolyEq))
            && (chosen.len() == 1 || chosen.iter().all(|p| p.role != Role::VarBound));
        if !valid {
            continue;
        }
        let f = conj(chosen.iter().map(|p| atom(p)).collect());
        emit(Template::new(f, family_of(&chosen, false)), &mut out);
        if idx.len() < k_max {
            let last = *idx.last().unwrap();
            for j in last..n {
                if j == last && pieces[j].role != Role::LinearEq {
                    continue;
                }
                let mut next = idx.clone();
                next.push(j);
                stack.push(next);
            }
        }
    }

    // Disjunctions of two equalities, optionally conjoined with one more piece.
    if cfg.include_disjunctions && !cfg.static_only && k_max >= 2 {
        let eqs: Vec<&Piece> = pieces.iter().filter(|p| matches!(p.role, Role::LinearEq)).collect();
        for e in &eqs {
            let disj = TemplateFormula::Or(vec![atom(e), atom(e)]);
            emit(Template::new(disj.clone(), Family::Disjunction), &mut out);
            if k_max >= 3 {
                for q in pieces.iter().filter(|p| matches!(p.role, Role::Static | Role::Bound)) {
                    let f = TemplateFormula::And(vec![disj.clone(), atom(q)]);
                    emit(Template::new(f, Family::Disjunction), &mut out);
                }
            }
        }
    }

    out.sort_by_key(sort_key);
    out.truncate(cfg.max_templates);
    if out.is_empty() {
        return Err(PlanError::Empty);
    }
    Ok(TemplatePlan { templates: out })
}

/// Whether `t` can still describe the trace. Fully fixed templates are
/// evaluated on every snapshot; learnable conjunctions of equalities are kept
/// unless the snapshot matrix leaves no room for a nontrivial equality.
pub fn prefilter(t: &Template, trace: &Trace) -> bool {
    if trace.is_empty() {
        return true;
    }
    if let Some(f) = t.as_fixed_formula() {
        return trace.head_states().all(|s| f.eval(s).unwrap_or(false));
    }
    let heads: Vec<State> = trace.distinct_head_states();
    conjunct_equalities(&t.formula).iter().all(|terms| equality_nullity(terms, &heads) >= 1)
}

/// Term lists of fully learnable equality atoms that appear as top-level
/// conjuncts.
fn conjunct_equalities(f: &TemplateFormula) -> Vec<Vec<Expr>> {
    let parts: Vec<&TemplateFormula> = match f {
        TemplateFormula::And(gs) => gs.iter().collect(),
        other => vec![other],
    };
    parts
        .into_iter()
        .filter_map(|g| match g {
            TemplateFormula::Atom(a) if a.kind == AtomKind::Eq && a.terms.iter().all(|(s, _)| s.is_learnable()) => {
                Some(a.terms.iter().map(|(_, t)| t.clone()).collect())
            }
            _ => None,
        })
        .collect()
}
