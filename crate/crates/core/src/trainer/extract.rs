//! Reading exact rational formulas back out of trained parameters.
//!
//! Every atom gets a short list of exact candidates derived from its learned
//! weights and from the data. Combinations are searched from the most to the
//! least preferred, and the first one that holds on every snapshot wins.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use super::TrainedModel;
use crate::ast::{rat_to_f64, Expr, Formula, Rational, State};
use crate::clogic::{ClnGraph, NodeOp};
use crate::linalg::{best_rational, integer_vector, null_space, rref_exact, rref_f64};
use crate::templates::{AtomKind, TemplateAtom, TemplateFormula};

/// Learned rows closer than this (after normalization) count as dependent.
const RANK_TOL: f64 = 0.05;
/// Largest distance between a learned row and the exact null space for the
/// exact basis to be trusted.
const SPAN_RESIDUAL: f64 = 0.05;
const NEAREST_BIASES: usize = 3;
const MAX_DIRECTIONS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionConfig {
    pub max_denominator: u64,
    /// Weights below this fraction of the largest weight are set to zero.
    pub zero_tolerance: f64,
    pub max_combinations: usize,
    /// Absolute slack of the floating-point screen run before exact checks.
    pub screen_tolerance: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig { max_denominator: 20, zero_tolerance: 0.02, max_combinations: 4000, screen_tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("graph has {graph} atoms but the template has {template}")]
    AtomMismatch { graph: usize, template: usize },
    #[error("no candidate among {tried} combinations holds on all {points} snapshots")]
    NoConsistentCandidate { tried: usize, points: usize },
}

/// Snaps a weight vector to small coprime integers: divide by the largest
/// magnitude, zero out entries under the tolerance, approximate the rest with
/// denominators up to `max_denominator`, then clear denominators. The first
/// nonzero entry is made positive.
pub fn integer_direction(w: &[f64], cfg: &ExtractionConfig) -> Option<Vec<BigInt>> {
    let r = snap(w, w.len(), max_abs(w)?, cfg.max_denominator, cfg.zero_tolerance)?;
    Some(integer_vector(&r))
}

fn max_abs(w: &[f64]) -> Option<f64> {
    let m = w.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    (m > 0.0 && m.is_finite()).then_some(m)
}

/// Rationalizes `w / scale`, zeroing entries small relative to the largest of
/// the first `lead` entries.
fn snap(w: &[f64], lead: usize, scale: f64, max_den: u64, tol: f64) -> Option<Vec<Rational>> {
    let m = max_abs(&w[..lead])?;
    let out: Vec<Rational> = w
        .iter()
        .map(|x| if x.abs() < tol * m { Some(Rational::zero()) } else { best_rational(x / scale, max_den) })
        .collect::<Option<_>>()?;
    out[..lead].iter().any(|x| !x.is_zero()).then_some(out)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn ints_to_f64(v: &[BigInt]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
}

/// Integer directions near `w[..lead]`, best aligned first. The sign of `w`
/// is preserved.
fn directions(w: &[f64], lead: usize, cfg: &ExtractionConfig) -> Vec<Vec<BigInt>> {
    let head = &w[..lead];
    let Some(big) = max_abs(head) else { return Vec::new() };
    let small = head.iter().map(|x| x.abs()).filter(|x| *x >= cfg.zero_tolerance * big).fold(big, f64::min);
    let mut seen = BTreeSet::new();
    let mut out: Vec<(f64, BigInt, Vec<BigInt>)> = Vec::new();
    for scale in [big, small] {
        for d in 1..=cfg.max_denominator {
            let Some(r) = snap(head, lead, scale, d, cfg.zero_tolerance) else { continue };
            let mut ints = integer_vector(&r);
            let f = ints_to_f64(&ints);
            if f.iter().zip(head).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
                ints.iter_mut().for_each(|x| *x = -&*x);
            }
            if seen.insert(ints.clone()) {
                let err = 1.0 - cosine(&ints_to_f64(&ints), head);
                let size: BigInt = ints.iter().map(|x| x.abs()).sum();
                out.push((err, size, ints));
            }
        }
    }
    out.sort_by(|a, b| {
        let ka = (a.0 * 1e6).round();
        let kb = (b.0 * 1e6).round();
        ka.total_cmp(&kb).then_with(|| a.1.cmp(&b.1))
    });
    out.into_iter().take(MAX_DIRECTIONS).map(|(_, _, v)| v).collect()
}

struct Data<'a> {
    states: &'a [State],
    /// Exact term values, `[snapshot][slot]`.
    exact: Vec<Vec<Rational>>,
}

impl Data<'_> {
    fn dot(&self, slots: &[usize], c: &[Rational], j: usize) -> Rational {
        slots.iter().zip(c).map(|(&s, c)| c * &self.exact[j][s]).sum()
    }

    fn values(&self, slots: &[usize], c: &[Rational]) -> Vec<Rational> {
        (0..self.states.len()).map(|j| self.dot(slots, c, j)).collect()
    }
}

/// Raw-space coefficients and bias of atom `a`, undoing the input gains.
fn raw_weights(g: &ClnGraph, a: usize) -> (Vec<f64>, f64) {
    let nodes = &g.atoms[a];
    let lin = &g.nodes[nodes.lincomb];
    let NodeOp::LinComb { gains, .. } = lin.op else { unreachable!("atom without linear node") };
    let gain = &g.gains[gains];
    let n = nodes.term_slots.len();
    let value = |node: usize| match g.nodes[node].op {
        NodeOp::Const(c) => c,
        NodeOp::Param { index } => g.params[index],
        _ => f64::NAN,
    };
    let bias = gain[n] * value(lin.inputs[2 * n]);
    if nodes.coeff_params.iter().any(Option::is_some) {
        ((0..n).map(|i| gain[i] * value(lin.inputs[2 * i])).collect(), bias)
    } else {
        let g0 = if n > 0 && gain[0] != 0.0 { gain[0] } else { 1.0 };
        ((0..n).map(|i| value(lin.inputs[2 * i])).collect(), bias / g0)
    }
}

fn top_level(t: &TemplateFormula) -> Vec<bool> {
    let mut out = Vec::new();
    fn mark(f: &TemplateFormula, top: bool, out: &mut Vec<bool>) {
        match f {
            TemplateFormula::True | TemplateFormula::False => {}
            TemplateFormula::Atom(_) => out.push(top),
            TemplateFormula::Not(g) => mark(g, false, out),
            TemplateFormula::And(gs) => gs.iter().for_each(|g| mark(g, top, out)),
            TemplateFormula::Or(gs) => gs.iter().for_each(|g| mark(g, false, out)),
        }
    }
    mark(t, true, &mut out);
    out
}

fn rationalize(x: f64, cfg: &ExtractionConfig) -> Option<Rational> {
    best_rational(x, cfg.max_denominator)
}

/// Up to `k` distinct values of `-values` nearest to `target`.
fn nearest_biases(values: &[Rational], target: f64, k: usize) -> Vec<Rational> {
    let distinct: BTreeSet<Rational> = values.iter().map(|v| -v.clone()).collect();
    let mut v: Vec<Rational> = distinct.into_iter().collect();
    v.sort_by(|a, b| (rat_to_f64(a) - target).abs().total_cmp(&(rat_to_f64(b) - target).abs()));
    v.truncate(k);
    v
}

/// Smallest bias making `sum c t + b  kind  0` hold on every value.
fn tight_bias(kind: AtomKind, values: &[Rational]) -> Option<Rational> {
    let min = values.iter().min()?;
    let max = values.iter().max()?;
    Some(match kind {
        AtomKind::Ge => -min.clone(),
        AtomKind::Gt => Rational::from_integer(BigInt::from(1)) - min,
        AtomKind::Le => -max.clone(),
        AtomKind::Lt => -max.clone() - Rational::from_integer(BigInt::from(1)),
        AtomKind::Eq => {
            if min == max {
                -min.clone()
            } else {
                return None;
            }
        }
    })
}

fn push_unique(out: &mut Vec<Formula>, f: Formula) {
    if !out.contains(&f) {
        out.push(f);
    }
}

fn to_rationals(v: &[BigInt]) -> Vec<Rational> {
    v.iter().map(|x| Rational::from_integer(x.clone())).collect()
}

/// Candidates for a single atom that is not part of an equality group.
fn atom_candidates(
    g: &ClnGraph,
    a: usize,
    atom: &TemplateAtom,
    top: bool,
    data: &Data,
    cfg: &ExtractionConfig,
) -> Vec<Formula> {
    let (fixed, fixed_bias) = atom.fixed_values();
    let slots = &g.atoms[a].term_slots;
    let (w, b) = raw_weights(g, a);
    let mut out = Vec::new();

    if !atom.has_learnable_coeffs() {
        let coeffs: Vec<Rational> = fixed.into_iter().map(|c| c.expect("fixed coefficient")).collect();
        if let Some(bias) = fixed_bias {
            return vec![atom.instantiate(&coeffs, &bias)];
        }
        let values = data.values(slots, &coeffs);
        let tight = tight_bias(atom.kind, &values);
        if top {
            if let Some(t) = &tight {
                push_unique(&mut out, atom.instantiate(&coeffs, t));
            }
        }
        if atom.kind != AtomKind::Eq {
            if let Some(r) = rationalize(b, cfg) {
                push_unique(&mut out, atom.instantiate(&coeffs, &r));
            }
        }
        for r in nearest_biases(&values, b, NEAREST_BIASES) {
            push_unique(&mut out, atom.instantiate(&coeffs, &r));
        }
        if let Some(t) = &tight {
            push_unique(&mut out, atom.instantiate(&coeffs, t));
        }
        return out;
    }

    if let Some(bias) = fixed_bias {
        // Fixed bias: the learned coefficients are already on its scale.
        let mut coeffs = Vec::new();
        for (i, f) in fixed.iter().enumerate() {
            match f {
                Some(c) => coeffs.push(c.clone()),
                None => match rationalize(w[i], cfg) {
                    Some(r) => coeffs.push(r),
                    None => return out,
                },
            }
        }
        return vec![atom.instantiate(&coeffs, &bias)];
    }

    for dir in directions(&w, w.len(), cfg) {
        let coeffs = to_rationals(&dir);
        let values = data.values(slots, &coeffs);
        if top {
            if let Some(t) = tight_bias(atom.kind, &values) {
                push_unique(&mut out, atom.instantiate(&coeffs, &t));
            }
            continue;
        }
        let df = ints_to_f64(&dir);
        let ww: f64 = w.iter().map(|x| x * x).sum();
        let lambda = df.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>() / ww;
        let target = lambda * b;
        if atom.kind != AtomKind::Eq {
            if let Some(r) = rationalize(target, cfg) {
                push_unique(&mut out, atom.instantiate(&coeffs, &r));
            }
        }
        for r in nearest_biases(&values, target, NEAREST_BIASES) {
            push_unique(&mut out, atom.instantiate(&coeffs, &r));
        }
    }
    out
}

/// Candidate tuples for a group of top-level learnable equalities that share
/// a term list. Learned rows are reduced first so that only independent
/// directions are snapped; rows past the learned rank become `True`.
fn group_candidates(
    g: &ClnGraph,
    members: &[usize],
    atoms: &[&TemplateAtom],
    data: &Data,
    cfg: &ExtractionConfig,
) -> Vec<Vec<Formula>> {
    let first = atoms[members[0]];
    let slots = &g.atoms[members[0]].term_slots;
    let n = slots.len();
    let rows: Vec<Vec<f64>> = members
        .iter()
        .map(|&a| {
            let (mut w, b) = raw_weights(g, a);
            w.push(b);
            w
        })
        .collect();
    let reduced = rref_f64(&rows, RANK_TOL);
    let k = members.len();
    let instantiate_row = |ints: &[BigInt]| -> Formula {
        let c = to_rationals(&ints[..n]);
        first.instantiate(&c, &Rational::from_integer(ints[n].clone()))
    };
    let pad = |mut v: Vec<Formula>| {
        v.resize(k, Formula::True);
        v
    };

    let mut per_row: Vec<Vec<Formula>> = Vec::new();
    for row in &reduced {
        let mut cands = Vec::new();
        for dir in directions(row, n, cfg) {
            let coeffs = to_rationals(&dir);
            if let Some(bias) = tight_bias(AtomKind::Eq, &data.values(slots, &coeffs)) {
                push_unique(&mut cands, first.instantiate(&coeffs, &bias));
            }
        }
        per_row.push(cands);
    }

    let mut out: Vec<Vec<Formula>> = Vec::new();
    let exact = exact_basis(&reduced, slots, data, k);
    if let Some((basis, true)) = &exact {
        out.push(pad(basis.iter().map(|v| instantiate_row(v)).collect()));
    }
    if per_row.iter().all(|c| !c.is_empty()) {
        let depth = per_row.iter().map(Vec::len).max().unwrap_or(0);
        for j in 0..depth {
            let tuple = pad(per_row.iter().map(|c| c[j.min(c.len() - 1)].clone()).collect());
            if !out.contains(&tuple) {
                out.push(tuple);
            }
        }
    }
    // Every equality that holds on the data lies in this space, so it is the
    // last resort when the learned rows only approximate it.
    if let Some((basis, false)) = exact {
        let tuple = pad(basis.iter().map(|v| instantiate_row(v)).collect());
        if !out.contains(&tuple) {
            out.push(tuple);
        }
    }
    out
}

/// Integer basis of the data's exact equality space when it has the learned
/// rank, flagged with whether the learned rows lie close to it.
fn exact_basis(learned: &[Vec<f64>], slots: &[usize], data: &Data, k: usize) -> Option<(Vec<Vec<BigInt>>, bool)> {
    let n = slots.len();
    let rows: Vec<Vec<Rational>> = data
        .exact
        .iter()
        .map(|x| {
            let mut r: Vec<Rational> = slots.iter().map(|&s| x[s].clone()).collect();
            r.push(Rational::from_integer(BigInt::from(1)));
            r
        })
        .collect();
    let basis = null_space(&rows, n + 1);
    let m = basis.len();
    if m == 0 || m > k || m != learned.len() {
        return None;
    }
    let (canon, _) = rref_exact(&basis);
    let ints: Vec<Vec<BigInt>> = canon.iter().map(|v| integer_vector(v)).collect();
    // Orthonormal basis of the exact space for the residual test.
    let mut ortho: Vec<Vec<f64>> = Vec::new();
    for v in &ints {
        let mut u = ints_to_f64(v);
        for q in &ortho {
            let d: f64 = u.iter().zip(q).map(|(a, b)| a * b).sum();
            u.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-12 {
            return None;
        }
        ortho.push(u.into_iter().map(|x| x / norm).collect());
    }
    for row in learned {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut r: Vec<f64> = row.iter().map(|x| x / norm).collect();
        for q in &ortho {
            let d: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
            r.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        if r.iter().map(|x| x * x).sum::<f64>().sqrt() > SPAN_RESIDUAL {
            return Some((ints, false));
        }
    }
    Some((ints, true))
}

/// A unit of the search: one atom, or an equality group assigned together.
struct Unit {
    atoms: Vec<usize>,
    choices: Vec<Vec<Formula>>,
}

/// Index tuples over `sizes`, in increasing order of index sum.
fn tuples_by_sum(sizes: &[usize], cap: usize) -> Vec<Vec<usize>> {
    let max_sum: usize = sizes.iter().map(|s| s.saturating_sub(1)).sum();
    let mut out = Vec::new();
    fn fill(sizes: &[usize], left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, cap: usize) {
        if out.len() >= cap {
            return;
        }
        if cur.len() == sizes.len() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let rest_max: usize = sizes[cur.len() + 1..].iter().map(|s| s - 1).sum();
        for i in 0..sizes[cur.len()].min(left + 1) {
            if left - i > rest_max {
                continue;
            }
            cur.push(i);
            fill(sizes, left - i, cur, out, cap);
            cur.pop();
        }
    }
    for s in 0..=max_sum {
        fill(sizes, s, &mut Vec::new(), &mut out, cap);
        if out.len() >= cap {
            break;
        }
    }
    out
}

fn holds_everywhere(f: &Formula, data: &Data, tol: f64) -> bool {
    let screened = data.states.iter().all(|s| f.eval_f64(&|v| s.get(v).map(rat_to_f64), tol) == Some(true));
    screened && data.states.iter().all(|s| f.eval(s) == Ok(true))
}

/// Extracts an exact formula from `graph` for `template` that holds on every
/// snapshot in `states`.
pub fn extract_from(
    graph: &ClnGraph,
    template: &TemplateFormula,
    states: &[State],
    cfg: &ExtractionConfig,
) -> Result<Formula, ExtractError> {
    let atoms = template.atoms();
    if atoms.len() != graph.atoms.len() {
        return Err(ExtractError::AtomMismatch { graph: graph.atoms.len(), template: atoms.len() });
    }
    let exact: Vec<Vec<Rational>> = states
        .iter()
        .filter_map(|s| graph.terms.iter().map(|t: &Expr| t.eval(s).ok()).collect::<Option<Vec<_>>>())
        .collect();
    let data = Data { states, exact };
    let top = top_level(template);

    let mut grouped = vec![false; atoms.len()];
    let mut units = Vec::new();
    for a in 0..atoms.len() {
        if grouped[a] {
            continue;
        }
        let is_group_head = top[a] && atoms[a].kind == AtomKind::Eq && atoms[a].has_learnable_coeffs();
        if is_group_head && atoms[a].num_learnable() == atoms[a].terms.len() + 1 {
            let members: Vec<usize> = (a..atoms.len())
                .filter(|&b| top[b] && atoms[b].kind == AtomKind::Eq && atoms[b].terms == atoms[a].terms && atoms[b].bias == atoms[a].bias)
                .collect();
            members.iter().for_each(|&b| grouped[b] = true);
            let choices = group_candidates(graph, &members, &atoms, &data, cfg);
            units.push(Unit { atoms: members, choices });
        } else {
            grouped[a] = true;
            let choices = atom_candidates(graph, a, atoms[a], top[a], &data, cfg).into_iter().map(|f| vec![f]).collect();
            units.push(Unit { atoms: vec![a], choices });
        }
    }

    if units.iter().any(|u| u.choices.is_empty()) {
        return Err(ExtractError::NoConsistentCandidate { tried: 0, points: states.len() });
    }
    let sizes: Vec<usize> = units.iter().map(|u| u.choices.len()).collect();
    let tuples = tuples_by_sum(&sizes, cfg.max_combinations);
    let mut slot = vec![Formula::True; atoms.len()];
    let mut tried = 0;
    let mut seen = BTreeSet::new();
    for t in &tuples {
        for (u, &i) in units.iter().zip(t) {
            for (&a, f) in u.atoms.iter().zip(&u.choices[i]) {
                slot[a] = f.clone();
            }
        }
        let f = template.map_atoms(&mut |i, _| slot[i].clone());
        if !seen.insert(f.clone()) {
            continue;
        }
        tried += 1;
        if holds_everywhere(&f, &data, cfg.screen_tolerance) {
            return Ok(f);
        }
    }
    Err(ExtractError::NoConsistentCandidate { tried, points: states.len() })
}

pub fn extract(model: &TrainedModel, template: &TemplateFormula, cfg: &ExtractionConfig) -> Result<Formula, ExtractError> {
    extract_from(&model.graph, template, &model.data, cfg)
}
