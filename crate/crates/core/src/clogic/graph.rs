//! Computation graphs for continuous relaxations of template formulas, with
//! forward evaluation and reverse-mode gradients.

use std::collections::BTreeMap;
use std::fmt::Write;

use thiserror::Error;

use super::mapping::{sigmoid, t_conorm, t_conorm_grad, t_norm, t_norm_grad, TNormKind, SIGMOID_CLAMP};
use crate::ast::{rat_to_f64, Expr};
use crate::frontend::print_expr;
use crate::templates::{AtomKind, Slot, TemplateAtom, TemplateFormula};

/// Added under the square root of normalized linear combinations.
const NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("malformed template: {0}")]
    MalformedTemplate(String),
    #[error("term `{0}` cannot be evaluated on the given assignment")]
    Unassigned(String),
    #[error("expected {expected} features, got {got}")]
    FeatureArity { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqMode {
    Sigmoid,
    Gaussian,
}

impl std::str::FromStr for EqMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(EqMode::Sigmoid),
            "gaussian" | "gauss" => Ok(EqMode::Gaussian),
            other => Err(format!("unknown equality mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub tnorm: TNormKind,
    pub eq_mode: EqMode,
    /// Give each atom its own `B` and `ε` instead of sharing one pair.
    pub per_atom_scaling: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { tnorm: TNormKind::Product, eq_mode: EqMode::Gaussian, per_atom_scaling: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeOp {
    /// Value of feature `slot`.
    InputTerm { slot: usize },
    Const(f64),
    Param { index: usize },
    /// Inputs `[w_0, x_0, ..., w_{n-1}, x_{n-1}, b]`. Computes
    /// `(sum g_i w_i x_i + g_b b) / N` where `N = ||w||` when normalized and
    /// 1 otherwise. Gains live in [`ClnGraph::gains`].
    LinComb { normalized: bool, gains: usize },
    /// Inputs `[d, B, ε]`: `sigmoid(B (d - ε))`.
    SigmoidGt,
    /// Inputs `[d, B, ε]`: `sigmoid(B (d + ε))`.
    SigmoidGe,
    /// Inputs `[d, σ]`: `exp(-d² / 2σ²)`.
    GaussianEq,
    TNorm(TNormKind),
    TConorm(TNormKind),
    Negation,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub op: NodeOp,
    pub inputs: Vec<usize>,
    pub value: f64,
    adjoint: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    /// `B`; `atom` is set under per-atom scaling.
    Scale { atom: Option<usize> },
    /// `ε`; `atom` is set under per-atom scaling.
    Offset { atom: Option<usize> },
    Sigma,
    Coeff { atom: usize, term: usize },
    Bias { atom: usize },
}

/// Where each atom's pieces live in the graph.
#[derive(Debug, Clone)]
pub struct AtomNodes {
    pub kind: AtomKind,
    pub lincomb: usize,
    pub coeff_params: Vec<Option<usize>>,
    pub bias_param: Option<usize>,
    pub term_slots: Vec<usize>,
    pub normalized: bool,
}

#[derive(Debug, Clone)]
pub struct ClnGraph {
    pub nodes: Vec<Node>,
    pub params: Vec<f64>,
    pub roles: Vec<ParamRole>,
    /// Monomials feeding the `InputTerm` nodes, indexed by slot.
    pub terms: Vec<Expr>,
    pub atoms: Vec<AtomNodes>,
    /// Per-LinComb gain vectors (one per term, then one for the bias).
    pub gains: Vec<Vec<f64>>,
    pub root: usize,
    pub options: BuildOptions,
}

struct Builder {
    g: ClnGraph,
    term_index: BTreeMap<Expr, usize>,
    term_nodes: Vec<usize>,
    shared: Option<(usize, usize)>,
    sigma: Option<usize>,
}

impl Builder {
    fn push(&mut self, op: NodeOp, inputs: Vec<usize>) -> usize {
        debug_assert!(inputs.iter().all(|&i| i < self.g.nodes.len()));
        self.g.nodes.push(Node { op, inputs, value: 0.0, adjoint: 0.0 });
        self.g.nodes.len() - 1
    }

    fn param(&mut self, role: ParamRole, init: f64) -> (usize, usize) {
        let index = self.g.params.len();
        self.g.params.push(init);
        self.g.roles.push(role);
        (self.push(NodeOp::Param { index }, vec![]), index)
    }

    fn term(&mut self, t: &Expr) -> usize {
        if let Some(&slot) = self.term_index.get(t) {
            return self.term_nodes[slot];
        }
        let slot = self.g.terms.len();
        self.g.terms.push(t.clone());
        self.term_index.insert(t.clone(), slot);
        let node = self.push(NodeOp::InputTerm { slot }, vec![]);
        self.term_nodes.push(node);
        node
    }

    fn scale_offset(&mut self, atom: usize) -> (usize, usize) {
        if self.g.options.per_atom_scaling {
            let (b, _) = self.param(ParamRole::Scale { atom: Some(atom) }, 1.0);
            let (e, _) = self.param(ParamRole::Offset { atom: Some(atom) }, 0.1);
            return (b, e);
        }
        if let Some(pair) = self.shared {
            return pair;
        }
        let (b, _) = self.param(ParamRole::Scale { atom: None }, 1.0);
        let (e, _) = self.param(ParamRole::Offset { atom: None }, 0.1);
        self.shared = Some((b, e));
        (b, e)
    }

    fn sigma(&mut self) -> usize {
        if let Some(s) = self.sigma {
            return s;
        }
        let (s, _) = self.param(ParamRole::Sigma, 1.0);
        self.sigma = Some(s);
        s
    }

    fn atom(&mut self, a: &TemplateAtom) -> Result<usize, GraphError> {
        let index = self.g.atoms.len();
        if a.terms.is_empty() && a.has_learnable_coeffs() {
            return Err(GraphError::MalformedTemplate("atom without terms".into()));
        }
        for (_, t) in &a.terms {
            if t.degree().is_none() {
                return Err(GraphError::MalformedTemplate(format!("term `{}` is not a polynomial", print_expr(t))));
            }
        }
        let normalized = a.has_learnable_coeffs();
        let mut inputs = Vec::new();
        let mut coeff_params = Vec::new();
        let mut term_slots = Vec::new();
        for (i, (slot, t)) in a.terms.iter().enumerate() {
            let w = match slot {
                Slot::Learnable => {
                    let (n, p) = self.param(ParamRole::Coeff { atom: index, term: i }, 0.0);
                    coeff_params.push(Some(p));
                    n
                }
                Slot::Fixed(c) => {
                    coeff_params.push(None);
                    self.push(NodeOp::Const(rat_to_f64(c)), vec![])
                }
            };
            let x = self.term(t);
            let NodeOp::InputTerm { slot } = self.g.nodes[x].op else { unreachable!() };
            term_slots.push(slot);
            inputs.push(w);
            inputs.push(x);
        }
        let (b, bias_param) = match &a.bias {
            Slot::Learnable => {
                let (n, p) = self.param(ParamRole::Bias { atom: index }, 0.0);
                (n, Some(p))
            }
            Slot::Fixed(c) => (self.push(NodeOp::Const(rat_to_f64(c)), vec![]), None),
        };
        inputs.push(b);
        let gains = self.g.gains.len();
        self.g.gains.push(vec![1.0; a.terms.len() + 1]);
        let lin = self.push(NodeOp::LinComb { normalized, gains }, inputs);
        self.g.atoms.push(AtomNodes { kind: a.kind, lincomb: lin, coeff_params, bias_param, term_slots, normalized });

        let k = self.g.options.tnorm;
        let node = match a.kind {
            AtomKind::Eq => match self.g.options.eq_mode {
                EqMode::Gaussian => {
                    let s = self.sigma();
                    self.push(NodeOp::GaussianEq, vec![lin, s])
                }
                EqMode::Sigmoid => {
                    let (bn, en) = self.scale_offset(index);
                    let ge = self.push(NodeOp::SigmoidGe, vec![lin, bn, en]);
                    let gt = self.push(NodeOp::SigmoidGt, vec![lin, bn, en]);
                    let le = self.push(NodeOp::Negation, vec![gt]);
                    self.push(NodeOp::TNorm(k), vec![ge, le])
                }
            },
            AtomKind::Ge | AtomKind::Gt | AtomKind::Le | AtomKind::Lt => {
                let (bn, en) = self.scale_offset(index);
                match a.kind {
                    AtomKind::Ge => self.push(NodeOp::SigmoidGe, vec![lin, bn, en]),
                    AtomKind::Gt => self.push(NodeOp::SigmoidGt, vec![lin, bn, en]),
                    AtomKind::Le => {
                        let gt = self.push(NodeOp::SigmoidGt, vec![lin, bn, en]);
                        self.push(NodeOp::Negation, vec![gt])
                    }
                    _ => {
                        let ge = self.push(NodeOp::SigmoidGe, vec![lin, bn, en]);
                        self.push(NodeOp::Negation, vec![ge])
                    }
                }
            }
        };
        Ok(node)
    }

    fn formula(&mut self, f: &TemplateFormula) -> Result<usize, GraphError> {
        match f {
            TemplateFormula::True => Ok(self.push(NodeOp::Const(1.0), vec![])),
            TemplateFormula::False => Ok(self.push(NodeOp::Const(0.0), vec![])),
            TemplateFormula::Atom(a) => self.atom(a),
            TemplateFormula::Not(g) => {
                let inner = self.formula(g)?;
                Ok(self.push(NodeOp::Negation, vec![inner]))
            }
            TemplateFormula::And(gs) | TemplateFormula::Or(gs) => {
                if gs.is_empty() {
                    return Err(GraphError::MalformedTemplate("empty connective".into()));
                }
                let k = self.g.options.tnorm;
                let op = if matches!(f, TemplateFormula::And(_)) { NodeOp::TNorm(k) } else { NodeOp::TConorm(k) };
                let mut acc = self.formula(&gs[0])?;
                for g in &gs[1..] {
                    let next = self.formula(g)?;
                    acc = self.push(op, vec![acc, next]);
                }
                Ok(acc)
            }
        }
    }
}

/// Builds the relaxation of `template`. Parameters start at `B = 1`,
/// `ε = 0.1`, `σ = 1` and zero for coefficients and biases.
pub fn build_graph(template: &TemplateFormula, options: BuildOptions) -> Result<ClnGraph, GraphError> {
    let mut b = Builder {
        g: ClnGraph {
            nodes: Vec::new(),
            params: Vec::new(),
            roles: Vec::new(),
            terms: Vec::new(),
            atoms: Vec::new(),
            gains: Vec::new(),
            root: 0,
            options,
        },
        term_index: BTreeMap::new(),
        term_nodes: Vec::new(),
        shared: None,
        sigma: None,
    };
    b.g.root = b.formula(template)?;
    Ok(b.g)
}

impl ClnGraph {
    pub fn num_features(&self) -> usize {
        self.terms.len()
    }

    /// Evaluates every term on `lookup`.
    pub fn features(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<Vec<f64>, GraphError> {
        self.terms
            .iter()
            .map(|t| t.eval_f64(lookup).ok_or_else(|| GraphError::Unassigned(print_expr(t))))
            .collect()
    }

    pub fn forward_map(&mut self, x: &BTreeMap<String, f64>) -> Result<f64, GraphError> {
        let feats = self.features(&|v| x.get(v).copied())?;
        Ok(self.forward(&feats))
    }

    pub fn try_forward(&mut self, feats: &[f64]) -> Result<f64, GraphError> {
        if feats.len() != self.terms.len() {
            return Err(GraphError::FeatureArity { expected: self.terms.len(), got: feats.len() });
        }
        Ok(self.forward(feats))
    }

    /// Forward pass over precomputed features. Panics on arity mismatch.
    pub fn forward(&mut self, feats: &[f64]) -> f64 {
        assert_eq!(feats.len(), self.terms.len(), "feature arity");
        for i in 0..self.nodes.len() {
            let v = {
                let n = &self.nodes[i];
                let val = |j: usize| self.nodes[n.inputs[j]].value;
                match n.op {
                    NodeOp::InputTerm { slot } => feats[slot],
                    NodeOp::Const(c) => c,
                    NodeOp::Param { index } => self.params[index],
                    NodeOp::LinComb { normalized, gains } => {
                        let g = &self.gains[gains];
                        let terms = (n.inputs.len() - 1) / 2;
                        let mut s = g[terms] * val(n.inputs.len() - 1);
                        let mut sq = 0.0;
                        for t in 0..terms {
                            let w = val(2 * t);
                            s += g[t] * w * val(2 * t + 1);
                            sq += w * w;
                        }
                        if normalized {
                            s / (sq + NORM_FLOOR).sqrt()
                        } else {
                            s
                        }
                    }
                    NodeOp::SigmoidGt => sigmoid(val(1) * (val(0) - val(2))),
                    NodeOp::SigmoidGe => sigmoid(val(1) * (val(0) + val(2))),
                    NodeOp::GaussianEq => {
                        let (d, s) = (val(0), val(1));
                        (-(d * d) / (2.0 * s * s)).exp()
                    }
                    NodeOp::TNorm(k) => t_norm(k, val(0), val(1)),
                    NodeOp::TConorm(k) => t_conorm(k, val(0), val(1)),
                    NodeOp::Negation => 1.0 - val(0),
                }
            };
            self.nodes[i].value = v;
        }
        self.nodes[self.root].value
    }

    /// Reverse pass after [`forward`](Self::forward). Adds
    /// `seed * d(root)/d(param)` into `grad`.
    pub fn backward_into(&mut self, seed: f64, grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len(), "gradient arity");
        for n in &mut self.nodes {
            n.adjoint = 0.0;
        }
        self.nodes[self.root].adjoint = seed;
        let mut push: Vec<(usize, f64)> = Vec::new();
        for i in (0..self.nodes.len()).rev() {
            let adj = self.nodes[i].adjoint;
            if adj == 0.0 {
                continue;
            }
            let n = &self.nodes[i];
            let val = |j: usize| self.nodes[n.inputs[j]].value;
            push.clear();
            match n.op {
                NodeOp::InputTerm { .. } | NodeOp::Const(_) => {}
                NodeOp::Param { index } => grad[index] += adj,
                NodeOp::LinComb { normalized, gains } => {
                    let g = &self.gains[gains];
                    let last = n.inputs.len() - 1;
                    let terms = last / 2;
                    let mut s = g[terms] * val(last);
                    let mut sq = 0.0;
                    for t in 0..terms {
                        let w = val(2 * t);
                        s += g[t] * w * val(2 * t + 1);
                        sq += w * w;
                    }
                    let norm = if normalized { (sq + NORM_FLOOR).sqrt() } else { 1.0 };
                    for t in 0..terms {
                        let (w, x) = (val(2 * t), val(2 * t + 1));
                        let mut dw = g[t] * x / norm;
                        if normalized {
                            dw -= s * w / (norm * norm * norm);
                        }
                        push.push((n.inputs[2 * t], adj * dw));
                        push.push((n.inputs[2 * t + 1], adj * g[t] * w / norm));
                    }
                    push.push((n.inputs[last], adj * g[terms] / norm));
                }
                NodeOp::SigmoidGt | NodeOp::SigmoidGe => {
                    let (d, b, e) = (val(0), val(1), val(2));
                    let shift = if matches!(n.op, NodeOp::SigmoidGt) { d - e } else { d + e };
                    let z = b * shift;
                    if z.abs() < SIGMOID_CLAMP {
                        let s = n.value;
                        let dz = adj * s * (1.0 - s);
                        let de = if matches!(n.op, NodeOp::SigmoidGt) { -b } else { b };
                        push.push((n.inputs[0], dz * b));
                        push.push((n.inputs[1], dz * shift));
                        push.push((n.inputs[2], dz * de));
                    }
                }
                NodeOp::GaussianEq => {
                    let (d, s) = (val(0), val(1));
                    let gv = n.value;
                    push.push((n.inputs[0], -adj * gv * d / (s * s)));
                    push.push((n.inputs[1], adj * gv * d * d / (s * s * s)));
                }
                NodeOp::TNorm(k) => {
                    let (da, db) = t_norm_grad(k, val(0), val(1));
                    push.push((n.inputs[0], adj * da));
                    push.push((n.inputs[1], adj * db));
                }
                NodeOp::TConorm(k) => {
                    let (da, db) = t_conorm_grad(k, val(0), val(1));
                    push.push((n.inputs[0], adj * da));
                    push.push((n.inputs[1], adj * db));
                }
                NodeOp::Negation => push.push((n.inputs[0], -adj)),
            }
            for &(j, d) in &push {
                self.nodes[j].adjoint += d;
            }
        }
    }

    /// Gradient of the root with respect to every parameter.
    pub fn backward(&mut self) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        self.backward_into(1.0, &mut grad);
        grad
    }

    /// One line per node: index, operation, inputs and last forward value.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let label = match n.op {
                NodeOp::InputTerm { slot } => format!("input[{}]", print_expr(&self.terms[slot])),
                NodeOp::Const(c) => format!("const {c}"),
                NodeOp::Param { index } => format!("param#{index} {:?}", self.roles[index]),
                NodeOp::LinComb { normalized, gains } => {
                    format!("lincomb{} gains={:?}", if normalized { "(normalized)" } else { "" }, self.gains[gains])
                }
                NodeOp::SigmoidGt => "sigmoid_gt".into(),
                NodeOp::SigmoidGe => "sigmoid_ge".into(),
                NodeOp::GaussianEq => "gaussian_eq".into(),
                NodeOp::TNorm(k) => format!("tnorm {k}"),
                NodeOp::TConorm(k) => format!("tconorm {k}"),
                NodeOp::Negation => "neg".into(),
            };
            let ins: Vec<String> = n.inputs.iter().map(|j| format!("n{j}")).collect();
            let root = if i == self.root { " <- root" } else { "" };
            let _ = writeln!(out, "n{i} = {label} [{}] = {:.6}{root}", ins.join(", "), n.value);
        }
        out
    }

    pub fn param_index(&self, role: ParamRole) -> Option<usize> {
        self.roles.iter().position(|r| *r == role)
    }

    pub fn set_role(&mut self, pred: impl Fn(&ParamRole) -> bool, value: f64) {
        for (p, r) in self.params.iter_mut().zip(&self.roles) {
            if pred(r) {
                *p = value;
            }
        }
    }
}
