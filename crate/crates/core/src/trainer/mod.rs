//! Fits template parameters to loop-head snapshots by gradient descent on
//! the continuous relaxation, then reads exact formulas back out.

mod extract;

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ast::{rat_to_f64, State};
use crate::clogic::{build_graph, BuildOptions, ClnGraph, EqMode, GraphError, ParamRole, TNormKind};
use crate::templates::Template;

pub use extract::{extract, extract_from, integer_direction, ExtractError, ExtractionConfig};

/// Added inside the logarithm of the `neg_log` loss.
pub const LOG_DELTA: f64 = 1e-12;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const MIN_SCALE: f64 = 1e-3;
const OFFSET_RANGE: (f64, f64) = (1e-6, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    OneMinus,
    NegLog,
}

pub fn loss(v: f64, kind: LossKind) -> f64 {
    match kind {
        LossKind::OneMinus => 1.0 - v,
        LossKind::NegLog => -(v + LOG_DELTA).ln(),
    }
}

pub fn loss_grad(v: f64, kind: LossKind) -> f64 {
    match kind {
        LossKind::OneMinus => -1.0,
        LossKind::NegLog => -1.0 / (v + LOG_DELTA),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub max_restarts: usize,
    pub init_range: (f64, f64),
    /// Minimum scaling factor enforced by the hinge term.
    pub beta: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub loss_kind: LossKind,
    pub tnorm: TNormKind,
    pub eq_mode: EqMode,
    pub per_atom_scaling: bool,
    pub convergence_threshold: f64,
    pub check_every: usize,
    pub sigma_init: f64,
    pub sigma_min: f64,
    pub anneal_factor: f64,
    pub anneal_every: usize,
    /// Training uses at most this many distinct snapshots, evenly strided.
    pub max_points: usize,
    pub seed: u64,
    pub log_training: bool,
    pub deadline: Option<Instant>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            max_epochs: 2000,
            max_restarts: 3,
            init_range: (-1.0, 1.0),
            beta: 10.0,
            lambda: 0.1,
            gamma: 0.01,
            loss_kind: LossKind::NegLog,
            tnorm: TNormKind::Product,
            eq_mode: EqMode::Gaussian,
            per_atom_scaling: false,
            convergence_threshold: 0.995,
            check_every: 25,
            sigma_init: 1.0,
            sigma_min: 0.01,
            anneal_factor: 0.9,
            anneal_every: 100,
            max_points: 400,
            seed: 0,
            log_training: false,
            deadline: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.beta > 0.0) {
            return bad("beta must be positive");
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0) {
            return bad("lambda and gamma must be nonnegative");
        }
        if !(self.init_range.0 < self.init_range.1) {
            return bad("init_range must be a nonempty interval");
        }
        if self.max_epochs == 0 || self.check_every == 0 || self.max_points == 0 || self.anneal_every == 0 {
            return bad("epoch counts must be positive");
        }
        if !(self.sigma_min > 0.0 && self.sigma_init >= self.sigma_min) {
            return bad("sigma bounds must satisfy 0 < sigma_min <= sigma_init");
        }
        Ok(())
    }

    fn options(&self) -> BuildOptions {
        BuildOptions { tnorm: self.tnorm, eq_mode: self.eq_mode, per_atom_scaling: self.per_atom_scaling }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("no training data")]
    EmptyData,
    #[error("non-finite loss at epoch {epoch}; parameters {params:?}")]
    NonFinite { epoch: usize, params: Vec<(String, f64)> },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub loss: f64,
    pub scale: f64,
    pub offset: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub graph: ClnGraph,
    /// Distinct snapshots the model was fitted to, in sorted order.
    pub data: Vec<State>,
    pub final_loss: f64,
    pub mean_output: f64,
    /// Epochs summed over all restarts.
    pub epochs_used: usize,
    pub restarts_used: usize,
    pub converged: bool,
    /// Whether the acceptance callback approved the parameters.
    pub accepted: bool,
    /// Cumulative epoch count when the mean output first crossed the threshold.
    pub first_converged_epoch: Option<usize>,
    pub log: Vec<LogRow>,
}

/// Decision returned by the acceptance callback each time training converges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Continue,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * grad[i];
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
        }
    }
}

fn lookup(s: &State) -> impl Fn(&str) -> Option<f64> + '_ {
    move |v| s.get(v).map(rat_to_f64)
}

/// Per-atom input gains so every distance is of order one on the data.
fn set_gains(g: &mut ClnGraph, feats: &[Vec<f64>]) {
    let scale_of = |vals: &mut dyn Iterator<Item = f64>| {
        let m = vals.fold(0.0f64, |a, x| a.max(x.abs()));
        if m > 0.0 && m.is_finite() {
            m
        } else {
            1.0
        }
    };
    for a in 0..g.atoms.len() {
        let nodes = g.atoms[a].clone();
        let learnable_coeffs = nodes.coeff_params.iter().any(Option::is_some);
        let gains = match g.nodes[nodes.lincomb].op {
            crate::clogic::NodeOp::LinComb { gains, .. } => gains,
            _ => unreachable!(),
        };
        let n = nodes.term_slots.len();
        if learnable_coeffs {
            for (i, &slot) in nodes.term_slots.iter().enumerate() {
                g.gains[gains][i] = 1.0 / scale_of(&mut feats.iter().map(|f| f[slot]));
            }
        } else if nodes.bias_param.is_some() {
            let lin = g.nodes[nodes.lincomb].inputs.clone();
            let coeff = |i: usize| match g.nodes[lin[2 * i]].op {
                crate::clogic::NodeOp::Const(c) => c,
                _ => 0.0,
            };
            let s = scale_of(&mut feats.iter().map(|f| (0..n).map(|i| coeff(i) * f[nodes.term_slots[i]]).sum::<f64>()));
            for i in 0..n {
                g.gains[gains][i] = 1.0 / s;
            }
        }
    }
}

fn initialize(g: &mut ClnGraph, cfg: &TrainConfig, rng: &mut ChaCha8Rng) {
    let (lo, hi) = cfg.init_range;
    for i in 0..g.params.len() {
        g.params[i] = match g.roles[i] {
            ParamRole::Scale { .. } => cfg.beta,
            ParamRole::Offset { .. } => rng.gen_range(0.0..hi.max(f64::MIN_POSITIVE)).max(OFFSET_RANGE.0),
            ParamRole::Sigma => cfg.sigma_init,
            ParamRole::Coeff { .. } | ParamRole::Bias { .. } => rng.gen_range(lo..hi),
        };
    }
}

fn evaluate(g: &mut ClnGraph, feats: &[&Vec<f64>], cfg: &TrainConfig, grad: Option<&mut [f64]>) -> (f64, f64) {
    let n = feats.len() as f64;
    let mut total = 0.0;
    let mut mean = 0.0;
    match grad {
        Some(grad) => {
            grad.iter_mut().for_each(|d| *d = 0.0);
            for f in feats {
                let v = g.forward(f);
                mean += v / n;
                total += loss(v, cfg.loss_kind) / n;
                g.backward_into(loss_grad(v, cfg.loss_kind) / n, grad);
            }
            for i in 0..g.params.len() {
                match g.roles[i] {
                    ParamRole::Scale { .. } if g.params[i] < cfg.beta => {
                        total += cfg.lambda * (cfg.beta - g.params[i]);
                        grad[i] -= cfg.lambda;
                    }
                    ParamRole::Offset { .. } => {
                        total += cfg.gamma * g.params[i].abs();
                        grad[i] += cfg.gamma * g.params[i].signum();
                    }
                    _ => {}
                }
            }
        }
        None => {
            for f in feats {
                let v = g.forward(f);
                mean += v / n;
                total += loss(v, cfg.loss_kind) / n;
            }
        }
    }
    (total, mean)
}

fn param_snapshot(g: &ClnGraph) -> Vec<(String, f64)> {
    g.roles.iter().zip(&g.params).map(|(r, p)| (format!("{r:?}"), *p)).collect()
}

fn first_of(g: &ClnGraph, pred: impl Fn(&ParamRole) -> bool, default: f64) -> f64 {
    g.roles.iter().position(pred).map_or(default, |i| g.params[i])
}

/// Trains with an acceptance callback consulted at every convergence check
/// that passes the threshold. Training on a restart stops once the callback
/// accepts; otherwise it continues, annealing the Gaussian width, until the
/// epoch budget runs out and a fresh restart begins.
pub fn train_with(
    template: &Template,
    data: &[State],
    cfg: &TrainConfig,
    on_converged: &mut dyn FnMut(&ClnGraph, &[State]) -> Verdict,
) -> Result<TrainedModel, TrainError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(TrainError::EmptyData);
    }
    let data: Vec<State> = data.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let mut graph = build_graph(&template.formula, cfg.options())?;
    let feats: Vec<Vec<f64>> = data.iter().map(|s| graph.features(&lookup(s))).collect::<Result<_, _>>()?;
    set_gains(&mut graph, &feats);
    let stride = feats.len().div_ceil(cfg.max_points).max(1);
    let train: Vec<&Vec<f64>> = feats.iter().step_by(stride).collect();

    let has_learnable = graph.roles.iter().any(|r| matches!(r, ParamRole::Coeff { .. } | ParamRole::Bias { .. }));
    let mut log = Vec::new();
    if !has_learnable {
        initialize(&mut graph, cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed));
        let (l, mean) = evaluate(&mut graph, &train, cfg, None);
        let converged = mean >= cfg.convergence_threshold;
        let accepted = converged && on_converged(&graph, &data) == Verdict::Accept;
        return Ok(TrainedModel {
            graph,
            data,
            final_loss: l,
            mean_output: mean,
            epochs_used: 0,
            restarts_used: 0,
            converged,
            accepted,
            first_converged_epoch: converged.then_some(0),
            log,
        });
    }

    let mut grad = vec![0.0; graph.params.len()];
    let mut best: Option<(ClnGraph, f64, f64, bool)> = None;
    let mut total_epochs = 0;
    let mut first_converged = None;
    let mut restarts_used = 0;
    let out_of_time = || cfg.deadline.is_some_and(|d| Instant::now() >= d);

    for restart in 0..=cfg.max_restarts {
        restarts_used = restart;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(restart as u64);
        initialize(&mut graph, cfg, &mut rng);
        let mut adam = Adam::new(graph.params.len());
        let mut sigma_cap = cfg.sigma_init;
        let mut plateau = false;
        let mut converged_now = false;
        let mut last_loss = f64::INFINITY;
        let mut accepted = false;

        for epoch in 1..=cfg.max_epochs {
            let (l, _) = evaluate(&mut graph, &train, cfg, Some(&mut grad));
            total_epochs += 1;
            if !l.is_finite() || grad.iter().any(|d| !d.is_finite()) {
                return Err(TrainError::NonFinite { epoch: total_epochs, params: param_snapshot(&graph) });
            }
            last_loss = l;
            adam.step(&mut graph.params, &grad, cfg.learning_rate);
            for i in 0..graph.params.len() {
                let p = &mut graph.params[i];
                *p = match graph.roles[i] {
                    ParamRole::Scale { .. } => p.max(MIN_SCALE),
                    ParamRole::Offset { .. } => p.clamp(OFFSET_RANGE.0, OFFSET_RANGE.1),
                    ParamRole::Sigma => p.clamp(cfg.sigma_min, sigma_cap),
                    _ => *p,
                };
            }
            if cfg.log_training {
                log.push(LogRow {
                    epoch: total_epochs,
                    loss: l,
                    scale: first_of(&graph, |r| matches!(r, ParamRole::Scale { .. }), f64::NAN),
                    offset: first_of(&graph, |r| matches!(r, ParamRole::Offset { .. }), f64::NAN),
                    sigma: first_of(&graph, |r| matches!(r, ParamRole::Sigma), f64::NAN),
                });
            }
            if epoch % cfg.check_every == 0 || epoch == cfg.max_epochs {
                let (_, mean) = evaluate(&mut graph, &train, cfg, None);
                converged_now = mean >= cfg.convergence_threshold;
                if converged_now {
                    plateau = true;
                    first_converged.get_or_insert(total_epochs);
                    if on_converged(&graph, &data) == Verdict::Accept {
                        accepted = true;
                        break;
                    }
                }
                if out_of_time() {
                    break;
                }
            }
            if plateau && epoch % cfg.anneal_every == 0 {
                sigma_cap = (sigma_cap * cfg.anneal_factor).max(cfg.sigma_min);
                graph.set_role(|r| matches!(r, ParamRole::Sigma), sigma_cap);
            }
        }
        let better = match &best {
            None => true,
            Some((_, bl, _, bc)) => accepted || (converged_now && !bc) || (converged_now == *bc && last_loss < *bl),
        };
        if better {
            best = Some((graph.clone(), last_loss, 0.0, converged_now || accepted));
        }
        if accepted {
            let (mut g, l, _, _) = best.take().unwrap();
            let (_, mean) = evaluate(&mut g, &train, cfg, None);
            return Ok(TrainedModel {
                graph: g,
                data,
                final_loss: l,
                mean_output: mean,
                epochs_used: total_epochs,
                restarts_used,
                converged: mean >= cfg.convergence_threshold,
                accepted: true,
                first_converged_epoch: first_converged,
                log,
            });
        }
        if out_of_time() {
            break;
        }
    }
    let (mut g, l, _, _) = best.expect("at least one restart runs");
    let (_, mean) = evaluate(&mut g, &train, cfg, None);
    Ok(TrainedModel {
        graph: g,
        data,
        final_loss: l,
        mean_output: mean,
        epochs_used: total_epochs,
        restarts_used,
        converged: mean >= cfg.convergence_threshold,
        accepted: false,
        first_converged_epoch: first_converged,
        log,
    })
}

/// Trains until the first convergence on some restart.
pub fn train(template: &Template, data: &[State], cfg: &TrainConfig) -> Result<TrainedModel, TrainError> {
    train_with(template, data, cfg, &mut |_, _| Verdict::Accept)
}

pub fn write_log_csv(rows: &[LogRow], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "epoch,loss,B,eps,sigma")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.epoch, r.loss, r.scale, r.offset, r.sigma)?;
    }
    Ok(())
}
