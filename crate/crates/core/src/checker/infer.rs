//! The verify-or-retry loop over a template plan.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use num_traits::Zero;
use thiserror::Error;

use super::{check, encode_in, query, side_vc, Answer, EncodeError, SolverConfig, Status, VerificationResult};
use crate::ast::{Domain, Formula, Program, Rational, State};
use crate::frontend::analyze;
use crate::templates::{
    enumerate, prefilter, reconstruct, strengthen, Discharge, Family, PlanConfig, PlanError, Template, TemplateFormula,
};
use crate::tracer::{collect, run_stream, SampleConfig, Trace, TraceError};
use crate::trainer::{extract_from, train_with, ExtractionConfig, LogRow, TrainConfig, Verdict};

/// Stream offset for runs started from counterexamples.
const CEX_STREAM: u64 = 1 << 32;
/// Convergences that reproduce an already-checked candidate before a
/// template is abandoned.
const MAX_REPEATS: usize = 3;

#[derive(Debug, Clone)]
pub struct InferConfig {
    pub sample: SampleConfig,
    pub plan: PlanConfig,
    pub train: TrainConfig,
    pub extract: ExtractionConfig,
    pub solver: SolverConfig,
    /// Wall-clock budget for the whole problem.
    pub budget: Duration,
    /// Sort of the variables in solver queries; the program's natural domain
    /// when unset.
    pub domain: Option<Domain>,
    /// Solve the problem with the loop condition added to the precondition.
    pub strengthen: bool,
}

impl Default for InferConfig {
    fn default() -> Self {
        InferConfig {
            sample: SampleConfig::default(),
            plan: PlanConfig::default(),
            train: TrainConfig::default(),
            extract: ExtractionConfig::default(),
            solver: SolverConfig::default(),
            budget: Duration::from_secs(3600),
            domain: None,
            strengthen: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InferStats {
    pub templates_tried: usize,
    /// Individual solver queries.
    pub solver_calls: usize,
    /// Candidate invariants sent to the solver, each costing several queries.
    pub invariant_checks: usize,
    pub restarts: usize,
    pub epochs: usize,
    pub counterexamples: usize,
    pub wall_time: Duration,
    /// Whether the loop condition was folded into the precondition.
    pub strengthened: bool,
}

#[derive(Debug, Clone)]
pub struct InferOutcome {
    pub invariant: Formula,
    pub result: VerificationResult,
    pub stats: InferStats,
    /// Template that produced the invariant.
    pub template: Template,
    /// Loss history of the training run behind the invariant, recorded when
    /// training logs are enabled.
    pub training_log: Vec<LogRow>,
}

#[derive(Debug, Error)]
pub enum InferError {
    #[error("trace collection failed: {0}")]
    Trace(#[from] TraceError),
    #[error("template planning failed: {0}")]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("no template in the plan verified ({} tried)", stats.templates_tried)]
    PlanExhausted { stats: InferStats },
    #[error("time budget exhausted after {} templates", stats.templates_tried)]
    BudgetExceeded { stats: InferStats },
}

impl InferError {
    pub fn stats(&self) -> Option<&InferStats> {
        match self {
            InferError::PlanExhausted { stats } | InferError::BudgetExceeded { stats } => Some(stats),
            _ => None,
        }
    }
}

/// Syntactic cleanup: flattens connectives, drops duplicate operands, folds
/// constants and removes double negations.
pub fn simplify(f: &Formula) -> Formula {
    match f {
        Formula::Not(g) => match simplify(g) {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(h) => *h,
            other => Formula::not(other),
        },
        Formula::And(gs) | Formula::Or(gs) => {
            let mut seen = BTreeSet::new();
            let mut parts = Vec::new();
            for g in gs {
                let s = simplify(g);
                if seen.insert(s.clone()) {
                    parts.push(s);
                }
            }
            if matches!(f, Formula::And(_)) {
                Formula::and_all(parts)
            } else {
                Formula::or_all(parts)
            }
        }
        other => other.clone(),
    }
}

struct Loop<'a> {
    cfg: &'a InferConfig,
    domain: Domain,
    deadline: Instant,
    stats: InferStats,
    checked: BTreeSet<Formula>,
    cex: Vec<State>,
    failure: Option<String>,
    log: Vec<LogRow>,
}

impl Loop<'_> {
    fn solver(&self) -> SolverConfig {
        let left = self.deadline.saturating_duration_since(Instant::now()).max(Duration::from_millis(100));
        SolverConfig { timeout: self.cfg.solver.timeout.min(left), ..self.cfg.solver.clone() }
    }

    fn out_of_time(&self) -> bool {
        Instant::now() >= self.deadline
    }

    fn verify(&mut self, p: &Program, f: &Formula) -> Result<VerificationResult, EncodeError> {
        let vcs = encode_in(p, f, self.domain)?;
        let r = check(&vcs, &self.solver());
        self.stats.solver_calls += r.solver_calls;
        self.stats.invariant_checks += 1;
        Ok(r)
    }

    /// Checks a fresh candidate for `target`. Pre-condition counterexamples
    /// are queued as new initial states.
    fn try_candidate(&mut self, target: &Program, f: &Formula) -> Result<Option<VerificationResult>, EncodeError> {
        if !self.checked.insert(f.clone()) {
            return Ok(None);
        }
        let r = self.verify(target, f)?;
        match &r.status {
            Status::Valid => return Ok(Some(r)),
            Status::Refuted { condition: super::Condition::Pre, model } => {
                let mut s = model.clone();
                for v in &target.vars {
                    s.entry(v.clone()).or_insert_with(Rational::zero);
                }
                s.retain(|v, _| target.vars.contains(v));
                if target.pre.eval(&s) == Ok(true) && !self.cex.contains(&s) {
                    self.cex.push(s);
                }
            }
            Status::SolverError(e) => self.failure = Some(e.clone()),
            _ => {}
        }
        Ok(None)
    }
}

fn add_counterexample_runs(trace: &mut Trace, p: &Program, sample: &SampleConfig, cex: &[State], done: &mut usize) {
    for s in &cex[*done..] {
        if let Ok(run) = run_stream(p, s, sample, CEX_STREAM + *done as u64) {
            trace.runs.push(run);
        }
        *done += 1;
    }
}

/// Infers an invariant for `p` that the solver certifies on all of `p`'s
/// conditions.
pub fn infer_loop(p: &Program, cfg: &InferConfig) -> Result<InferOutcome, InferError> {
    let start = Instant::now();
    let domain = cfg.domain.unwrap_or_else(|| p.natural_domain());
    let mut lp = Loop {
        cfg,
        domain,
        deadline: start + cfg.budget,
        stats: InferStats::default(),
        checked: BTreeSet::new(),
        cex: Vec::new(),
        failure: None,
        log: Vec::new(),
    };
    let sp = strengthen(p);
    let mut sample = cfg.sample.clone();
    sample.domain = Some(domain);

    let use_strengthened = cfg.strengthen && {
        lp.stats.solver_calls += 1;
        match query(&side_vc(p), domain, &lp.solver()) {
            Answer::Unsat => true,
            Answer::Error(e) => return Err(InferError::Solver(e)),
            _ => false,
        }
    };
    lp.stats.strengthened = use_strengthened;
    let target = if use_strengthened { &sp.strengthened } else { p };

    let finish = |lp: &mut Loop, inv: Formula, template: Template| -> Result<Option<InferOutcome>, InferError> {
        let mut candidates = vec![simplify(&inv)];
        if use_strengthened {
            let proof = Discharge { side_condition_valid: true, invariant_valid: true };
            let full = simplify(&reconstruct(&inv, &sp, proof).expect("both obligations discharged"));
            if !candidates.contains(&full) {
                candidates.push(full);
            }
        }
        for c in candidates {
            let r = lp.verify(p, &c)?;
            if r.is_valid() {
                lp.stats.wall_time = start.elapsed();
                return Ok(Some(InferOutcome {
                    invariant: c,
                    result: r,
                    stats: lp.stats.clone(),
                    template,
                    training_log: std::mem::take(&mut lp.log),
                }));
            }
        }
        Ok(None)
    };

    let mut trace = match collect(target, &sample) {
        Ok(t) => t,
        Err(TraceError::SamplingExhausted(_)) if use_strengthened => {
            // The strengthened precondition admits no samples; `false` is the
            // candidate that needs only the exit disjunct.
            lp.stats.templates_tried += 1;
            if lp.try_candidate(target, &Formula::False)?.is_some() {
                if let Some(out) = finish(&mut lp, Formula::False, Template::new(TemplateFormula::False, Family::Static))? {
                    return Ok(out);
                }
            }
            lp.stats.wall_time = start.elapsed();
            return Err(InferError::PlanExhausted { stats: lp.stats });
        }
        Err(e) => return Err(e.into()),
    };
    let facts = analyze(target);
    let plan = enumerate(target, &facts, &trace, &cfg.plan)?;
    let mut cex_done = 0;

    for template in &plan.templates {
        if lp.out_of_time() {
            lp.stats.wall_time = start.elapsed();
            return Err(InferError::BudgetExceeded { stats: lp.stats });
        }
        add_counterexample_runs(&mut trace, target, &sample, &lp.cex, &mut cex_done);
        lp.stats.counterexamples = lp.cex.len();
        if !prefilter(template, &trace) {
            continue;
        }
        lp.stats.templates_tried += 1;
        lp.log.clear();
        let found = if let Some(f) = template.as_fixed_formula() {
            lp.try_candidate(target, &f)?.map(|_| f)
        } else {
            train_and_check(&mut lp, target, template, &trace)?
        };
        if let Some(inv) = found {
            if let Some(out) = finish(&mut lp, inv, template.clone())? {
                return Ok(out);
            }
        }
        if let Some(e) = lp.failure.take() {
            return Err(InferError::Solver(e));
        }
    }
    lp.stats.wall_time = start.elapsed();
    Err(InferError::PlanExhausted { stats: lp.stats })
}

fn train_and_check(lp: &mut Loop, target: &Program, template: &Template, trace: &Trace) -> Result<Option<Formula>, InferError> {
    let data = trace.distinct_head_states();
    let tcfg = TrainConfig { deadline: Some(lp.deadline), ..lp.cfg.train.clone() };
    let ecfg = lp.cfg.extract.clone();
    let mut found = None;
    let mut encode_error = None;
    let disjunctive = template.formula.has_disjunction();
    let mut repeats = 0;
    let mut on_converged = |g: &crate::clogic::ClnGraph, states: &[State]| {
        if lp.failure.is_some() || lp.out_of_time() {
            return Verdict::Accept;
        }
        let Ok(f) = extract_from(g, &template.formula, states, &ecfg) else { return Verdict::Continue };
        let fresh = !lp.checked.contains(&f);
        match lp.try_candidate(target, &f) {
            Ok(Some(_)) => {
                found = Some(f);
                Verdict::Accept
            }
            // Without disjunctions the extracted formula is pinned down by
            // the data, so further training would only repeat it.
            Ok(None) if fresh && disjunctive => Verdict::Continue,
            Ok(None) if fresh => Verdict::Accept,
            Ok(None) => {
                repeats += 1;
                if repeats >= MAX_REPEATS {
                    Verdict::Accept
                } else {
                    Verdict::Continue
                }
            }
            Err(e) => {
                encode_error = Some(e);
                Verdict::Accept
            }
        }
    };
    let model = match train_with(template, &data, &tcfg, &mut on_converged) {
        Ok(m) => m,
        // A non-finite loss rules the template out but not the problem.
        Err(_) => return Ok(None),
    };
    lp.stats.restarts += model.restarts_used;
    lp.stats.epochs += model.epochs_used;
    if let Some(e) = encode_error {
        return Err(e.into());
    }
    if found.is_some() {
        lp.log = model.log;
        return Ok(found);
    }
    Ok(None)
}
