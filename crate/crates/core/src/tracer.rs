//! Executes a program on sampled initial states and records every loop-head
//! state plus the state after exit.
//!
//! Arithmetic is exact; conversion to floating point happens only when the
//! trainer builds its data matrix.

use std::io::Write;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ast::{fmt_rational, rat, Cond, Domain, EvalError, Formula, Program, Rational, State, Stmt};
use crate::frontend::{interval_bounds, Interval};

/// Consecutive rejected draws before sampling gives up.
pub const MAX_REJECTIONS: usize = 10_000;

/// Resolution of real-valued samples.
const REAL_GRID: i64 = 100;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("invalid sampling configuration: {0}")]
    InvalidConfig(String),
    #[error("could not sample a state satisfying the precondition after {0} attempts")]
    SamplingExhausted(usize),
    #[error("initial state does not satisfy the precondition")]
    PreconditionViolated,
    #[error("run {run}: {source}")]
    Eval { run: usize, source: EvalError },
    #[error("trace has no runs")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct SampleConfig {
    pub num_runs: usize,
    pub unconstrained_range: (Rational, Rational),
    pub max_iterations: usize,
    pub rng_seed: u64,
    /// Overrides the program's natural domain for sampling.
    pub domain: Option<Domain>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            num_runs: 50,
            unconstrained_range: (rat(-50), rat(50)),
            max_iterations: 1_000,
            rng_seed: 0,
            domain: None,
        }
    }
}

impl SampleConfig {
    fn validate(&self) -> Result<(), TraceError> {
        if self.num_runs == 0 {
            return Err(TraceError::InvalidConfig("num_runs must be at least 1".into()));
        }
        if self.unconstrained_range.0 >= self.unconstrained_range.1 {
            return Err(TraceError::InvalidConfig("range lower end must be below upper end".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub init: State,
    /// One entry per evaluation of the loop condition, starting with `init`.
    pub snapshots: Vec<State>,
    pub final_state: State,
    /// Set when `max_iterations` was hit before the loop exited.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub program: String,
    pub vars: Vec<String>,
    pub runs: Vec<Run>,
}

impl Trace {
    pub fn head_states(&self) -> impl Iterator<Item = &State> {
        self.runs.iter().flat_map(|r| r.snapshots.iter())
    }

    /// Distinct loop-head states in first-seen order.
    pub fn distinct_head_states(&self) -> Vec<State> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for s in self.head_states() {
            if seen.insert(s.clone()) {
                out.push(s.clone());
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }
}

fn ceil(r: &Rational) -> BigInt {
    r.ceil().to_integer()
}

fn floor(r: &Rational) -> BigInt {
    r.floor().to_integer()
}

fn uniform_int(rng: &mut ChaCha8Rng, lo: &BigInt, hi: &BigInt) -> BigInt {
    let span = (hi - lo).to_i64().unwrap_or(i64::MAX - 1);
    lo + BigInt::from(rng.gen_range(0..=span))
}

/// Closed sampling box for one variable: the pre-implied interval with open
/// ends filled in from the unconstrained range.
fn sampling_box(iv: Option<&Interval>, range: &(Rational, Rational)) -> (Rational, Rational, bool, bool) {
    let width = &range.1 - &range.0;
    let (lo, lo_strict) = match iv.and_then(|i| i.lo.as_ref()) {
        Some(b) => (b.value.clone(), b.strict),
        None => (range.0.clone(), false),
    };
    let (hi, hi_strict) = match iv.and_then(|i| i.hi.as_ref()) {
        Some(b) => (b.value.clone(), b.strict),
        None => (range.1.clone().max(&lo + &width), false),
    };
    let lo = if iv.and_then(|i| i.lo.as_ref()).is_none() { lo.min(&hi - &width) } else { lo };
    (lo, hi, lo_strict, hi_strict)
}

fn draw(rng: &mut ChaCha8Rng, bx: &(Rational, Rational, bool, bool), domain: Domain) -> Option<Rational> {
    let (lo, hi, lo_strict, hi_strict) = bx;
    if lo == hi {
        return (!lo_strict && !hi_strict).then(|| lo.clone());
    }
    let scale = match domain {
        Domain::Int => Rational::one(),
        Domain::Real => rat(REAL_GRID),
    };
    let mut a = ceil(&(lo * &scale));
    let mut b = floor(&(hi * &scale));
    if *lo_strict && Rational::from_integer(a.clone()) == lo * &scale {
        a += 1;
    }
    if *hi_strict && Rational::from_integer(b.clone()) == hi * &scale {
        b -= 1;
    }
    if a > b {
        return None;
    }
    Some(Rational::from_integer(uniform_int(rng, &a, &b)) / scale)
}

fn domain_of(p: &Program, cfg: &SampleConfig) -> Domain {
    cfg.domain.unwrap_or_else(|| p.natural_domain())
}

/// Draws `cfg.num_runs` initial states satisfying `p.pre`.
///
/// Variables with interval bounds in the precondition are drawn inside them,
/// the rest from the unconstrained range; anything else the precondition
/// says is enforced by rejection.
pub fn sample_inits(p: &Program, cfg: &SampleConfig) -> Result<Vec<State>, TraceError> {
    cfg.validate()?;
    let domain = domain_of(p, cfg);
    let bounds = interval_bounds(&p.pre);
    let boxes: Vec<_> =
        p.vars.iter().map(|v| (v.clone(), sampling_box(bounds.get(v), &cfg.unconstrained_range))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut out = Vec::with_capacity(cfg.num_runs);
    while out.len() < cfg.num_runs {
        let mut accepted = None;
        for _ in 0..MAX_REJECTIONS {
            let mut state = State::new();
            let mut ok = true;
            for (v, bx) in &boxes {
                match draw(&mut rng, bx, domain) {
                    Some(x) => {
                        state.insert(v.clone(), x);
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && p.pre.eval(&state).unwrap_or(false) {
                accepted = Some(state);
                break;
            }
        }
        match accepted {
            Some(s) => out.push(s),
            None => return Err(TraceError::SamplingExhausted(MAX_REJECTIONS)),
        }
    }
    Ok(out)
}

/// Executes `body` once from `state`. `choose` resolves each `unknown()`.
pub fn exec_body(body: &[Stmt], state: &mut State, choose: &mut dyn FnMut() -> bool) -> Result<(), EvalError> {
    exec_body_indexed(body, state, &mut |_| choose())
}

/// Number of `unknown()` conditions in `body`, nested ones included.
pub fn count_nondet(body: &[Stmt]) -> usize {
    body.iter()
        .map(|s| match s {
            Stmt::Assign { .. } => 0,
            Stmt::IfElse { cond, then_branch, else_branch } => {
                usize::from(*cond == Cond::Nondet) + count_nondet(then_branch) + count_nondet(else_branch)
            }
        })
        .sum()
}

/// Like [`exec_body`], but `choose` receives the static index of the
/// `unknown()` being resolved, numbered in pre-order (condition, then
/// branch, else branch).
pub fn exec_body_indexed(body: &[Stmt], state: &mut State, choose: &mut dyn FnMut(usize) -> bool) -> Result<(), EvalError> {
    fn go(body: &[Stmt], state: &mut State, next: &mut usize, choose: &mut dyn FnMut(usize) -> bool) -> Result<(), EvalError> {
        for s in body {
            match s {
                Stmt::Assign { target, expr } => {
                    let v = expr.eval(state)?;
                    state.insert(target.clone(), v);
                }
                Stmt::IfElse { cond, then_branch, else_branch } => {
                    let taken = match cond {
                        Cond::Nondet => {
                            *next += 1;
                            choose(*next - 1)
                        }
                        Cond::Formula(f) => f.eval(state)?,
                    };
                    if taken {
                        go(then_branch, state, next, choose)?;
                        *next += count_nondet(else_branch);
                    } else {
                        *next += count_nondet(then_branch);
                        go(else_branch, state, next, choose)?;
                    }
                }
            }
        }
        Ok(())
    }
    go(body, state, &mut 0, choose)
}

fn stream_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03)) ^ 0x5851_F42D
}

/// Runs the program from `init` with the nondeterminism stream `stream`.
pub fn run_stream(p: &Program, init: &State, cfg: &SampleConfig, stream: u64) -> Result<Run, EvalError> {
    run_with_loop(&p.loop_cond, &p.body, init, cfg.max_iterations, stream_seed(cfg.rng_seed, stream))
}

/// Runs the program from `init`; nondeterministic branches are seeded coin
/// flips drawn from `cfg.rng_seed`.
pub fn run(p: &Program, init: &State, cfg: &SampleConfig) -> Result<Run, TraceError> {
    if !p.pre.eval(init).map_err(|source| TraceError::Eval { run: 0, source })? {
        return Err(TraceError::PreconditionViolated);
    }
    run_stream(p, init, cfg, 0).map_err(|source| TraceError::Eval { run: 0, source })
}

fn run_with_loop(
    cond: &Formula,
    body: &[Stmt],
    init: &State,
    max_iterations: usize,
    seed: u64,
) -> Result<Run, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut choose = move || rng.gen_bool(0.5);
    let mut state = init.clone();
    let mut snapshots = Vec::new();
    let mut iterations = 0;
    let truncated = loop {
        snapshots.push(state.clone());
        if !cond.eval(&state)? {
            break false;
        }
        if iterations == max_iterations {
            break true;
        }
        exec_body(body, &mut state, &mut choose)?;
        iterations += 1;
    };
    Ok(Run { init: init.clone(), snapshots, final_state: state, truncated })
}

/// Samples initial states and runs the program from each.
pub fn collect(p: &Program, cfg: &SampleConfig) -> Result<Trace, TraceError> {
    let inits = sample_inits(p, cfg)?;
    let runs = inits
        .iter()
        .enumerate()
        .map(|(i, init)| run_stream(p, init, cfg, i as u64).map_err(|source| TraceError::Eval { run: i, source }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trace { program: p.name.clone(), vars: p.vars.clone(), runs })
}

/// Writes `run_id,step,kind,<vars...>`; one `head` row per snapshot and a
/// `final` row per run.
pub fn export_csv(t: &Trace, out: &mut dyn Write) -> Result<(), TraceError> {
    if t.runs.is_empty() {
        return Err(TraceError::Empty);
    }
    write!(out, "run_id,step,kind")?;
    for v in &t.vars {
        write!(out, ",{v}")?;
    }
    writeln!(out)?;
    let row = |out: &mut dyn Write, id: usize, step: usize, kind: &str, s: &State| -> std::io::Result<()> {
        write!(out, "{id},{step},{kind}")?;
        for v in &t.vars {
            match s.get(v) {
                Some(x) => write!(out, ",{}", fmt_rational(x))?,
                None => write!(out, ",")?,
            }
        }
        writeln!(out)
    };
    for (id, r) in t.runs.iter().enumerate() {
        for (k, s) in r.snapshots.iter().enumerate() {
            row(out, id, k, "head", s)?;
        }
        row(out, id, r.snapshots.len(), "final", &r.final_state)?;
    }
    Ok(())
}
