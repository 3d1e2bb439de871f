//! Verification conditions for candidate invariants and the external solver
//! that discharges them.
//!
//! Each condition is phrased as a satisfiability query whose `unsat` answer
//! means the condition holds. Queries are written to SMT-LIB files and passed
//! to a solver binary.

mod infer;
mod smt;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::ast::{CmpOp, Cond, Domain, EvalError, Formula, Program, State, Stmt};

pub use infer::{infer_loop, simplify, InferConfig, InferError, InferOutcome, InferStats};
pub use smt::{
    emit_smtlib, formula_to_smt, logic_for, parse_model, parse_sexps, sexp_value, smt_rational, symbol, Assignment, Prop,
    SExp, Term,
};

/// Default per-query solver timeout.
pub const QUERY_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("unsupported statement: {0}")]
    UnsupportedStatement(String),
    #[error("invariant mentions `{0}`, which is not a program variable")]
    UnknownVariable(String),
}

/// Name of the post-state copy of `v`.
pub fn primed(v: &str) -> String {
    format!("{v}'")
}

/// Name of the `i`-th nondeterministic choice.
pub fn nondet_symbol(i: usize) -> String {
    format!("unknown!{i}")
}

/// One loop iteration in single-assignment form: each variable's post-state
/// value as a term over pre-state variables and choice symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub defs: Vec<(String, Term)>,
    /// Fresh boolean symbols, one per `unknown()` in pre-order.
    pub nondet: Vec<String>,
}

impl Transition {
    pub fn of(p: &Program) -> Result<Transition, EncodeError> {
        let mut env: BTreeMap<String, Term> = p.vars.iter().map(|v| (v.clone(), Term::Var(v.clone()))).collect();
        let mut nondet = Vec::new();
        walk(&p.body, &mut env, &mut nondet)?;
        let defs = p.vars.iter().map(|v| (v.clone(), env[v].clone())).collect();
        Ok(Transition { defs, nondet })
    }

    /// Equations `v' = def_v`.
    pub fn relation(&self) -> Prop {
        Prop::And(
            self.defs.iter().map(|(v, t)| Prop::Cmp(CmpOp::Eq, Term::Var(primed(v)), t.clone())).collect(),
        )
    }

    /// Evaluates the transition as a function of the state and choices.
    pub fn apply(&self, state: &State, choices: &[bool]) -> Result<State, EvalError> {
        let a = Assignment {
            nums: state.clone(),
            bools: self.nondet.iter().cloned().zip(choices.iter().copied()).collect(),
        };
        self.defs.iter().map(|(v, t)| Ok((v.clone(), t.eval(&a)?))).collect()
    }
}

fn walk(body: &[Stmt], env: &mut BTreeMap<String, Term>, nondet: &mut Vec<String>) -> Result<(), EncodeError> {
    for s in body {
        match s {
            Stmt::Assign { target, expr } => {
                if !env.contains_key(target) {
                    return Err(EncodeError::UnsupportedStatement(format!("assignment to undeclared `{target}`")));
                }
                let t = Term::from_expr(expr, env);
                env.insert(target.clone(), t);
            }
            Stmt::IfElse { cond, then_branch, else_branch } => {
                let c = match cond {
                    Cond::Nondet => {
                        let name = nondet_symbol(nondet.len());
                        nondet.push(name.clone());
                        Prop::Var(name)
                    }
                    Cond::Formula(f) => Prop::from_formula(f, env),
                };
                let mut then_env = env.clone();
                walk(then_branch, &mut then_env, nondet)?;
                let mut else_env = env.clone();
                walk(else_branch, &mut else_env, nondet)?;
                for (v, slot) in env.iter_mut() {
                    let (a, b) = (&then_env[v], &else_env[v]);
                    *slot = if a == b { a.clone() } else { Term::Ite(Box::new(c.clone()), Box::new(a.clone()), Box::new(b.clone())) };
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Side,
    Pre,
    Inductive,
    Post,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Side => "side",
            Condition::Pre => "pre",
            Condition::Inductive => "ind",
            Condition::Post => "post",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VcSet {
    /// `P && !I`
    pub pre_vc: Prop,
    /// `I && C && T(v, v') && !I[v']`
    pub ind_vc: Prop,
    /// `I && !C && !Q`
    pub post_vc: Prop,
    /// `P && !C && !Q`, present when the problem was strengthened.
    pub side_vc: Option<Prop>,
    pub domain: Domain,
}

impl VcSet {
    /// Queries in checking order.
    pub fn queries(&self) -> Vec<(Condition, &Prop)> {
        let mut out = Vec::new();
        if let Some(s) = &self.side_vc {
            out.push((Condition::Side, s));
        }
        out.push((Condition::Pre, &self.pre_vc));
        out.push((Condition::Inductive, &self.ind_vc));
        out.push((Condition::Post, &self.post_vc));
        out
    }
}

fn check_vars(p: &Program, f: &Formula) -> Result<(), EncodeError> {
    let mut vars = Vec::new();
    f.collect_vars(&mut vars);
    match vars.into_iter().find(|v| !p.vars.contains(v)) {
        Some(v) => Err(EncodeError::UnknownVariable(v)),
        None => Ok(()),
    }
}

/// Conditions for `inv` over the program's natural domain.
pub fn encode(p: &Program, inv: &Formula) -> Result<VcSet, EncodeError> {
    encode_in(p, inv, p.natural_domain())
}

pub fn encode_in(p: &Program, inv: &Formula, domain: Domain) -> Result<VcSet, EncodeError> {
    check_vars(p, inv)?;
    let id = BTreeMap::new();
    let tr = Transition::of(p)?;
    let next: BTreeMap<String, Term> = p.vars.iter().map(|v| (v.clone(), Term::Var(primed(v)))).collect();
    let i = Prop::from_formula(inv, &id);
    let c = Prop::from_formula(&p.loop_cond, &id);
    Ok(VcSet {
        pre_vc: Prop::And(vec![Prop::from_formula(&p.pre, &id), Prop::not(i.clone())]),
        ind_vc: Prop::And(vec![i.clone(), c.clone(), tr.relation(), Prop::not(Prop::from_formula(inv, &next))]),
        post_vc: Prop::And(vec![i, Prop::not(c), Prop::not(Prop::from_formula(&p.post, &id))]),
        side_vc: None,
        domain,
    })
}

/// `P && !C && !Q` for `p`.
pub fn side_vc(p: &Program) -> Prop {
    let id = BTreeMap::new();
    Prop::And(vec![
        Prop::from_formula(&p.pre, &id),
        Prop::not(Prop::from_formula(&p.loop_cond, &id)),
        Prop::not(Prop::from_formula(&p.post, &id)),
    ])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    /// Program and leading arguments; the query file is appended.
    pub command: String,
    pub timeout: Duration,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { command: "z3".into(), timeout: QUERY_TIMEOUT }
    }
}

/// Answer to a single query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    Unsat,
    Sat(State),
    Unknown(String),
    Error(String),
}

fn run_solver(script: &str, cfg: &SolverConfig) -> Answer {
    let mut parts = cfg.command.split_whitespace();
    let Some(program) = parts.next() else { return Answer::Error("empty solver command".into()) };
    let file = match tempfile::Builder::new().prefix("loopinv-").suffix(".smt2").tempfile() {
        Ok(mut f) => match f.write_all(script.as_bytes()).and_then(|_| f.flush()) {
            Ok(()) => f,
            Err(e) => return Answer::Error(format!("writing query: {e}")),
        },
        Err(e) => return Answer::Error(format!("creating query file: {e}")),
    };
    let child = Command::new(program)
        .args(parts)
        .arg(file.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn();
    let mut child = match child {
        Ok(c) => c,
        Err(e) => return Answer::Error(format!("cannot run `{program}`: {e}")),
    };
    let mut out = child.stdout.take().expect("piped stdout");
    let mut err = child.stderr.take().expect("piped stderr");
    let out_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = out.read_to_string(&mut s);
        s
    });
    let err_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = err.read_to_string(&mut s);
        s
    });
    let start = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(st)) => break Some(st),
            Ok(None) if start.elapsed() >= cfg.timeout => {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(2)),
            Err(e) => return Answer::Error(format!("waiting for solver: {e}")),
        }
    };
    // After a kill, grandchildren may still hold the pipes open, so the
    // readers are left to finish on their own.
    let Some(status) = status else { return Answer::Unknown(format!("timeout after {:?}", cfg.timeout)) };
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();
    let mut lines = stdout.splitn(2, '\n');
    let first = lines.next().unwrap_or("").trim();
    let rest = lines.next().unwrap_or("");
    match first {
        "unsat" => Answer::Unsat,
        "sat" => match parse_model(rest) {
            Some(m) => Answer::Sat(m),
            None => Answer::Error(format!("unparseable model: {}", rest.trim())),
        },
        "unknown" | "timeout" => Answer::Unknown(first.to_string()),
        _ => Answer::Error(format!("solver exited with {status}: {} {}", stdout.trim(), stderr.trim()).trim().to_string()),
    }
}

/// Runs one query.
pub fn query(vc: &Prop, domain: Domain, cfg: &SolverConfig) -> Answer {
    run_solver(&emit_smtlib(vc, domain), cfg)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Valid,
    Refuted { condition: Condition, model: State },
    SolverUnknown { condition: Condition, reason: String },
    SolverError(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationResult {
    pub status: Status,
    /// One per query.
    pub solver_calls: usize,
    pub wall_time: Duration,
}

impl VerificationResult {
    pub fn is_valid(&self) -> bool {
        self.status == Status::Valid
    }
}

/// Discharges every query in order. The first satisfiable query refutes;
/// an unknown answer is reported only if no later query refutes.
pub fn check(vcs: &VcSet, cfg: &SolverConfig) -> VerificationResult {
    let start = Instant::now();
    let mut calls = 0;
    let mut unknown = None;
    for (condition, vc) in vcs.queries() {
        calls += 1;
        match query(vc, vcs.domain, cfg) {
            Answer::Unsat => {}
            Answer::Sat(model) => {
                return VerificationResult {
                    status: Status::Refuted { condition, model },
                    solver_calls: calls,
                    wall_time: start.elapsed(),
                }
            }
            Answer::Unknown(reason) => {
                unknown.get_or_insert(Status::SolverUnknown { condition, reason });
            }
            Answer::Error(e) => {
                return VerificationResult { status: Status::SolverError(e), solver_calls: calls, wall_time: start.elapsed() }
            }
        }
    }
    VerificationResult { status: unknown.unwrap_or(Status::Valid), solver_calls: calls, wall_time: start.elapsed() }
}

#[cfg(test)]
mod tests;
