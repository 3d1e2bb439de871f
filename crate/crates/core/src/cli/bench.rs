//! Corpus benchmark runs and the t-norm convergence comparison.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{DomainChoice, Settings};
use super::report::{ProblemRow, RowWriter, RunReport};
use crate::ast::{Domain, Formula, Program};
use crate::checker::{check, encode_in, formula_to_smt, infer_loop, query, side_vc, Answer, InferError};
use crate::clogic::TNormKind;
use crate::frontend::{analyze, parse};
use crate::templates::{enumerate, prefilter, strengthen, Template};
use crate::tracer::collect;
use crate::trainer::{extract_from, train_with, write_log_csv, TrainConfig, TrainedModel, Verdict};

/// Disjunctive templates trained while looking for one that verifies.
const MAX_PROBE_TEMPLATES: usize = 20;
/// Epochs between extraction attempts in the t-norm comparison.
const CHECK_EVERY: usize = 5;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("per-problem timeout must be positive")]
    ZeroTimeout,
    #[error("no seeds given")]
    NoSeeds,
    #[error("no .loop files in {0}")]
    EmptyCorpus(PathBuf),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {message}")]
    Problem { path: PathBuf, message: String },
    #[error("no disjunctive template in the plan of {0} verifies")]
    NoDisjunctiveTemplate(PathBuf),
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub corpus_dir: PathBuf,
    pub out_dir: PathBuf,
    pub settings: Settings,
    pub seeds: Vec<u64>,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.settings.timeout.is_zero() {
            return Err(BenchError::ZeroTimeout);
        }
        if self.seeds.is_empty() {
            return Err(BenchError::NoSeeds);
        }
        Ok(())
    }
}

/// `.loop` files of a corpus directory in name order.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let entries = std::fs::read_dir(dir).map_err(|source| BenchError::Read { path: dir.into(), source })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "loop"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(BenchError::EmptyCorpus(dir.into()));
    }
    Ok(files)
}

fn problem_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn load(path: &Path) -> Result<Program, BenchError> {
    let src = std::fs::read_to_string(path).map_err(|source| BenchError::Read { path: path.into(), source })?;
    parse(&src).map_err(|e| BenchError::Problem { path: path.into(), message: e.to_string() })
}

/// Runs inference on one problem. Failures become unsolved rows.
pub fn run_problem(path: &Path, settings: &Settings, seed: u64) -> ProblemRow {
    let start = Instant::now();
    let mut row = ProblemRow {
        problem: problem_name(path),
        seed,
        mode: settings.mode.to_string(),
        solved: false,
        invariant: String::new(),
        wall_time_s: 0.0,
        solver_calls: 0,
        invariant_checks: 0,
        templates_tried: 0,
        restarts: 0,
        epochs: 0,
        outcome: String::new(),
    };
    let program = match load(path) {
        Ok(p) => p,
        Err(e) => {
            row.outcome = format!("error: {e}");
            return row;
        }
    };
    let cfg = Settings { seed, ..settings.clone() }.infer_config();
    let stats = match infer_loop(&program, &cfg) {
        Ok(out) => {
            row.solved = true;
            row.invariant = formula_to_smt(&out.invariant);
            row.outcome = "solved".into();
            if let Some(dir) = &settings.log_training {
                if !out.training_log.is_empty() {
                    let file = dir.join(format!("{}_seed{seed}.loss.csv", row.problem));
                    if let Err(e) = std::fs::File::create(&file).and_then(|mut f| write_log_csv(&out.training_log, &mut f)) {
                        eprintln!("warning: cannot write {}: {e}", file.display());
                    }
                }
            }
            Some(out.stats)
        }
        Err(e) => {
            row.outcome = match &e {
                InferError::PlanExhausted { .. } => "plan_exhausted".into(),
                InferError::BudgetExceeded { .. } => "budget_exceeded".into(),
                other => format!("error: {other}"),
            };
            e.stats().cloned()
        }
    };
    if let Some(s) = stats {
        row.solver_calls = s.solver_calls;
        row.invariant_checks = s.invariant_checks;
        row.templates_tried = s.templates_tried;
        row.restarts = s.restarts;
        row.epochs = s.epochs;
    }
    row.wall_time_s = start.elapsed().as_secs_f64();
    row
}

/// Runs every problem under every seed, writing `results.csv` as rows finish
/// and `summary.csv` at the end. Rows come back in (problem, seed) order.
pub fn run_bench(cfg: &BenchConfig, progress: &(dyn Fn(&ProblemRow) + Sync)) -> Result<RunReport, BenchError> {
    cfg.validate()?;
    let files = corpus_files(&cfg.corpus_dir)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    if let Some(dir) = &cfg.settings.log_training {
        std::fs::create_dir_all(dir)?;
    }
    let work: Vec<(&PathBuf, u64)> = files.iter().flat_map(|f| cfg.seeds.iter().map(move |&s| (f, s))).collect();
    let writer = Mutex::new((RowWriter::create(&cfg.out_dir.join("results.csv"))?, Vec::new()));
    let next = AtomicUsize::new(0);
    let failure = Mutex::new(None);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(&(path, seed)) = work.get(i) else { break };
        let row = run_problem(path, &cfg.settings, seed);
        let mut guard = writer.lock().expect("writer lock");
        if let Err(e) = guard.0.push(&row) {
            failure.lock().expect("failure lock").get_or_insert(e);
        }
        progress(&row);
        guard.1.push((i, row));
    };
    std::thread::scope(|s| {
        for _ in 0..cfg.settings.jobs.clamp(1, work.len().max(1)) {
            s.spawn(worker);
        }
    });
    if let Some(e) = failure.into_inner().expect("failure lock") {
        return Err(e.into());
    }
    let (_, mut rows) = writer.into_inner().expect("writer lock");
    rows.sort_by_key(|(i, _)| *i);
    let report = RunReport { rows: rows.into_iter().map(|(_, r)| r).collect() };
    report.write_summary(&cfg.out_dir.join("summary.csv"))?;
    Ok(report)
}

/// One training run of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TnormRow {
    pub tnorm: String,
    pub seed: u64,
    /// Whether training reached a model whose extraction verifies.
    pub verified: bool,
    /// Epochs until that model, or all epochs spent when none was reached.
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub problem: String,
    pub template: String,
    pub rows: Vec<TnormRow>,
}

impl CompareReport {
    /// Mean iterations per t-norm, over all of its runs.
    pub fn mean_iterations(&self, kind: TNormKind) -> Option<f64> {
        let its: Vec<usize> = self.rows.iter().filter(|r| r.tnorm == kind.name()).map(|r| r.iterations).collect();
        (!its.is_empty()).then(|| its.iter().sum::<usize>() as f64 / its.len() as f64)
    }

    pub fn table(&self) -> String {
        let mut s = format!("{} {}\n{:<12} {:>6} {:>10} {:>9}\n", self.problem, self.template, "t-norm", "runs", "mean iter", "verified");
        for k in [TNormKind::Product, TNormKind::Godel, TNormKind::Lukasiewicz] {
            let rows: Vec<&TnormRow> = self.rows.iter().filter(|r| r.tnorm == k.name()).collect();
            let mean = self.mean_iterations(k).map_or("-".into(), |m| format!("{m:.1}"));
            let ok = rows.iter().filter(|r| r.verified).count();
            s.push_str(&format!("{:<12} {:>6} {:>10} {:>9}\n", k.name(), rows.len(), mean, ok));
        }
        s
    }
}

fn domain_of(p: &Program, settings: &Settings) -> Domain {
    match settings.domain {
        DomainChoice::Natural => p.natural_domain(),
        DomainChoice::Fixed(d) => d,
    }
}

/// The program whose invariant is learned: strengthened when the side
/// condition is discharged.
fn learning_target(p: &Program, domain: Domain, settings: &Settings) -> Result<Program, BenchError> {
    match query(&side_vc(p), domain, &settings.solver_config()) {
        Answer::Unsat => Ok(strengthen(p).strengthened),
        Answer::Error(e) => Err(BenchError::Problem { path: PathBuf::from(&p.name), message: e }),
        _ => Ok(p.clone()),
    }
}

fn verifies(target: &Program, f: &Formula, domain: Domain, settings: &Settings) -> bool {
    encode_in(target, f, domain).is_ok_and(|vcs| check(&vcs, &settings.solver_config()).is_valid())
}

/// Retrains the first verifying disjunctive template of `problem` under each
/// t-norm and seed, recording the epochs until the extracted formula first
/// verifies. Loss histories go to
/// `loss_<tnorm>_seed<k>.csv` in `out_dir`, the rows to `tnorms.csv`.
pub fn compare_tnorms(problem: &Path, settings: &Settings, seeds: &[u64], out_dir: &Path) -> Result<CompareReport, BenchError> {
    if seeds.is_empty() {
        return Err(BenchError::NoSeeds);
    }
    let p = load(problem)?;
    let domain = domain_of(&p, settings);
    let target = learning_target(&p, domain, settings)?;
    let base = settings.infer_config();
    let mut sample = base.sample.clone();
    sample.domain = Some(domain);
    let problem_err = |message: String| BenchError::Problem { path: problem.into(), message };
    let trace = collect(&target, &sample).map_err(|e| problem_err(e.to_string()))?;
    let plan = enumerate(&target, &analyze(&target), &trace, &base.plan).map_err(|e| problem_err(e.to_string()))?;
    let data = trace.distinct_head_states();

    let train_cfg = |kind: TNormKind, seed: u64| TrainConfig {
        tnorm: kind,
        seed,
        log_training: true,
        check_every: CHECK_EVERY,
        ..base.train.clone()
    };
    let mut verdicts: BTreeMap<Formula, bool> = BTreeMap::new();
    // Trains until the extracted formula verifies, reporting whether it did.
    let mut run = |t: &Template, kind: TNormKind, seed: u64| -> Result<(TrainedModel, bool), BenchError> {
        let mut ok = false;
        let m = train_with(t, &data, &train_cfg(kind, seed), &mut |g, states| {
            let Ok(f) = extract_from(g, &t.formula, states, &base.extract) else { return Verdict::Continue };
            ok = *verdicts.entry(f).or_insert_with_key(|f| verifies(&target, f, domain, settings));
            if ok {
                Verdict::Accept
            } else {
                Verdict::Continue
            }
        })
        .map_err(|e| problem_err(e.to_string()))?;
        Ok((m, ok))
    };

    let mut template = None;
    for t in plan.templates.iter().filter(|t| t.formula.has_disjunction() && prefilter(t, &trace)).take(MAX_PROBE_TEMPLATES) {
        if run(t, TNormKind::Product, settings.seed)?.1 {
            template = Some(t.clone());
            break;
        }
    }
    let template = template.ok_or_else(|| BenchError::NoDisjunctiveTemplate(problem.into()))?;

    std::fs::create_dir_all(out_dir)?;
    let mut rows = Vec::new();
    for kind in [TNormKind::Product, TNormKind::Godel, TNormKind::Lukasiewicz] {
        for &seed in seeds {
            let (m, verified) = run(&template, kind, seed)?;
            let mut f = std::fs::File::create(out_dir.join(format!("loss_{kind}_seed{seed}.csv")))?;
            write_log_csv(&m.log, &mut f)?;
            rows.push(TnormRow { tnorm: kind.name().into(), seed, verified, iterations: m.epochs_used });
        }
    }
    let mut w = csv::Writer::from_path(out_dir.join("tnorms.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(CompareReport { problem: problem_name(problem), template: template.to_string(), rows })
}
