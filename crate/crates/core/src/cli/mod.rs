//! Command-line interface: `infer`, `trace`, `check` and `bench`.

pub mod bench;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::ast::{fmt_rational, Domain, Program};
use crate::checker::{check, encode_in, formula_to_smt, infer_loop, InferError, InferStats, Status};
use crate::clogic::{EqMode, TNormKind};
use crate::frontend::{parse, parse_formula};
use crate::tracer::{collect, export_csv, SampleConfig};

pub use bench::{compare_tnorms, corpus_files, run_bench, run_problem, BenchConfig, BenchError, CompareReport, TnormRow};
pub use config::{ConfigError, DomainChoice, Mode, Overrides, Settings, SOLVER_ENV};
pub use report::{ProblemRow, RowWriter, RunReport, Summary};

/// Exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const ERROR: i32 = 1;
    /// `infer`: no invariant found. `check`: invariant refuted.
    pub const NOT_FOUND: i32 = 2;
    pub const REFUTED: i32 = 2;
    pub const UNKNOWN: i32 = 3;
    pub const SOLVER_ERROR: i32 = 4;
}

#[derive(Debug, Parser)]
#[command(name = "loopinv", version, about = "Learn and verify loop invariants")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Infer a verified invariant for a program.
    Infer {
        program: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sample executions and print the loop-head trace as CSV.
    Trace {
        program: PathBuf,
        /// Number of sampled runs.
        #[arg(long, default_value_t = 50)]
        runs: usize,
        /// Write to a file instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Check a candidate invariant against a program's conditions.
    Check {
        program: PathBuf,
        /// File holding the invariant.
        invariant_file: Option<PathBuf>,
        /// Invariant given inline.
        #[arg(long = "inv", conflicts_with = "invariant_file")]
        inv: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run inference over a corpus directory and write CSV reports.
    Bench {
        /// Directory of `.loop` files.
        #[arg(default_value = "corpus")]
        corpus: PathBuf,
        /// Output directory for reports.
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        /// Comma-separated seeds; defaults to `--seed`.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Compare t-norms on the disjunctive template of one problem.
        #[arg(long)]
        compare_tnorms: bool,
        /// Problem for `--compare-tnorms`; defaults to `problem1.loop` in the
        /// corpus.
        #[arg(long)]
        problem: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// Solver command, invoked as `<solver> <file.smt2>`.
    #[arg(long)]
    pub solver: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(TNormKind))]
    pub tnorm: Option<TNormKind>,
    /// Equality relaxation: `gauss` or `sigmoid`.
    #[arg(long, value_parser = clap::value_parser!(EqMode))]
    pub eq: Option<EqMode>,
    /// `full` or `static_only`.
    #[arg(long, value_parser = clap::value_parser!(Mode))]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Wall-clock budget per problem, in seconds.
    #[arg(long, value_parser = parse_secs)]
    pub timeout: Option<Duration>,
    /// Timeout per solver query, in seconds.
    #[arg(long, value_parser = parse_secs)]
    pub query_timeout: Option<Duration>,
    /// Problems run in parallel by `bench`.
    #[arg(long, value_parser = parse_jobs)]
    pub jobs: Option<usize>,
    /// Variable sort in solver queries: `natural`, `real` or `int`.
    #[arg(long, value_parser = clap::value_parser!(DomainChoice))]
    pub domain: Option<DomainChoice>,
    /// Shorthand for `--domain int`.
    #[arg(long, conflicts_with = "domain")]
    pub int_mode: bool,
    /// Directory for training-loss CSVs.
    #[arg(long)]
    pub log_training: Option<PathBuf>,
    /// `key = value` settings file, overridden by the environment and flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_secs(s: &str) -> Result<Duration, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(Duration::from_secs_f64(v)),
        _ => Err(format!("expected a positive number of seconds, got `{s}`")),
    }
}

fn parse_jobs(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("expected a positive integer, got `{s}`")),
    }
}

impl Common {
    fn flags(&self) -> Overrides {
        Overrides {
            solver: self.solver.clone(),
            tnorm: self.tnorm,
            eq: self.eq,
            mode: self.mode,
            seed: self.seed,
            timeout: self.timeout,
            query_timeout: self.query_timeout,
            jobs: self.jobs,
            domain: if self.int_mode { Some(DomainChoice::Fixed(Domain::Int)) } else { self.domain },
            log_training: self.log_training.clone(),
        }
    }

    pub fn settings(&self) -> Result<Settings, ConfigError> {
        let file = match &self.config {
            Some(p) => Overrides::from_file(p)?,
            None => Overrides::default(),
        };
        Ok(Settings::resolve([file, Overrides::from_env(), self.flags()]))
    }
}

fn fail(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    exit::ERROR
}

fn load(path: &Path) -> Result<Program, String> {
    let src = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse(&src).map_err(|e| format!("{}: {e}", path.display()))
}

fn stats_line(s: &InferStats) -> String {
    format!(
        "; solver_calls={} invariant_checks={} templates_tried={} restarts={} epochs={} counterexamples={} strengthened={} time={:.3}s",
        s.solver_calls,
        s.invariant_checks,
        s.templates_tried,
        s.restarts,
        s.epochs,
        s.counterexamples,
        s.strengthened,
        s.wall_time.as_secs_f64()
    )
}

fn cmd_infer(program: &Path, settings: &Settings) -> i32 {
    let p = match load(program) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    match infer_loop(&p, &settings.infer_config()) {
        Ok(out) => {
            println!("{}", formula_to_smt(&out.invariant));
            println!("{}", stats_line(&out.stats));
            if let Some(dir) = &settings.log_training {
                let path = dir.join(format!("{}.loss.csv", p.name));
                let written = std::fs::create_dir_all(dir)
                    .and_then(|_| std::fs::File::create(&path))
                    .and_then(|mut f| crate::trainer::write_log_csv(&out.training_log, &mut f));
                if let Err(e) = written {
                    eprintln!("warning: cannot write {}: {e}", path.display());
                }
            }
            exit::OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(s) = e.stats() {
                eprintln!("{}", stats_line(s));
            }
            match e {
                InferError::PlanExhausted { .. } | InferError::BudgetExceeded { .. } => exit::NOT_FOUND,
                InferError::Solver(_) => exit::SOLVER_ERROR,
                _ => exit::ERROR,
            }
        }
    }
}

fn cmd_trace(program: &Path, runs: usize, output: Option<&Path>, settings: &Settings) -> i32 {
    let p = match load(program) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let cfg = SampleConfig {
        num_runs: runs,
        rng_seed: settings.seed,
        domain: settings.infer_config().domain,
        ..SampleConfig::default()
    };
    let trace = match collect(&p, &cfg) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let result = match output {
        Some(path) => std::fs::File::create(path).map_err(|e| e.to_string()).and_then(|f| {
            let mut w = std::io::BufWriter::new(f);
            export_csv(&trace, &mut w).map_err(|e| e.to_string())?;
            w.flush().map_err(|e| e.to_string())
        }),
        None => {
            let mut out = std::io::stdout().lock();
            export_csv(&trace, &mut out).map_err(|e| e.to_string())
        }
    };
    match result {
        Ok(()) => exit::OK,
        Err(e) => fail(e),
    }
}

fn cmd_check(program: &Path, file: Option<&Path>, inline: Option<&str>, settings: &Settings) -> i32 {
    let p = match load(program) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let text = match (file, inline) {
        (_, Some(s)) => s.to_string(),
        (Some(f), None) => match std::fs::read_to_string(f) {
            Ok(t) => t,
            Err(e) => return fail(format!("cannot read {}: {e}", f.display())),
        },
        (None, None) => return fail("an invariant file or --inv is required"),
    };
    let inv = match parse_formula(text.trim().trim_end_matches(';')) {
        Ok(f) => f,
        Err(e) => return fail(format!("invariant: {e}")),
    };
    let domain = settings.infer_config().domain.unwrap_or_else(|| p.natural_domain());
    let vcs = match encode_in(&p, &inv, domain) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    let r = check(&vcs, &settings.solver_config());
    let code = match &r.status {
        Status::Valid => {
            println!("valid");
            exit::OK
        }
        Status::Refuted { condition, model } => {
            let m: Vec<String> = model.iter().map(|(k, v)| format!("{k}={}", fmt_rational(v))).collect();
            println!("refuted {condition}: {}", m.join(" "));
            exit::REFUTED
        }
        Status::SolverUnknown { condition, reason } => {
            println!("unknown {condition}: {reason}");
            exit::UNKNOWN
        }
        Status::SolverError(e) => {
            eprintln!("solver error: {e}");
            exit::SOLVER_ERROR
        }
    };
    println!("; solver_calls={} time={:.3}s", r.solver_calls, r.wall_time.as_secs_f64());
    code
}

fn cmd_bench(corpus: PathBuf, out: PathBuf, seeds: Vec<u64>, compare: bool, problem: Option<PathBuf>, settings: Settings) -> i32 {
    if compare {
        let problem = problem.unwrap_or_else(|| corpus.join("problem1.loop"));
        let seeds = if seeds.is_empty() { (settings.seed..settings.seed + 5).collect() } else { seeds };
        return match compare_tnorms(&problem, &settings, &seeds, &out) {
            Ok(r) => {
                print!("{}", r.table());
                exit::OK
            }
            Err(e) => fail(e),
        };
    }
    let seeds = if seeds.is_empty() { vec![settings.seed] } else { seeds };
    let cfg = BenchConfig { corpus_dir: corpus, out_dir: out, settings, seeds };
    let progress = |r: &ProblemRow| {
        eprintln!("{} seed={} {} {:.3}s", r.problem, r.seed, r.outcome, r.wall_time_s);
    };
    match run_bench(&cfg, &progress) {
        Ok(report) => {
            print!("{}", report.table());
            println!("{}", report.summary());
            exit::OK
        }
        Err(e) => fail(e),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::ERROR } else { exit::OK };
        }
    };
    let common = match &cli.command {
        Command::Infer { common, .. } | Command::Trace { common, .. } | Command::Check { common, .. } | Command::Bench { common, .. } => common,
    };
    let settings = match common.settings() {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    match cli.command {
        Command::Infer { program, .. } => cmd_infer(&program, &settings),
        Command::Trace { program, runs, output, .. } => cmd_trace(&program, runs, output.as_deref(), &settings),
        Command::Check { program, invariant_file, inv, .. } => cmd_check(&program, invariant_file.as_deref(), inv.as_deref(), &settings),
        Command::Bench { corpus, out, seeds, compare_tnorms, problem, .. } => cmd_bench(corpus, out, seeds, compare_tnorms, problem, settings),
    }
}
