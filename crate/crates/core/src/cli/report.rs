//! Benchmark rows, their aggregate summary and CSV persistence.

use std::fmt;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// One inference run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRow {
    pub problem: String,
    pub seed: u64,
    pub mode: String,
    pub solved: bool,
    /// SMT-LIB term of the verified invariant; empty when unsolved.
    pub invariant: String,
    pub wall_time_s: f64,
    pub solver_calls: usize,
    pub invariant_checks: usize,
    pub templates_tried: usize,
    pub restarts: usize,
    pub epochs: usize,
    /// `solved`, `plan_exhausted`, `budget_exceeded` or an error message.
    pub outcome: String,
}

/// Aggregates over a set of rows. Time and call averages are over solved
/// rows only and are absent when nothing was solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub solved: usize,
    pub avg_time_s: Option<f64>,
    pub avg_solver_calls: Option<f64>,
    pub time_per_call_s: Option<f64>,
}

impl Summary {
    pub fn of(rows: &[ProblemRow]) -> Summary {
        let solved: Vec<&ProblemRow> = rows.iter().filter(|r| r.solved).collect();
        let n = solved.len() as f64;
        let time: f64 = solved.iter().map(|r| r.wall_time_s).sum();
        let calls: usize = solved.iter().map(|r| r.solver_calls).sum();
        Summary {
            runs: rows.len(),
            solved: solved.len(),
            avg_time_s: (!solved.is_empty()).then(|| time / n),
            avg_solver_calls: (!solved.is_empty()).then(|| calls as f64 / n),
            time_per_call_s: (calls > 0).then(|| time / calls as f64),
        }
    }

    /// Whether `self` agrees with the recomputation from `rows` up to
    /// relative rounding `tol`.
    pub fn matches(&self, rows: &[ProblemRow], tol: f64) -> bool {
        let fresh = Summary::of(rows);
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (None, None) => true,
            (Some(a), Some(b)) => (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0),
            _ => false,
        };
        self.runs == fresh.runs
            && self.solved == fresh.solved
            && close(self.avg_time_s, fresh.avg_time_s)
            && close(self.avg_solver_calls, fresh.avg_solver_calls)
            && close(self.time_per_call_s, fresh.time_per_call_s)
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |x: Option<f64>, p: usize| x.map_or_else(|| "-".to_string(), |v| format!("{v:.p$}"));
        writeln!(f, "{:<16} {:>8}", "runs", self.runs)?;
        writeln!(f, "{:<16} {:>8}", "solved", self.solved)?;
        writeln!(f, "{:<16} {:>8}", "avg time (s)", opt(self.avg_time_s, 3))?;
        writeln!(f, "{:<16} {:>8}", "avg solver calls", opt(self.avg_solver_calls, 1))?;
        write!(f, "{:<16} {:>8}", "time/call (s)", opt(self.time_per_call_s, 4))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub rows: Vec<ProblemRow>,
}

impl RunReport {
    pub fn summary(&self) -> Summary {
        Summary::of(&self.rows)
    }

    pub fn read_rows(path: &Path) -> Result<Vec<ProblemRow>, csv::Error> {
        csv::Reader::from_path(path)?.deserialize().collect()
    }

    pub fn write_summary(&self, path: &Path) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(path)?;
        w.serialize(self.summary())?;
        w.flush()?;
        Ok(())
    }

    pub fn read_summary(path: &Path) -> Result<Summary, csv::Error> {
        let mut r = csv::Reader::from_path(path)?;
        match r.deserialize().next() {
            Some(s) => s,
            None => Err(csv::Error::from(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "empty summary"))),
        }
    }

    /// Per-problem table for the terminal.
    pub fn table(&self) -> String {
        let mut s = format!("{:<20} {:>5} {:>7} {:>9} {:>6}  invariant\n", "problem", "seed", "solved", "time (s)", "calls");
        for r in &self.rows {
            s.push_str(&format!(
                "{:<20} {:>5} {:>7} {:>9.3} {:>6}  {}\n",
                r.problem,
                r.seed,
                if r.solved { "yes" } else { "no" },
                r.wall_time_s,
                r.solver_calls,
                if r.solved { &r.invariant } else { &r.outcome }
            ));
        }
        s
    }
}

/// Appends rows to a CSV file as they complete, flushing after each one so
/// that an interrupted run keeps what it finished.
pub struct RowWriter {
    inner: csv::Writer<File>,
}

impl RowWriter {
    pub fn create(path: &Path) -> Result<RowWriter, csv::Error> {
        Ok(RowWriter { inner: csv::Writer::from_path(path)? })
    }

    pub fn push(&mut self, row: &ProblemRow) -> Result<(), csv::Error> {
        self.inner.serialize(row)?;
        self.inner.flush()?;
        Ok(())
    }
}
