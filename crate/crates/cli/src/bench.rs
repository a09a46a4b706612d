//! Timing and reuse accounting for edit scripts.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use pide_core::document::script::Script;
use pide_core::document::DocumentState;
use pide_core::ids::{ExecId, VersionId};
use pide_core::markup::MessageKind;

use crate::replay::{run_steps, start_session, CheckerChoice, CliError, ReplayOptions};

/// Exec reuse caused by one version relative to its predecessor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reuse {
    pub version: VersionId,
    /// Execs carried over from the previous version.
    pub reused: usize,
    /// Fresh execs, i.e. commands that run again.
    pub rerun: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecTiming {
    pub exec: ExecId,
    pub status: String,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub workers: usize,
    pub wall: Duration,
    pub execs: Vec<ExecTiming>,
    pub reuse: Vec<Reuse>,
    /// Wall time with one worker divided by wall time with `workers`.
    pub speedup: Option<f64>,
    /// Final document state, with every version still retained.
    pub state: Arc<DocumentState>,
}

impl BenchReport {
    pub fn total_reused(&self) -> usize {
        self.reuse.iter().map(|r| r.reused).sum()
    }

    pub fn total_rerun(&self) -> usize {
        self.reuse.iter().map(|r| r.rerun).sum()
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "workers: {}", self.workers)?;
        writeln!(f, "wall: {:.3} ms", self.wall.as_secs_f64() * 1e3)?;
        writeln!(f, "execs reused: {}", self.total_reused())?;
        writeln!(f, "execs run: {}", self.total_rerun())?;
        for r in &self.reuse {
            writeln!(f, "version {}: reused {} rerun {}", r.version, r.reused, r.rerun)?;
        }
        for e in &self.execs {
            writeln!(
                f,
                "exec {}: {} in {:.3} ms",
                e.exec,
                e.status,
                e.elapsed.as_secs_f64() * 1e3
            )?;
        }
        if let Some(s) = self.speedup {
            writeln!(f, "speedup vs 1 worker: {s:.2}")?;
        }
        Ok(())
    }
}

/// Reuse of every version against the one before it, computed from the
/// retained assignments.
pub fn reuse_counts(state: &DocumentState) -> Vec<Reuse> {
    let mut previous: BTreeSet<ExecId> = BTreeSet::new();
    let mut out = Vec::new();
    for a in state.assignments() {
        if a.version_id == VersionId(0) {
            continue;
        }
        let now: BTreeSet<ExecId> = a.command_to_exec.values().copied().collect();
        out.push(Reuse {
            version: a.version_id,
            reused: now.intersection(&previous).count(),
            rerun: now.difference(&previous).count(),
        });
        previous = now;
    }
    out
}

/// Evaluation time reported by the terminal status of every exec.
pub fn exec_timings(state: &DocumentState) -> Vec<ExecTiming> {
    state
        .exec_ids()
        .filter_map(|id| {
            let exec = state.exec(id)?;
            let terminal = exec
                .messages
                .iter()
                .filter(|m| m.kind == MessageKind::Status)
                .flat_map(|m| m.body.iter())
                .filter_map(|t| t.markup())
                .find(|m| m.attr("elapsed_us").is_some())?;
            Some(ExecTiming {
                exec: id,
                status: terminal.name.clone(),
                elapsed: Duration::from_micros(terminal.attr("elapsed_us")?.parse().ok()?),
            })
        })
        .collect()
}

/// Runs `script` once, waiting for quiescence at the end, and measures it.
pub fn run_once(script: &Script, workers: usize, checker: &CheckerChoice) -> Result<BenchReport, CliError> {
    let session = start_session(workers, checker)?;
    // the checker announces itself first; waiting keeps start-up off the clock
    let deadline = Instant::now() + Duration::from_secs(10);
    while !session.is_ready() && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(1));
    }
    let opts = ReplayOptions {
        workers,
        checker: checker.clone(),
        ..ReplayOptions::default()
    };
    let started = Instant::now();
    run_steps(&session, script, &opts, &mut std::io::sink())?;
    if !session.await_quiescent(opts.quiescence_timeout) {
        return Err(CliError::Checker("checker did not become quiescent".into()));
    }
    let wall = started.elapsed();
    let state = session.state();
    session.shutdown()?;
    Ok(BenchReport {
        workers,
        wall,
        execs: exec_timings(&state),
        reuse: reuse_counts(&state),
        speedup: None,
        state,
    })
}

/// Like [`run_once`], adding the speedup over a one-worker run when
/// `workers` is more than one.
pub fn bench(script: &Script, workers: usize, checker: &CheckerChoice) -> Result<BenchReport, CliError> {
    let mut report = run_once(script, workers, checker)?;
    if workers > 1 {
        let single = run_once(script, 1, checker)?;
        report.speedup = Some(single.wall.as_secs_f64() / report.wall.as_secs_f64());
    }
    Ok(report)
}
