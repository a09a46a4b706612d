//! Drives a session through an edit script.

use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use pide_core::document::script::{Script, Step, DEFAULT_NODE};
use pide_core::document::DocumentState;
use pide_core::markup::TextRange;
use pide_core::session::{Session, SessionConfig, SessionError, Transport};
use std::sync::Arc;
use thiserror::Error;

use crate::dump::{dump, hit_tree, render, DumpOptions};

/// How long `await-quiescent` waits before declaring the checker stuck.
pub const QUIESCENCE_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("checker failure: {0}")]
    Checker(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for checker trouble, 2 for anything the user can fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Checker(_) => 1,
            CliError::Script { .. } | CliError::Usage(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        CliError::Checker(e.to_string())
    }
}

impl From<pide_core::document::script::ScriptError> for CliError {
    fn from(e: pide_core::document::script::ScriptError) -> Self {
        CliError::Script {
            line: e.line,
            message: e.message,
        }
    }
}

/// Where the checker runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckerChoice {
    InProcess,
    Program(PathBuf),
}

impl CheckerChoice {
    /// The `pide-checker` executable next to the running binary, if there is
    /// one; the in-process checker otherwise.
    pub fn beside_current_exe() -> CheckerChoice {
        std::env::current_exe()
            .ok()
            .and_then(|exe| {
                let candidate = exe.with_file_name(format!("pide-checker{}", std::env::consts::EXE_SUFFIX));
                candidate.is_file().then_some(candidate)
            })
            .map_or(CheckerChoice::InProcess, CheckerChoice::Program)
    }

    pub fn transport(&self) -> Transport {
        match self {
            CheckerChoice::InProcess => Transport::InProcess,
            CheckerChoice::Program(p) => Transport::Process { program: p.clone() },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    pub workers: usize,
    pub checker: CheckerChoice,
    pub dump: DumpOptions,
    pub quiescence_timeout: Duration,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            workers: pide_core::checker::default_workers(),
            checker: CheckerChoice::InProcess,
            dump: DumpOptions::default(),
            quiescence_timeout: QUIESCENCE_TIMEOUT,
        }
    }
}

pub fn start_session(workers: usize, checker: &CheckerChoice) -> Result<Session, CliError> {
    Ok(Session::start(SessionConfig {
        workers,
        transport: checker.transport(),
    })?)
}

/// Runs the steps of `script` against `session`, writing one line per
/// markup hit for every `snapshot` step.
pub fn run_steps(
    session: &Session,
    script: &Script,
    opts: &ReplayOptions,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut node = DEFAULT_NODE.to_string();
    for line in &script.lines {
        match &line.step {
            Step::Node(n) => node.clone_from(n),
            Step::Edit(edit) => {
                session
                    .edit_node(&node, vec![edit.clone()])
                    .map_err(|e| match e {
                        SessionError::Document(d) => CliError::Script {
                            line: line.line,
                            message: d.to_string(),
                        },
                        other => other.into(),
                    })?;
            }
            Step::AwaitQuiescent => {
                if !session.await_quiescent(opts.quiescence_timeout) {
                    return Err(CliError::Checker(format!(
                        "line {}: checker did not become quiescent",
                        line.line
                    )));
                }
            }
            Step::Snapshot { start, stop } => {
                let snap = session.snapshot(&node);
                let hits = snap.markup_query(TextRange::new(*start, *stop));
                let trees: Vec<_> = hits.iter().map(hit_tree).collect();
                out.write_all(render(&trees, opts.dump.format).as_bytes())?;
            }
        }
    }
    Ok(())
}

#[derive(Debug)]
pub struct Replayed {
    /// Output of `snapshot` steps.
    pub queries: String,
    /// Dump of the final state.
    pub dump: String,
    pub state: Arc<DocumentState>,
    pub diagnostics: Vec<String>,
}

/// Replays `script` in a fresh session and dumps the final state.
pub fn replay(script: &Script, opts: &ReplayOptions) -> Result<Replayed, CliError> {
    let session = start_session(opts.workers, &opts.checker)?;
    let mut queries = Vec::new();
    let result = run_steps(&session, script, opts, &mut queries);
    let state = session.state();
    let diagnostics = session.diagnostics();
    let protocol_errors = session.protocol_errors();
    session.shutdown()?;
    result?;
    if protocol_errors > 0 {
        return Err(CliError::Checker(format!(
            "{protocol_errors} protocol error(s): {}",
            diagnostics.join("; ")
        )));
    }
    Ok(Replayed {
        queries: String::from_utf8(queries).expect("rendered markup is UTF-8"),
        dump: if script.lines.is_empty() {
            String::new()
        } else {
            dump(&state, &opts.dump)
        },
        state,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> ReplayOptions {
        ReplayOptions {
            workers: 2,
            dump: DumpOptions {
                stable: true,
                ..DumpOptions::default()
            },
            ..ReplayOptions::default()
        }
    }

    #[test]
    fn empty_script_is_silent() {
        let r = replay(&Script::default(), &opts()).unwrap();
        assert_eq!(r.queries, "");
        assert_eq!(r.dump, "");
    }

    #[test]
    fn out_of_range_edit_reports_its_line() {
        let script = Script::parse("insert 0 \"print 1\"\n\nremove 40 2\n").unwrap();
        let err = replay(&script, &opts()).unwrap_err();
        assert!(matches!(err, CliError::Script { line: 3, .. }), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn snapshot_lines_print_hits() {
        let script = Script::parse("insert 0 \"print z\"\nawait-quiescent\nsnapshot 6 7\n").unwrap();
        let r = replay(&script, &opts()).unwrap();
        assert!(r.queries.contains("<free offset=\"7\" end_offset=\"7\"/>"), "{}", r.queries);
    }
}
