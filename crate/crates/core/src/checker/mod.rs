//! The checker side: a toy calculational language checked incrementally.
//!
//! The checker keeps, per version, the assignment of its commands to execs.
//! An update re-uses the execs of the unchanged command prefix of each node
//! and creates fresh execs from the first changed command on, since every
//! command depends on the state left by its predecessors. Parsing and
//! elaboration of a node run in the protocol loop; evaluation of each fresh
//! exec is an independent task on a worker pool. All output passes through
//! one emitter thread that stamps serial numbers and owns the channel.

pub mod elab;
pub mod eval;
pub mod lang;
pub mod render;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::sync::Arc;
use std::thread;
use std::time::Instant;

use crossbeam_channel::{unbounded, Receiver, Sender};
use log::{debug, warn};

use crate::document::positioned_tree;
use crate::ids::{CommandId, ExecId, VersionId};
use crate::markup::{Markup, Message, MessageKind, TextRange, Tree};
use crate::protocol::{read_chunk, write_chunk, CommandDef, Input, NodeUpdate, Output, ProtocolError};
use crate::syntax::Token;

use elab::{elaborate, Fact, Plan, Task};
use eval::{eval, Cancel, EvalError, Term};
use lang::{parse_command, Expr, NotepadCommand};
use render::{report, unbound_warning};

/// A defined command, parsed once.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub id: CommandId,
    pub source: String,
    pub command: NotepadCommand,
    pub tokens: Vec<Token>,
}

impl Parsed {
    pub fn new(id: CommandId, source: &str) -> Self {
        let (command, tokens) = parse_command(source);
        Parsed {
            id,
            source: source.to_string(),
            command,
            tokens,
        }
    }
}

/// How an exec ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Checked,
    /// Skipped because of unbound variables.
    Unchecked,
    Failed,
    Cancelled,
}

impl Outcome {
    /// Terminal status markup, with the evaluation time attached.
    pub fn status(self, elapsed_us: u128) -> Tree {
        let m = match self {
            Outcome::Checked => Markup::new("finished").with_attr("outcome", "checked"),
            Outcome::Unchecked => Markup::new("finished").with_attr("outcome", "unchecked"),
            Outcome::Failed => Markup::new("failed"),
            Outcome::Cancelled => Markup::new("cancelled"),
        };
        Tree::elem(m.with_attr("elapsed_us", elapsed_us), Vec::new())
    }
}

/// Message without its serial number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Draft {
    pub kind: MessageKind,
    pub range: Option<TextRange>,
    pub body: Vec<Tree>,
}

fn text(s: impl Into<String>) -> Vec<Tree> {
    vec![Tree::text(s)]
}

struct Run<'a> {
    plan: &'a Plan,
    exec: ExecId,
    cancel: &'a Cancel,
    out: &'a mut dyn FnMut(Draft),
}

impl Run<'_> {
    fn say(&mut self, kind: MessageKind, range: Option<TextRange>, body: Vec<Tree>) {
        (self.out)(Draft { kind, range, body });
    }

    fn eval_error(&mut self, e: EvalError, range: TextRange) -> Outcome {
        match e {
            EvalError::Cancelled => Outcome::Cancelled,
            other => {
                self.say(MessageKind::Error, Some(range), text(other.to_string()));
                Outcome::Failed
            }
        }
    }

    /// Warns about `closed` if it has unbound variables; `display` is what
    /// the user wrote.
    fn warn_unbound(&mut self, closed: &Term, display: &Term, written: bool, range: TextRange) -> bool {
        if closed.free_vars().is_empty() {
            return false;
        }
        let plan = self.plan;
        let is_free = |v: &str| !written || !plan.is_bound(v);
        let body = unbound_warning(display, &is_free, range, self.exec.0);
        self.say(MessageKind::Warning, Some(range), body);
        true
    }

    fn value(&mut self, value: &Term, expr: &Expr, label: Option<&str>) -> Outcome {
        if self.warn_unbound(value, &self.plan.display(expr), true, expr.range()) {
            return Outcome::Unchecked;
        }
        match eval(value, self.cancel) {
            Ok(v) => {
                let line = match label {
                    Some(name) => format!("{name} = {v}"),
                    None => v.to_string(),
                };
                self.say(MessageKind::Writeln, None, text(line));
                Outcome::Checked
            }
            Err(e) => self.eval_error(e, expr.range()),
        }
    }

    /// Checks `fact` by evaluation; `sides` give display terms and ranges.
    fn equation(&mut self, fact: &Fact, sides: [(Term, TextRange); 2], written: bool, range: TextRange) -> Outcome {
        let [(l, lr), (r, rr)] = sides;
        let free_l = self.warn_unbound(&fact.lhs, &l, written, lr);
        let free_r = self.warn_unbound(&fact.rhs, &r, written, rr);
        if free_l || free_r {
            return Outcome::Unchecked;
        }
        let values = eval(&fact.lhs, self.cancel).and_then(|a| Ok((a, eval(&fact.rhs, self.cancel)?)));
        match values {
            Ok((a, b)) if a == b => {
                self.say(MessageKind::Writeln, None, text(format!("ok: {a} = {b}")));
                Outcome::Checked
            }
            Ok((a, b)) => {
                self.say(MessageKind::Error, Some(range), text(format!("{a} \u{2260} {b}")));
                Outcome::Failed
            }
            Err(e) => self.eval_error(e, range),
        }
    }

    /// Calculational step: `calc.rhs` must equal `fact.lhs` after folding.
    fn link(&mut self, calc: &Fact, fact: &Fact, range: TextRange) -> Option<Outcome> {
        let folded = calc
            .rhs
            .fold(self.cancel)
            .and_then(|a| Ok((a, fact.lhs.fold(self.cancel)?)));
        match folded {
            Ok((a, b)) if a == b => None,
            Ok((a, b)) => {
                self.say(
                    MessageKind::Error,
                    Some(range),
                    text(format!("calculation does not link: {a} \u{2260} {b}")),
                );
                Some(Outcome::Failed)
            }
            Err(e) => Some(self.eval_error(e, range)),
        }
    }

    fn execute(&mut self, parsed: &Parsed) -> Outcome {
        let keyword = TextRange::new(0, parsed.command_keyword_len());
        match (&self.plan.task, &parsed.command) {
            (Task::Nothing, _) => Outcome::Checked,
            (Task::Fail { message, range }, _) => {
                self.say(MessageKind::Error, Some(*range), text(message.clone()));
                Outcome::Failed
            }
            (Task::Let { name, value }, NotepadCommand::Let { expr, .. }) => self.value(value, expr, Some(name)),
            (Task::Print(value), NotepadCommand::Print(expr)) => self.value(value, expr, None),
            (Task::Have(fact), NotepadCommand::Have { lhs, rhs, range }) => {
                let sides = [
                    (self.plan.display(lhs), lhs.range()),
                    (self.plan.display(rhs), rhs.range()),
                ];
                self.equation(fact, sides, true, *range)
            }
            (Task::Also { calc, fact }, _) => self.link(calc, fact, keyword).unwrap_or(Outcome::Checked),
            (Task::Finally { calc, fact }, _) => {
                let derived = match fact {
                    Some(fact) => {
                        if let Some(failed) = self.link(calc, fact, keyword) {
                            return failed;
                        }
                        Fact {
                            lhs: calc.lhs.clone(),
                            rhs: fact.rhs.clone(),
                        }
                    }
                    None => calc.clone(),
                };
                self.say(
                    MessageKind::Writeln,
                    None,
                    text(format!("derived: {} = {}", derived.lhs, derived.rhs)),
                );
                let sides = [(derived.lhs.clone(), keyword), (derived.rhs.clone(), keyword)];
                self.equation(&derived, sides, false, keyword)
            }
            (task, cmd) => unreachable!("plan {task:?} for command {cmd:?}"),
        }
    }
}

impl Parsed {
    fn command_keyword_len(&self) -> usize {
        self.tokens.first().map_or(0, |t| t.range.len())
    }

    /// Highlighting report of this command under `plan`, if any.
    pub fn report(&self, plan: &Plan) -> Option<Draft> {
        let entries = report(&self.tokens, &self.command, plan);
        (!entries.is_empty()).then(|| Draft {
            kind: MessageKind::Report,
            range: None,
            body: entries.iter().map(positioned_tree).collect(),
        })
    }
}

/// Runs one exec from start to its terminal status.
pub fn run_exec(parsed: &Parsed, plan: &Plan, exec: ExecId, cancel: &Cancel, out: &mut dyn FnMut(Draft)) -> Outcome {
    out(Draft {
        kind: MessageKind::Status,
        range: None,
        body: vec![Tree::elem(Markup::new("running"), Vec::new())],
    });
    let started = Instant::now();
    let outcome = if cancel.is_cancelled() {
        Outcome::Cancelled
    } else {
        Run {
            plan,
            exec,
            cancel,
            out: &mut *out,
        }
        .execute(parsed)
    };
    out(Draft {
        kind: MessageKind::Status,
        range: None,
        body: vec![outcome.status(started.elapsed().as_micros())],
    });
    outcome
}

/// Checks a whole node from scratch, sequentially: the batch reference for
/// incremental runs. Returns the messages of each command in order.
pub fn check_batch(sources: &[&str]) -> Vec<Vec<Draft>> {
    let parsed: Vec<Parsed> = sources
        .iter()
        .enumerate()
        .map(|(i, s)| Parsed::new(CommandId(i as u64 + 1), s))
        .collect();
    let plans = elaborate(parsed.iter().map(|p| &p.command));
    parsed
        .iter()
        .zip(&plans)
        .enumerate()
        .map(|(i, (p, plan))| {
            let mut drafts: Vec<Draft> = p.report(plan).into_iter().collect();
            run_exec(p, plan, ExecId(i as u64 + 1), &Cancel::default(), &mut |d| drafts.push(d));
            drafts
        })
        .collect()
}

enum Emit {
    Output(Output),
    Draft(ExecId, Draft),
}

/// Single owner of the output channel; numbers messages as they pass.
fn emitter(rx: Receiver<Emit>, mut writer: impl Write) {
    let mut serial = 0u64;
    let mut broken = false;
    for item in rx {
        let output = match item {
            Emit::Output(o) => o,
            Emit::Draft(exec, d) => {
                serial += 1;
                Output::Message(Message {
                    serial,
                    kind: d.kind,
                    exec_id: exec.0,
                    range: d.range,
                    body: d.body,
                })
            }
        };
        if broken {
            continue;
        }
        let sent = match output.encode() {
            Ok(payload) => write_chunk(&mut writer, &payload),
            Err(e) => {
                warn!("checker: dropping unencodable {}: {e}", output.name());
                Ok(())
            }
        };
        if let Err(e) = sent {
            debug!("checker: output channel closed: {e}");
            broken = true;
        }
    }
}

type NodeExecs = Arc<Vec<(CommandId, ExecId)>>;

/// Protocol state of the checker.
struct Engine {
    commands: HashMap<CommandId, Arc<Parsed>>,
    versions: HashMap<VersionId, BTreeMap<String, NodeExecs>>,
    cancels: HashMap<ExecId, Arc<Cancel>>,
    next_exec: u64,
    pool: rayon::ThreadPool,
    emit: Sender<Emit>,
}

impl Engine {
    fn new(workers: usize, emit: Sender<Emit>) -> Engine {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("pide-worker-{i}"))
            .build()
            .expect("worker pool");
        Engine {
            commands: HashMap::new(),
            versions: HashMap::from([(VersionId(0), BTreeMap::new())]),
            cancels: HashMap::new(),
            next_exec: 0,
            pool,
            emit,
        }
    }

    fn handle(&mut self, input: Input) {
        match input {
            Input::DefineCommands(defs) => self.define(defs),
            Input::Update {
                old_version,
                new_version,
                nodes,
            } => self.update(old_version, new_version, nodes),
            Input::RemoveVersions(vs) => self.remove_versions(&vs),
            Input::CancelExec(es) => {
                for e in es {
                    if let Some(c) = self.cancels.get(&e) {
                        c.cancel();
                    }
                }
            }
        }
    }

    fn define(&mut self, defs: Vec<CommandDef>) {
        for d in defs {
            self.commands
                .entry(d.id)
                .or_insert_with(|| Arc::new(Parsed::new(d.id, &d.source)));
        }
    }

    fn update(&mut self, old: VersionId, new: VersionId, nodes: Vec<NodeUpdate>) {
        let mut next = self.versions.get(&old).cloned().unwrap_or_else(|| {
            warn!("checker: update from unknown version {old}");
            BTreeMap::new()
        });
        let mut jobs: Vec<(ExecId, Arc<Parsed>, Plan)> = Vec::new();
        for node in nodes {
            let before = next.get(&node.name).cloned().unwrap_or_default();
            let keep = before
                .iter()
                .zip(&node.commands)
                .take_while(|((c, _), n)| c == *n)
                .count();
            let parsed: Vec<Arc<Parsed>> = node
                .commands
                .iter()
                .map(|id| {
                    self.commands.get(id).cloned().unwrap_or_else(|| {
                        warn!("checker: undefined command {id}");
                        Arc::new(Parsed::new(*id, "undefined"))
                    })
                })
                .collect();
            let plans = elaborate(parsed.iter().map(|p| &p.command));
            let mut execs = before[..keep].to_vec();
            for (p, plan) in parsed.into_iter().zip(plans).skip(keep) {
                self.next_exec += 1;
                let exec = ExecId(self.next_exec);
                execs.push((p.id, exec));
                jobs.push((exec, p, plan));
            }
            next.insert(node.name, Arc::new(execs));
        }
        let assign = next.values().flat_map(|v| v.iter().copied()).collect();
        self.versions.insert(new, next);
        self.send(Emit::Output(Output::AssignUpdate { version: new, assign }));
        for (exec, parsed, plan) in jobs {
            let cancel = Arc::new(Cancel::default());
            self.cancels.insert(exec, Arc::clone(&cancel));
            if let Some(d) = parsed.report(&plan) {
                self.send(Emit::Draft(exec, d));
            }
            let emit = self.emit.clone();
            self.pool.spawn_fifo(move || {
                run_exec(&parsed, &plan, exec, &cancel, &mut |d| {
                    let _ = emit.send(Emit::Draft(exec, d));
                });
            });
        }
    }

    fn remove_versions(&mut self, versions: &[VersionId]) {
        for v in versions {
            self.versions.remove(v);
        }
        let live: BTreeSet<ExecId> = self
            .versions
            .values()
            .flat_map(|nodes| nodes.values())
            .flat_map(|execs| execs.iter().map(|(_, e)| *e))
            .collect();
        self.cancels.retain(|e, cancel| {
            let keep = live.contains(e);
            if !keep {
                cancel.cancel();
            }
            keep
        });
    }

    fn send(&self, item: Emit) {
        // only fails once the emitter is gone, i.e. during shutdown
        let _ = self.emit.send(item);
    }

    fn cancel_all(&self) {
        for c in self.cancels.values() {
            c.cancel();
        }
    }
}

/// Runs the checker protocol loop until `reader` ends.
///
/// `workers` is the evaluation pool size. Returns an error only when the
/// input framing breaks; undecodable messages are logged and skipped.
pub fn serve(
    mut reader: impl BufRead,
    writer: impl Write + Send + 'static,
    workers: usize,
) -> Result<(), ProtocolError> {
    let (tx, rx) = unbounded();
    let emitter = thread::Builder::new()
        .name("pide-emitter".into())
        .spawn(move || emitter(rx, std::io::BufWriter::new(writer)))?;
    let mut engine = Engine::new(workers.max(1), tx);
    engine.send(Emit::Output(Output::Ready));
    let result = loop {
        match read_chunk(&mut reader) {
            Ok(Some(payload)) => match Input::decode(&payload) {
                Ok(input) => engine.handle(input),
                Err(e) => warn!("checker: skipping input: {e}"),
            },
            Ok(None) => break Ok(()),
            Err(e) => break Err(e),
        }
    };
    engine.cancel_all();
    drop(engine);
    let _ = emitter.join();
    result
}

/// Worker count from the environment: `PIDE_WORKERS`, else the number of
/// available CPUs.
pub fn default_workers() -> usize {
    std::env::var("PIDE_WORKERS")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|n| *n >= 1)
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()))
}
