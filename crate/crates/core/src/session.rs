//! Front-end session: the public face of the document model.
//!
//! Callers submit edits, take snapshots, remove old versions and shut the
//! session down; the protocol to the checker stays private. All mutations go
//! through one writer lock that is only ever held for table updates, never
//! across I/O. After each mutation the state is published as an immutable
//! value, so snapshot readers never wait for the writer.
//!
//! Three threads serve the checker channel: a writer draining an unbounded
//! input queue, a reader decoding output chunks, and an applier folding
//! decoded outputs into the document state in batches.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, BufWriter};
use std::net::Shutdown;
use std::os::unix::net::{UnixListener, UnixStream};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use arc_swap::ArcSwap;
use crossbeam_channel::{unbounded, Receiver, Sender};
use log::{debug, info, warn};
use thiserror::Error;

use crate::checker;
use crate::document::{DocumentError, DocumentState, Removed, Snapshot, TextEdit};
use crate::ids::{ExecId, VersionId};
use crate::protocol::{read_chunk, write_chunk, CommandDef, Input, NodeUpdate, Output};

/// How long shutdown waits for the checker before killing it.
pub const SHUTDOWN_GRACE: Duration = Duration::from_secs(2);

/// Outputs applied under one acquisition of the writer lock.
const MAX_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transport {
    /// Checker loop on threads of this process, over a socket pair.
    InProcess,
    /// Separate checker executable, started with `--socket PATH --workers N`.
    Process { program: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionConfig {
    pub workers: usize,
    pub transport: Transport,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            workers: checker::default_workers(),
            transport: Transport::InProcess,
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("checker is gone")]
    Dead,
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error("cannot start checker: {0}")]
    Start(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

enum Outbound {
    Input(Input),
    Close,
}

struct Shared {
    writer: Mutex<DocumentState>,
    changed: Condvar,
    published: ArcSwap<DocumentState>,
    generation: AtomicU64,
    ready: AtomicBool,
    dead: AtomicBool,
    diagnostics: Mutex<Vec<String>>,
    protocol_errors: AtomicU64,
}

impl Shared {
    fn publish(&self, state: &DocumentState) {
        self.published.store(Arc::new(state.clone()));
        self.generation.fetch_add(1, Ordering::Release);
        self.changed.notify_all();
    }

    fn diagnose(&self, line: String) {
        debug!("session diagnostic: {line}");
        self.diagnostics.lock().expect("diagnostics lock").push(line);
    }

    /// A diagnostic caused by the checker breaking the protocol, as opposed
    /// to stray output on its standard streams.
    fn protocol_error(&self, line: String) {
        self.protocol_errors.fetch_add(1, Ordering::Release);
        self.diagnose(line);
    }

    fn lock(&self) -> MutexGuard<'_, DocumentState> {
        self.writer.lock().expect("document writer lock")
    }
}

pub struct Session {
    shared: Arc<Shared>,
    outbound: Sender<Outbound>,
    threads: Vec<JoinHandle<()>>,
    checker: Option<CheckerHandle>,
    closed: bool,
}

enum CheckerHandle {
    Thread(JoinHandle<()>),
    Process {
        child: Child,
        _socket_dir: tempfile::TempDir,
    },
}

impl Session {
    pub fn start(config: SessionConfig) -> Result<Session, SessionError> {
        let shared = Arc::new(Shared {
            writer: Mutex::new(DocumentState::new()),
            changed: Condvar::new(),
            published: ArcSwap::from_pointee(DocumentState::new()),
            generation: AtomicU64::new(0),
            ready: AtomicBool::new(false),
            dead: AtomicBool::new(false),
            diagnostics: Mutex::new(Vec::new()),
            protocol_errors: AtomicU64::new(0),
        });
        let workers = config.workers.max(1);
        let (stream, handle) = match config.transport {
            Transport::InProcess => {
                let (ours, theirs) = UnixStream::pair()?;
                let reader = BufReader::new(theirs.try_clone()?);
                let handle = thread::Builder::new()
                    .name("pide-checker".into())
                    .spawn(move || {
                        if let Err(e) = checker::serve(reader, theirs, workers) {
                            warn!("in-process checker stopped: {e}");
                        }
                    })?;
                (ours, CheckerHandle::Thread(handle))
            }
            Transport::Process { program } => spawn_checker(&program, workers, &shared)?,
        };

        let (out_tx, out_rx) = unbounded();
        let (decoded_tx, decoded_rx) = unbounded();
        let write_half = stream.try_clone()?;
        let threads = vec![
            thread::Builder::new()
                .name("pide-session-writer".into())
                .spawn(move || write_loop(write_half, out_rx))?,
            {
                let shared = Arc::clone(&shared);
                thread::Builder::new()
                    .name("pide-session-reader".into())
                    .spawn(move || read_loop(BufReader::new(stream), decoded_tx, &shared))?
            },
            {
                let shared = Arc::clone(&shared);
                let out_tx = out_tx.clone();
                thread::Builder::new()
                    .name("pide-session-applier".into())
                    .spawn(move || apply_loop(decoded_rx, out_tx, &shared))?
            },
        ];
        Ok(Session {
            shared,
            outbound: out_tx,
            threads,
            checker: Some(handle),
            closed: false,
        })
    }

    fn send(&self, input: Input) -> Result<(), SessionError> {
        self.outbound
            .send(Outbound::Input(input))
            .map_err(|_| SessionError::Dead)
    }

    fn check_alive(&self) -> Result<(), SessionError> {
        if self.closed || self.shared.dead.load(Ordering::Acquire) {
            Err(SessionError::Dead)
        } else {
            Ok(())
        }
    }

    /// Submits one batch of per-node edits as a new version and returns its
    /// id without waiting for the checker.
    pub fn edit(&self, batch: Vec<(String, Vec<TextEdit>)>) -> Result<VersionId, SessionError> {
        self.check_alive()?;
        let mut state = self.shared.lock();
        let outcome = state.edit(&batch)?;
        let defs: Vec<CommandDef> = outcome
            .changes
            .iter()
            .flat_map(|c| &c.inserted)
            .map(|c| CommandDef {
                id: c.id,
                name: c.name().to_string(),
                source: c.source.to_string(),
            })
            .collect();
        let nodes = outcome
            .changes
            .iter()
            .filter(|c| !c.removed.is_empty() || !c.inserted.is_empty())
            .map(|c| NodeUpdate {
                name: c.node.clone(),
                commands: outcome
                    .version
                    .node(&c.node)
                    .map(|n| n.commands.iter().map(|c| c.id).collect())
                    .unwrap_or_default(),
            })
            .collect();
        if !defs.is_empty() {
            self.send(Input::DefineCommands(defs))?;
        }
        self.send(Input::Update {
            old_version: outcome.old_version,
            new_version: outcome.version.id,
            nodes,
        })?;
        self.shared.publish(&state);
        Ok(outcome.version.id)
    }

    /// Convenience for a single node.
    pub fn edit_node(&self, node: &str, edits: Vec<TextEdit>) -> Result<VersionId, SessionError> {
        self.edit(vec![(node.to_string(), edits)])
    }

    /// Immutable view of `node`; never waits for the checker or the writer.
    pub fn snapshot(&self, node: &str) -> Snapshot {
        self.shared.published.load().snapshot(node)
    }

    /// The most recently published document state.
    pub fn state(&self) -> Arc<DocumentState> {
        self.shared.published.load_full()
    }

    /// Counter bumped on every published change.
    pub fn generation(&self) -> u64 {
        self.shared.generation.load(Ordering::Acquire)
    }

    /// Drops versions outside `keep` and tells the checker to forget them.
    pub fn remove_versions(&self, keep: &BTreeSet<VersionId>) -> Result<Removed, SessionError> {
        self.check_alive()?;
        let mut state = self.shared.lock();
        let removed = state.remove_versions(keep)?;
        if !removed.versions.is_empty() {
            self.send(Input::RemoveVersions(removed.versions.clone()))?;
        }
        self.shared.publish(&state);
        Ok(removed)
    }

    /// Blocks until the tip is assigned and all its execs have terminated.
    /// Returns false on timeout or when the checker died.
    pub fn await_quiescent(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut state = self.shared.lock();
        loop {
            if state.is_quiescent() {
                return true;
            }
            let now = Instant::now();
            if now >= deadline || self.shared.dead.load(Ordering::Acquire) {
                return false;
            }
            state = self
                .shared
                .changed
                .wait_timeout(state, deadline - now)
                .expect("document writer lock")
                .0;
        }
    }

    /// Blocks until the published generation exceeds `seen` or `timeout`
    /// passes; returns the current generation.
    pub fn await_change(&self, seen: u64, timeout: Duration) -> u64 {
        let deadline = Instant::now() + timeout;
        let mut state = self.shared.lock();
        loop {
            let generation = self.generation();
            let now = Instant::now();
            if generation > seen || now >= deadline || self.shared.dead.load(Ordering::Acquire) {
                return generation;
            }
            state = self
                .shared
                .changed
                .wait_timeout(state, deadline - now)
                .expect("document writer lock")
                .0;
        }
    }

    pub fn is_ready(&self) -> bool {
        self.shared.ready.load(Ordering::Acquire)
    }

    pub fn is_alive(&self) -> bool {
        self.check_alive().is_ok()
    }

    /// Everything the checker said outside the protocol, plus decoding
    /// problems.
    pub fn diagnostics(&self) -> Vec<String> {
        self.shared.diagnostics.lock().expect("diagnostics lock").clone()
    }

    /// Number of diagnostics that were protocol violations by the checker.
    pub fn protocol_errors(&self) -> u64 {
        self.shared.protocol_errors.load(Ordering::Acquire)
    }

    /// Closes the channel and waits for the checker, killing a checker
    /// process that outlives [`SHUTDOWN_GRACE`].
    pub fn shutdown(mut self) -> Result<(), SessionError> {
        self.close()
    }

    fn close(&mut self) -> Result<(), SessionError> {
        if self.closed {
            return Ok(());
        }
        self.closed = true;
        let _ = self.outbound.send(Outbound::Close);
        let mut result = Ok(());
        match self.checker.take() {
            Some(CheckerHandle::Thread(h)) => {
                let _ = h.join();
            }
            Some(CheckerHandle::Process { mut child, .. }) => {
                let deadline = Instant::now() + SHUTDOWN_GRACE;
                loop {
                    match child.try_wait() {
                        Ok(Some(_)) => break,
                        Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                        Ok(None) => {
                            warn!("checker did not stop in time; killing it");
                            let _ = child.kill();
                            let _ = child.wait();
                            break;
                        }
                        Err(e) => {
                            result = Err(e.into());
                            break;
                        }
                    }
                }
            }
            None => {}
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
        self.shared.dead.store(true, Ordering::Release);
        self.shared.changed.notify_all();
        result
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.close();
    }
}

fn spawn_checker(
    program: &PathBuf,
    workers: usize,
    shared: &Arc<Shared>,
) -> Result<(UnixStream, CheckerHandle), SessionError> {
    let dir = tempfile::Builder::new().prefix("pide-").tempdir()?;
    let path = dir.path().join("checker.sock");
    let listener = UnixListener::bind(&path)?;
    listener.set_nonblocking(true)?;
    let mut child = Command::new(program)
        .arg("--socket")
        .arg(&path)
        .arg("--workers")
        .arg(workers.to_string())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SessionError::Start(format!("{}: {e}", program.display())))?;
    for (name, pipe) in [
        ("stdout", child.stdout.take().map(|s| Box::new(s) as Box<dyn std::io::Read + Send>)),
        ("stderr", child.stderr.take().map(|s| Box::new(s) as Box<dyn std::io::Read + Send>)),
    ] {
        let Some(pipe) = pipe else { continue };
        let shared = Arc::clone(shared);
        thread::Builder::new()
            .name(format!("pide-checker-{name}"))
            .spawn(move || {
                for line in BufReader::new(pipe).lines().map_while(Result::ok) {
                    shared.diagnose(format!("checker {name}: {line}"));
                }
            })?;
    }
    let deadline = Instant::now() + Duration::from_secs(10);
    let stream = loop {
        match listener.accept() {
            Ok((stream, _)) => break stream,
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if let Ok(Some(status)) = child.try_wait() {
                    return Err(SessionError::Start(format!("checker exited early: {status}")));
                }
                if Instant::now() > deadline {
                    let _ = child.kill();
                    return Err(SessionError::Start("checker did not connect".into()));
                }
                thread::sleep(Duration::from_millis(2));
            }
            Err(e) => return Err(e.into()),
        }
    };
    stream.set_nonblocking(false)?;
    info!("checker process {} connected", child.id());
    Ok((
        stream,
        CheckerHandle::Process {
            child,
            _socket_dir: dir,
        },
    ))
}

fn write_loop(stream: UnixStream, rx: Receiver<Outbound>) {
    let mut w = BufWriter::new(&stream);
    for item in rx {
        match item {
            Outbound::Input(input) => {
                if let Err(e) = write_chunk(&mut w, &input.encode()) {
                    debug!("session: input channel closed: {e}");
                    break;
                }
            }
            Outbound::Close => break,
        }
    }
    drop(w);
    let _ = stream.shutdown(Shutdown::Write);
}

fn read_loop(mut r: impl BufRead, tx: Sender<Output>, shared: &Shared) {
    loop {
        match read_chunk(&mut r) {
            Ok(Some(payload)) => match Output::decode(&payload) {
                Ok(output) => {
                    if tx.send(output).is_err() {
                        return;
                    }
                }
                Err(e) => shared.protocol_error(format!("skipped checker output: {e}")),
            },
            Ok(None) => break,
            Err(e) => {
                shared.protocol_error(format!("checker channel failed: {e}"));
                break;
            }
        }
    }
}

/// Folds outputs into the document state, publishing once per batch.
fn apply_loop(rx: Receiver<Output>, outbound: Sender<Outbound>, shared: &Shared) {
    while let Ok(first) = rx.recv() {
        let mut state = shared.lock();
        let mut cancel: Vec<ExecId> = Vec::new();
        for output in std::iter::once(first).chain(rx.try_iter().take(MAX_BATCH)) {
            match output {
                Output::Ready => shared.ready.store(true, Ordering::Release),
                Output::AssignUpdate { version, assign } => match state.assign(version, &assign) {
                    Ok(outcome) => {
                        cancel.extend(outcome.superseded);
                        for d in outcome.diagnostics {
                            shared.protocol_error(d);
                        }
                    }
                    Err(e) => shared.protocol_error(format!("rejected assignment: {e}")),
                },
                Output::Message(msg) => {
                    for d in state.add_message(msg) {
                        shared.protocol_error(d);
                    }
                }
            }
        }
        if !cancel.is_empty() {
            let _ = outbound.send(Outbound::Input(Input::CancelExec(cancel)));
        }
        shared.publish(&state);
    }
    shared.dead.store(true, Ordering::Release);
    let _guard = shared.lock();
    shared.changed.notify_all();
}
