//! WebSocket front door for editor clients.
//!
//! Clients connect to `/session` and exchange binary frames. Each frame holds
//! one chunk (`len\npayload`) whose payload is the YXML encoding of a single
//! [`ClientEvent`] element, the same framing the checker protocol uses.
//!
//! Inbound events are applied to the shared [`Session`] straight away; the
//! session never waits for the checker, so neither does a client. Outbound
//! state is pushed whenever the session publishes a change, at most once
//! every [`DEBOUNCE`].

use std::collections::{BTreeMap, HashSet};
use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use thiserror::Error;
use tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tungstenite::{Message as Frame, WebSocket};

use crate::document::{ExecStatus, Snapshot, TextEdit};
use crate::ids::{CommandId, ExecId, VersionId};
use crate::markup::{body_text, Markup, MessageKind, PositionedMarkup, TextRange, Tree};
use crate::protocol::{decode_chunk, encode_chunk, ProtocolError};
use crate::session::{Session, SessionError};
use crate::yxml;

pub const ENDPOINT: &str = "/session";

/// Minimum spacing between two pushes to the same client.
pub const DEBOUNCE: Duration = Duration::from_millis(30);

/// How long a client thread blocks on its socket before looking at the
/// session again.
const POLL: Duration = Duration::from_millis(10);

/// Execution state of one command, as shown to clients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecSummary {
    pub command: CommandId,
    pub exec: Option<ExecId>,
    pub status: Option<ExecStatus>,
    /// Command span in current-text coordinates; `None` if pending edits
    /// removed it.
    pub range: Option<TextRange>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientEvent {
    // client to service
    OpenNode { node: String },
    Edit { node: String, edits: Vec<TextEdit> },
    Query { node: String, range: TextRange },
    Shutdown,
    // service to client
    NodeState {
        node: String,
        version: VersionId,
        is_outdated: bool,
        execs: Vec<ExecSummary>,
    },
    /// Markup in current-text coordinates of the tip.
    MarkupDelta {
        node: String,
        version: VersionId,
        entries: Vec<PositionedMarkup>,
    },
    MessageFeed {
        node: String,
        kind: MessageKind,
        text: String,
        range: Option<TextRange>,
    },
}

fn elem(name: &str, attrs: Vec<(&str, String)>, body: Vec<Tree>) -> Tree {
    let mut m = Markup::new(name);
    m.attrs = attrs.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    Tree::Elem(m, body)
}

fn text_body(s: &str) -> Vec<Tree> {
    if s.is_empty() {
        Vec::new()
    } else {
        vec![Tree::text(s)]
    }
}

fn range_attrs(attrs: &mut Vec<(&str, String)>, range: Option<TextRange>) {
    if let Some(r) = range {
        attrs.push(("offset", r.start.to_string()));
        attrs.push(("end_offset", r.stop.to_string()));
    }
}

fn bad(name: &str, reason: impl Into<String>) -> ProtocolError {
    ProtocolError::Malformed {
        name: name.to_string(),
        reason: reason.into(),
    }
}

fn attr<'a>(event: &str, m: &'a Markup, key: &str) -> Result<&'a str, ProtocolError> {
    m.attr(key).ok_or_else(|| bad(event, format!("missing attribute {key}")))
}

fn num<T: std::str::FromStr>(event: &str, m: &Markup, key: &str) -> Result<T, ProtocolError> {
    attr(event, m, key)?
        .parse()
        .map_err(|_| bad(event, format!("bad attribute {key}")))
}

fn opt_range(event: &str, m: &Markup) -> Result<Option<TextRange>, ProtocolError> {
    match (m.attr("offset"), m.attr("end_offset")) {
        (None, None) => Ok(None),
        _ => {
            let start = num(event, m, "offset")?;
            let stop = num(event, m, "end_offset")?;
            if start > stop {
                return Err(bad(event, "offset after end_offset"));
            }
            Ok(Some(TextRange::new(start, stop)))
        }
    }
}

fn flag(event: &str, m: &Markup, key: &str) -> Result<bool, ProtocolError> {
    match attr(event, m, key)? {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(event, format!("bad attribute {key}"))),
    }
}

impl ClientEvent {
    pub fn name(&self) -> &'static str {
        match self {
            ClientEvent::OpenNode { .. } => "open_node",
            ClientEvent::Edit { .. } => "edit",
            ClientEvent::Query { .. } => "query",
            ClientEvent::Shutdown => "shutdown",
            ClientEvent::NodeState { .. } => "node_state",
            ClientEvent::MarkupDelta { .. } => "markup_delta",
            ClientEvent::MessageFeed { .. } => "message_feed",
        }
    }

    pub fn is_inbound(&self) -> bool {
        matches!(
            self,
            ClientEvent::OpenNode { .. } | ClientEvent::Edit { .. } | ClientEvent::Query { .. } | ClientEvent::Shutdown
        )
    }

    pub fn to_tree(&self) -> Tree {
        let name = self.name();
        match self {
            ClientEvent::OpenNode { node } => elem(name, vec![("node", node.clone())], vec![]),
            ClientEvent::Edit { node, edits } => elem(
                name,
                vec![("node", node.clone())],
                edits
                    .iter()
                    .map(|e| match e {
                        TextEdit::Insert { offset, text } => {
                            elem("insert", vec![("offset", offset.to_string())], text_body(text))
                        }
                        TextEdit::Remove { offset, length } => elem(
                            "remove",
                            vec![("offset", offset.to_string()), ("length", length.to_string())],
                            vec![],
                        ),
                    })
                    .collect(),
            ),
            ClientEvent::Query { node, range } => {
                let mut attrs = vec![("node", node.clone())];
                range_attrs(&mut attrs, Some(*range));
                elem(name, attrs, vec![])
            }
            ClientEvent::Shutdown => elem(name, vec![], vec![]),
            ClientEvent::NodeState {
                node,
                version,
                is_outdated,
                execs,
            } => elem(
                name,
                vec![
                    ("node", node.clone()),
                    ("version", version.to_string()),
                    ("is_outdated", is_outdated.to_string()),
                ],
                execs
                    .iter()
                    .map(|s| {
                        let mut attrs = vec![("command", s.command.to_string())];
                        if let Some(e) = s.exec {
                            attrs.push(("exec", e.to_string()));
                        }
                        if let Some(st) = s.status {
                            attrs.push(("status", st.as_str().to_string()));
                        }
                        range_attrs(&mut attrs, s.range);
                        elem("exec", attrs, vec![])
                    })
                    .collect(),
            ),
            ClientEvent::MarkupDelta { node, version, entries } => elem(
                name,
                vec![("node", node.clone()), ("version", version.to_string())],
                entries.iter().map(crate::document::positioned_tree).collect(),
            ),
            ClientEvent::MessageFeed {
                node,
                kind,
                text,
                range,
            } => {
                let mut attrs = vec![("node", node.clone()), ("kind", kind.as_str().to_string())];
                range_attrs(&mut attrs, *range);
                elem(name, attrs, text_body(text))
            }
        }
    }

    pub fn from_tree(tree: &Tree) -> Result<ClientEvent, ProtocolError> {
        let Tree::Elem(m, body) = tree else {
            return Err(bad("payload", "expected an element"));
        };
        let name = m.name.as_str();
        let node = || attr(name, m, "node").map(str::to_string);
        let children = || -> Result<Vec<(&Markup, &[Tree])>, ProtocolError> {
            body.iter()
                .map(|t| match t {
                    Tree::Elem(c, b) => Ok((c, b.as_slice())),
                    Tree::Text(_) => Err(bad(name, "unexpected text")),
                })
                .collect()
        };
        Ok(match name {
            "open_node" => ClientEvent::OpenNode { node: node()? },
            "edit" => ClientEvent::Edit {
                node: node()?,
                edits: children()?
                    .into_iter()
                    .map(|(c, b)| match c.name.as_str() {
                        "insert" => Ok(TextEdit::insert(num(name, c, "offset")?, body_text(b))),
                        "remove" => Ok(TextEdit::remove(num(name, c, "offset")?, num(name, c, "length")?)),
                        other => Err(bad(name, format!("unknown edit {other}"))),
                    })
                    .collect::<Result<_, _>>()?,
            },
            "query" => ClientEvent::Query {
                node: node()?,
                range: opt_range(name, m)?.ok_or_else(|| bad(name, "missing range"))?,
            },
            "shutdown" => ClientEvent::Shutdown,
            "node_state" => ClientEvent::NodeState {
                node: node()?,
                version: num(name, m, "version")?,
                is_outdated: flag(name, m, "is_outdated")?,
                execs: children()?
                    .into_iter()
                    .map(|(c, _)| {
                        Ok(ExecSummary {
                            command: num(name, c, "command")?,
                            exec: c.attr("exec").map(|_| num(name, c, "exec")).transpose()?,
                            status: c
                                .attr("status")
                                .map(|s| ExecStatus::parse(s).ok_or_else(|| bad(name, "bad status")))
                                .transpose()?,
                            range: opt_range(name, c)?,
                        })
                    })
                    .collect::<Result<_, ProtocolError>>()?,
            },
            "markup_delta" => ClientEvent::MarkupDelta {
                node: node()?,
                version: num(name, m, "version")?,
                entries: body
                    .iter()
                    .map(|t| crate::document::positioned(t).ok_or_else(|| bad(name, "entry without position")))
                    .collect::<Result<_, _>>()?,
            },
            "message_feed" => ClientEvent::MessageFeed {
                node: node()?,
                kind: MessageKind::parse(attr(name, m, "kind")?).ok_or_else(|| bad(name, "bad kind"))?,
                text: body_text(body),
                range: opt_range(name, m)?,
            },
            other => return Err(ProtocolError::Unknown(other.to_string())),
        })
    }

    /// One chunk holding the YXML of this event.
    pub fn encode(&self) -> Vec<u8> {
        let payload = yxml::encode_tree(&self.to_tree()).expect("client events are well-formed");
        encode_chunk(&payload)
    }

    /// Decodes every chunk in `frame`.
    pub fn decode_frame(mut frame: &[u8]) -> Result<Vec<ClientEvent>, ProtocolError> {
        let mut events = Vec::new();
        while !frame.is_empty() {
            let (payload, used) = decode_chunk(frame)?;
            frame = &frame[used..];
            let trees = yxml::parse(&payload)?;
            let [tree] = trees.as_slice() else {
                return Err(bad("payload", "expected exactly one element"));
            };
            events.push(ClientEvent::from_tree(tree)?);
        }
        Ok(events)
    }
}

/// The full pushed state of one node, all computed from a single snapshot.
pub fn node_events(node: &str, tip: VersionId, snap: &Snapshot) -> (ClientEvent, ClientEvent) {
    let execs = snap
        .commands()
        .iter()
        .map(|v| ExecSummary {
            command: v.command.id,
            exec: v.exec.map(|e| e.exec_id),
            status: v.exec.map(|e| e.status),
            range: v.range,
        })
        .collect();
    let state = ClientEvent::NodeState {
        node: node.to_string(),
        version: tip,
        is_outdated: snap.is_outdated(),
        execs,
    };
    let everything = TextRange::new(0, snap.text().chars().count());
    let delta = ClientEvent::MarkupDelta {
        node: node.to_string(),
        version: tip,
        entries: snap
            .markup_query(everything)
            .into_iter()
            .map(|h| PositionedMarkup::new(h.range, h.markup))
            .collect(),
    };
    (state, delta)
}

/// Displayed messages of `snap` not yet in `seen`, which is updated.
pub fn new_messages(node: &str, snap: &Snapshot, seen: &mut HashSet<(ExecId, u64)>) -> Vec<ClientEvent> {
    let mut out = Vec::new();
    for view in snap.commands() {
        let Some(exec) = view.exec else { continue };
        for msg in exec.output() {
            if !seen.insert((exec.exec_id, msg.serial)) {
                continue;
            }
            out.push(ClientEvent::MessageFeed {
                node: node.to_string(),
                kind: msg.kind,
                text: msg.text(),
                range: msg.range.and_then(|r| snap.current_range(&view, r)),
            });
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// A bound but not yet running service.
pub struct Service {
    listener: TcpListener,
    session: Arc<Session>,
    stop: Arc<AtomicBool>,
}

impl Service {
    pub fn bind(session: Session, addr: impl ToSocketAddrs) -> io::Result<Service> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        Ok(Service {
            listener,
            session: Arc::new(session),
            stop: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Handle that stops the service as if a client had sent `shutdown`.
    pub fn stopper(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.stop)
    }

    /// Accepts clients until one of them sends `shutdown`, then shuts the
    /// session (and its checker) down.
    pub fn run(self) -> Result<(), ServiceError> {
        let mut clients: Vec<JoinHandle<()>> = Vec::new();
        while !self.stop.load(Ordering::Acquire) {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    let session = Arc::clone(&self.session);
                    let stop = Arc::clone(&self.stop);
                    clients.push(
                        thread::Builder::new()
                            .name(format!("pide-client-{peer}"))
                            .spawn(move || {
                                match serve_client(stream, &session, &stop) {
                                    Ok(()) => debug!("client {peer} left"),
                                    Err(e) => info!("client {peer} disconnected: {e}"),
                                }
                            })?,
                    );
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
                Err(e) => return Err(e.into()),
            }
            clients.retain(|h| !h.is_finished());
        }
        for h in clients {
            let _ = h.join();
        }
        drop(self.listener);
        match Arc::try_unwrap(self.session) {
            Ok(session) => session.shutdown()?,
            Err(_) => warn!("session still shared at shutdown"),
        }
        Ok(())
    }

    /// Runs the service on its own thread.
    pub fn spawn(self) -> io::Result<JoinHandle<Result<(), ServiceError>>> {
        thread::Builder::new()
            .name("pide-service".into())
            .spawn(move || self.run())
    }
}

#[derive(Debug, Error)]
enum ClientError {
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error(transparent)]
    Socket(#[from] tungstenite::Error),
    #[error("protocol violation: {0}")]
    Violation(String),
}

fn only_session_path(req: &Request, resp: Response) -> Result<Response, ErrorResponse> {
    if req.uri().path() == ENDPOINT {
        Ok(resp)
    } else {
        let mut err = ErrorResponse::new(Some(format!("no endpoint at {}", req.uri().path())));
        *err.status_mut() = tungstenite::http::StatusCode::NOT_FOUND;
        Err(err)
    }
}

struct Client<'a> {
    ws: WebSocket<TcpStream>,
    session: &'a Session,
    open: BTreeMap<String, HashSet<(ExecId, u64)>>,
    pushed_generation: Option<u64>,
    last_push: Instant,
}

impl Client<'_> {
    fn send(&mut self, event: &ClientEvent) -> Result<(), ClientError> {
        self.ws.send(Frame::Binary(event.encode().into()))?;
        Ok(())
    }

    fn push_node(&mut self, node: &str, state: &crate::document::DocumentState) -> Result<(), ClientError> {
        let snap = state.snapshot(node);
        let (node_state, delta) = node_events(node, state.tip(), &snap);
        let seen = self.open.entry(node.to_string()).or_default();
        let feed = new_messages(node, &snap, seen);
        self.send(&node_state)?;
        self.send(&delta)?;
        for event in &feed {
            self.send(event)?;
        }
        Ok(())
    }

    fn push_all(&mut self) -> Result<(), ClientError> {
        let generation = self.session.generation();
        let state = self.session.state();
        let nodes: Vec<String> = self.open.keys().cloned().collect();
        for node in nodes {
            self.push_node(&node, &state)?;
        }
        self.pushed_generation = Some(generation);
        self.last_push = Instant::now();
        Ok(())
    }

    fn handle(&mut self, event: ClientEvent, stop: &AtomicBool) -> Result<(), ClientError> {
        match event {
            ClientEvent::OpenNode { node } => {
                self.open.entry(node.clone()).or_default();
                let state = self.session.state();
                self.push_node(&node, &state)?;
            }
            ClientEvent::Edit { node, edits } => {
                self.session
                    .edit_node(&node, edits)
                    .map_err(|e| ClientError::Violation(e.to_string()))?;
            }
            ClientEvent::Query { node, range } => {
                let state = self.session.state();
                let snap = state.snapshot(&node);
                let (node_state, _) = node_events(&node, state.tip(), &snap);
                let delta = ClientEvent::MarkupDelta {
                    node,
                    version: state.tip(),
                    entries: snap
                        .markup_query(range)
                        .into_iter()
                        .map(|h| PositionedMarkup::new(h.range, h.markup))
                        .collect(),
                };
                self.send(&node_state)?;
                self.send(&delta)?;
            }
            ClientEvent::Shutdown => stop.store(true, Ordering::Release),
            other => return Err(ClientError::Violation(format!("{} is not a client event", other.name()))),
        }
        Ok(())
    }
}

fn serve_client(stream: TcpStream, session: &Session, stop: &AtomicBool) -> Result<(), ClientError> {
    stream.set_nonblocking(false).map_err(tungstenite::Error::Io)?;
    stream.set_read_timeout(Some(POLL)).map_err(tungstenite::Error::Io)?;
    let ws = tungstenite::accept_hdr(stream, only_session_path).map_err(|e| ClientError::Handshake(e.to_string()))?;
    let mut client = Client {
        ws,
        session,
        open: BTreeMap::new(),
        pushed_generation: None,
        last_push: Instant::now() - DEBOUNCE,
    };
    let result = client_loop(&mut client, stop);
    if let Err(ClientError::Violation(reason)) = &result {
        let _ = client.ws.close(Some(tungstenite::protocol::CloseFrame {
            code: tungstenite::protocol::frame::coding::CloseCode::Policy,
            reason: reason.clone().into(),
        }));
        let _ = client.ws.flush();
    }
    if stop.load(Ordering::Acquire) {
        let _ = client.ws.close(None);
        let _ = client.ws.flush();
    }
    result
}

fn client_loop(client: &mut Client<'_>, stop: &AtomicBool) -> Result<(), ClientError> {
    while !stop.load(Ordering::Acquire) {
        match client.ws.read() {
            Ok(Frame::Binary(bytes)) => {
                let events = ClientEvent::decode_frame(&bytes).map_err(|e| ClientError::Violation(e.to_string()))?;
                for event in events {
                    client.handle(event, stop)?;
                }
            }
            Ok(Frame::Text(_)) => return Err(ClientError::Violation("text frames are not accepted".into())),
            Ok(Frame::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e.into()),
        }
        let changed = client.pushed_generation != Some(client.session.generation());
        if changed && !client.open.is_empty() && client.last_push.elapsed() >= DEBOUNCE {
            client.push_all()?;
        }
    }
    Ok(())
}
