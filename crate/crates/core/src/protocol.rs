//! Private byte protocol between the session and the checker.
//!
//! Every message travels as one chunk: the payload length in ASCII decimal,
//! a newline, then the payload. A payload is the YXML encoding of a single
//! element whose name is the message name.

use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

use crate::ids::{CommandId, ExecId, VersionId};
use crate::markup::{Markup, Message, MessageKind, TextRange, Tree};
use crate::yxml::{self, YxmlError};

/// Longest accepted length header, in digits.
const MAX_HEADER: usize = 20;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("bad chunk header {0:?}")]
    BadHeader(String),
    #[error("end of input inside a chunk ({got} of {want} bytes)")]
    Truncated { got: usize, want: usize },
    #[error(transparent)]
    Yxml(#[from] YxmlError),
    #[error("malformed {name} message: {reason}")]
    Malformed { name: String, reason: String },
    #[error("unknown message {0:?}")]
    Unknown(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn malformed(name: &str, reason: impl Into<String>) -> ProtocolError {
    ProtocolError::Malformed {
        name: name.to_string(),
        reason: reason.into(),
    }
}

pub fn encode_chunk(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 8);
    out.extend_from_slice(payload.len().to_string().as_bytes());
    out.push(b'\n');
    out.extend_from_slice(payload);
    out
}

/// Decodes the first frame of `bytes`, returning its payload and the number
/// of bytes consumed.
pub fn decode_chunk(bytes: &[u8]) -> Result<(Vec<u8>, usize), ProtocolError> {
    let mut reader = bytes;
    match read_chunk(&mut reader)? {
        Some(payload) => Ok((payload, bytes.len() - reader.len())),
        None => Err(ProtocolError::Truncated { got: 0, want: 1 }),
    }
}

pub fn write_chunk(w: &mut impl Write, payload: &[u8]) -> io::Result<()> {
    w.write_all(payload.len().to_string().as_bytes())?;
    w.write_all(b"\n")?;
    w.write_all(payload)?;
    w.flush()
}

/// Reads one frame. `Ok(None)` means the stream ended cleanly between frames.
pub fn read_chunk(r: &mut impl BufRead) -> Result<Option<Vec<u8>>, ProtocolError> {
    let mut header = Vec::new();
    r.by_ref()
        .take(MAX_HEADER as u64 + 1)
        .read_until(b'\n', &mut header)?;
    if header.is_empty() {
        return Ok(None);
    }
    if header.last() != Some(&b'\n') {
        return Err(ProtocolError::BadHeader(
            String::from_utf8_lossy(&header).into_owned(),
        ));
    }
    header.pop();
    let digits = std::str::from_utf8(&header).ok().filter(|s| {
        !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
    });
    let want: usize = digits
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ProtocolError::BadHeader(String::from_utf8_lossy(&header).into_owned()))?;
    let mut payload = Vec::with_capacity(want.min(1 << 20));
    r.by_ref().take(want as u64).read_to_end(&mut payload)?;
    if payload.len() < want {
        return Err(ProtocolError::Truncated {
            got: payload.len(),
            want,
        });
    }
    Ok(Some(payload))
}

/// A command as the checker needs to know it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandDef {
    pub id: CommandId,
    /// Keyword, or `malformed`.
    pub name: String,
    pub source: String,
}

/// New command structure of one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeUpdate {
    pub name: String,
    pub commands: Vec<CommandId>,
}

/// Session to checker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Input {
    DefineCommands(Vec<CommandDef>),
    /// Nodes missing from the list keep their structure from `old_version`.
    Update {
        old_version: VersionId,
        new_version: VersionId,
        nodes: Vec<NodeUpdate>,
    },
    RemoveVersions(Vec<VersionId>),
    CancelExec(Vec<ExecId>),
}

/// Checker to session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Output {
    Ready,
    AssignUpdate {
        version: VersionId,
        assign: Vec<(CommandId, ExecId)>,
    },
    Message(Message),
}

fn elem(name: &str, attrs: Vec<(&str, String)>, body: Vec<Tree>) -> Tree {
    let mut m = Markup::new(name);
    m.attrs = attrs.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    Tree::Elem(m, body)
}

fn id_list(tag: &str, ids: impl IntoIterator<Item = u64>) -> Vec<Tree> {
    ids.into_iter()
        .map(|id| elem(tag, vec![("id", id.to_string())], Vec::new()))
        .collect()
}

fn num_attr<T: std::str::FromStr>(msg: &str, m: &Markup, key: &str) -> Result<T, ProtocolError> {
    m.attr(key)
        .ok_or_else(|| malformed(msg, format!("missing attribute {key}")))?
        .parse()
        .map_err(|_| malformed(msg, format!("bad attribute {key}")))
}

/// Child elements of `body` named `tag`; anything else is malformed.
fn children<'a>(msg: &str, body: &'a [Tree], tag: &str) -> Result<Vec<(&'a Markup, &'a [Tree])>, ProtocolError> {
    body.iter()
        .map(|t| match t {
            Tree::Elem(m, b) if m.name == tag => Ok((m, b.as_slice())),
            _ => Err(malformed(msg, format!("expected {tag} element"))),
        })
        .collect()
}

fn root(payload: &[u8]) -> Result<(Markup, Vec<Tree>), ProtocolError> {
    let mut trees = yxml::parse(payload)?;
    match (trees.pop(), trees.is_empty()) {
        (Some(Tree::Elem(m, body)), true) => Ok((m, body)),
        _ => Err(malformed("payload", "expected exactly one element")),
    }
}

impl Input {
    pub fn name(&self) -> &'static str {
        match self {
            Input::DefineCommands(_) => "define_commands",
            Input::Update { .. } => "update",
            Input::RemoveVersions(_) => "remove_versions",
            Input::CancelExec(_) => "cancel_exec",
        }
    }

    pub fn to_tree(&self) -> Tree {
        match self {
            Input::DefineCommands(defs) => elem(
                self.name(),
                vec![],
                defs.iter()
                    .map(|d| {
                        let body = if d.source.is_empty() {
                            Vec::new()
                        } else {
                            vec![Tree::text(d.source.clone())]
                        };
                        elem(
                            "command",
                            vec![("id", d.id.to_string()), ("name", d.name.clone())],
                            body,
                        )
                    })
                    .collect(),
            ),
            Input::Update {
                old_version,
                new_version,
                nodes,
            } => elem(
                self.name(),
                vec![
                    ("old_version", old_version.to_string()),
                    ("new_version", new_version.to_string()),
                ],
                nodes
                    .iter()
                    .map(|n| {
                        elem(
                            "node",
                            vec![("name", n.name.clone())],
                            id_list("command", n.commands.iter().map(|c| c.0)),
                        )
                    })
                    .collect(),
            ),
            Input::RemoveVersions(vs) => elem(self.name(), vec![], id_list("version", vs.iter().map(|v| v.0))),
            Input::CancelExec(es) => elem(self.name(), vec![], id_list("exec", es.iter().map(|e| e.0))),
        }
    }

    pub fn from_tree(m: &Markup, body: &[Tree]) -> Result<Input, ProtocolError> {
        let name = m.name.as_str();
        let ids = |tag: &str| -> Result<Vec<u64>, ProtocolError> {
            children(name, body, tag)?
                .into_iter()
                .map(|(c, _)| num_attr(name, c, "id"))
                .collect()
        };
        Ok(match name {
            "define_commands" => Input::DefineCommands(
                children(name, body, "command")?
                    .into_iter()
                    .map(|(c, b)| {
                        Ok(CommandDef {
                            id: num_attr(name, c, "id")?,
                            name: c
                                .attr("name")
                                .ok_or_else(|| malformed(name, "command without name"))?
                                .to_string(),
                            source: crate::markup::body_text(b),
                        })
                    })
                    .collect::<Result<_, ProtocolError>>()?,
            ),
            "update" => Input::Update {
                old_version: num_attr(name, m, "old_version")?,
                new_version: num_attr(name, m, "new_version")?,
                nodes: children(name, body, "node")?
                    .into_iter()
                    .map(|(n, b)| {
                        Ok(NodeUpdate {
                            name: n
                                .attr("name")
                                .ok_or_else(|| malformed(name, "node without name"))?
                                .to_string(),
                            commands: children(name, b, "command")?
                                .into_iter()
                                .map(|(c, _)| num_attr(name, c, "id"))
                                .collect::<Result<_, _>>()?,
                        })
                    })
                    .collect::<Result<_, ProtocolError>>()?,
            },
            "remove_versions" => Input::RemoveVersions(ids("version")?.into_iter().map(VersionId).collect()),
            "cancel_exec" => Input::CancelExec(ids("exec")?.into_iter().map(ExecId).collect()),
            other => return Err(ProtocolError::Unknown(other.to_string())),
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        yxml::encode_tree(&self.to_tree()).expect("protocol trees are well-formed")
    }

    pub fn decode(payload: &[u8]) -> Result<Input, ProtocolError> {
        let (m, body) = root(payload)?;
        Input::from_tree(&m, &body)
    }
}

impl Output {
    pub fn name(&self) -> &'static str {
        match self {
            Output::Ready => "ready",
            Output::AssignUpdate { .. } => "assign_update",
            Output::Message(_) => "message",
        }
    }

    pub fn to_tree(&self) -> Tree {
        match self {
            Output::Ready => elem(self.name(), vec![], vec![]),
            Output::AssignUpdate { version, assign } => elem(
                self.name(),
                vec![("version", version.to_string())],
                assign
                    .iter()
                    .map(|(c, e)| {
                        elem(
                            "assign",
                            vec![("command", c.to_string()), ("exec", e.to_string())],
                            vec![],
                        )
                    })
                    .collect(),
            ),
            Output::Message(msg) => {
                let mut attrs = vec![
                    ("kind", msg.kind.as_str().to_string()),
                    ("exec", msg.exec_id.to_string()),
                    ("serial", msg.serial.to_string()),
                ];
                if let Some(r) = msg.range {
                    attrs.push(("offset", r.start.to_string()));
                    attrs.push(("end_offset", r.stop.to_string()));
                }
                elem(self.name(), attrs, msg.body.clone())
            }
        }
    }

    pub fn from_tree(m: &Markup, body: &[Tree]) -> Result<Output, ProtocolError> {
        let name = m.name.as_str();
        Ok(match name {
            "ready" => Output::Ready,
            "assign_update" => Output::AssignUpdate {
                version: num_attr(name, m, "version")?,
                assign: children(name, body, "assign")?
                    .into_iter()
                    .map(|(a, _)| Ok((num_attr(name, a, "command")?, num_attr(name, a, "exec")?)))
                    .collect::<Result<_, ProtocolError>>()?,
            },
            "message" => {
                let kind = m
                    .attr("kind")
                    .and_then(MessageKind::parse)
                    .ok_or_else(|| malformed(name, "bad kind"))?;
                let range = match (m.attr("offset"), m.attr("end_offset")) {
                    (None, None) => None,
                    _ => {
                        let (start, stop) = (num_attr(name, m, "offset")?, num_attr(name, m, "end_offset")?);
                        if start > stop {
                            return Err(malformed(name, "inverted range"));
                        }
                        Some(TextRange::new(start, stop))
                    }
                };
                Output::Message(Message {
                    serial: num_attr(name, m, "serial")?,
                    kind,
                    exec_id: num_attr(name, m, "exec")?,
                    range,
                    body: body.to_vec(),
                })
            }
            other => return Err(ProtocolError::Unknown(other.to_string())),
        })
    }

    /// Fails only if a message body holds control characters.
    pub fn encode(&self) -> Result<Vec<u8>, YxmlError> {
        yxml::encode_tree(&self.to_tree())
    }

    pub fn decode(payload: &[u8]) -> Result<Output, ProtocolError> {
        let (m, body) = root(payload)?;
        Output::from_tree(&m, &body)
    }
}
