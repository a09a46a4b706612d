//! External renderings of document state.
//!
//! Internally every offset is 0-based and half-open. Dumps follow the
//! convention of prover printouts instead: `offset` is the 1-based position
//! of the first character and `end_offset` the 1-based position of the last
//! one, so a one-character token at index 6 reads `offset="7" end_offset="7"`.

use std::str::FromStr;

use pide_core::document::{CommandView, DocumentState, MarkupHit, Snapshot};
use pide_core::markup::{to_xml, Markup, Message, TextRange, Tree};
use pide_core::pretty::{format_body, DEFAULT_MARGIN};
use pide_core::yxml;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DumpFormat {
    #[default]
    Xml,
    Yxml,
}

impl FromStr for DumpFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "xml" => Ok(DumpFormat::Xml),
            "yxml" => Ok(DumpFormat::Yxml),
            other => Err(format!("unknown dump format `{other}` (expected xml or yxml)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DumpOptions {
    pub format: DumpFormat,
    /// Leave out serials and ids, which depend on scheduling and history.
    pub stable: bool,
    /// Resolve block and break markup against this margin instead of
    /// keeping it symbolic.
    pub layout: Option<usize>,
}

impl Default for DumpOptions {
    fn default() -> Self {
        DumpOptions {
            format: DumpFormat::Xml,
            stable: false,
            layout: None,
        }
    }
}

impl DumpOptions {
    pub fn margin(&self) -> usize {
        self.layout.unwrap_or(DEFAULT_MARGIN)
    }
}

fn external(range: TextRange) -> [(String, String); 2] {
    [
        ("offset".into(), (range.start + 1).to_string()),
        ("end_offset".into(), range.stop.to_string()),
    ]
}

/// Rewrites `position` elements nested in a message body into external
/// node coordinates.
fn relocate(body: &[Tree], snap: &Snapshot, view: &CommandView<'_>, stable: bool) -> Vec<Tree> {
    body.iter()
        .map(|t| match t {
            Tree::Text(_) => t.clone(),
            Tree::Elem(m, b) if m.name == "position" => {
                let local = m
                    .attr("offset")
                    .zip(m.attr("end_offset"))
                    .and_then(|(s, e)| Some(TextRange::new(s.parse().ok()?, e.parse().ok()?)));
                let mut out = Markup::new("position");
                for (k, v) in &m.attrs {
                    match k.as_str() {
                        "offset" | "end_offset" => {}
                        "id" if stable => {}
                        _ => out.attrs.push((k.clone(), v.clone())),
                    }
                }
                if let Some(r) = local.and_then(|r| snap.current_range(view, r)) {
                    let mut attrs = external(r).to_vec();
                    attrs.extend(out.attrs);
                    out.attrs = attrs;
                }
                Tree::Elem(out, relocate(b, snap, view, stable))
            }
            Tree::Elem(m, b) => Tree::Elem(m.clone(), relocate(b, snap, view, stable)),
        })
        .collect()
}

/// One displayed message as an element named after its kind, e.g.
/// `<warning serial=".." offset=".." end_offset=".." id="..">`.
pub fn message_tree(msg: &Message, snap: &Snapshot, view: &CommandView<'_>, opts: &DumpOptions) -> Tree {
    let mut m = Markup::new(msg.kind.as_str());
    if !opts.stable {
        m.attrs.push(("serial".into(), msg.serial.to_string()));
    }
    if let Some(r) = msg.range.and_then(|r| snap.current_range(view, r)) {
        m.attrs.extend(external(r));
    }
    if !opts.stable {
        m.attrs.push(("id".into(), msg.exec_id.to_string()));
    }
    let mut body = relocate(&msg.body, snap, view, opts.stable);
    if let Some(margin) = opts.layout {
        body = format_body(&body, margin);
    }
    Tree::Elem(m, body)
}

/// `command` element with the messages of its exec.
pub fn command_tree(snap: &Snapshot, view: &CommandView<'_>, opts: &DumpOptions) -> Option<Tree> {
    let range = view.range?;
    let mut m = Markup::new("command");
    if !opts.stable {
        m.attrs.push(("id".into(), view.command.id.to_string()));
    }
    m.attrs.push(("name".into(), view.command.name().to_string()));
    m.attrs.extend(external(range));
    let mut body = Vec::new();
    match view.exec {
        Some(exec) => {
            m.attrs.push(("status".into(), exec.status.as_str().to_string()));
            body.extend(exec.output().map(|msg| message_tree(msg, snap, view, opts)));
        }
        None => m.attrs.push(("status".into(), "unassigned".into())),
    }
    Some(Tree::Elem(m, body))
}

/// Every node of the tip, in name order. An empty document has no nodes.
pub fn document_trees(state: &DocumentState, opts: &DumpOptions) -> Vec<Tree> {
    state
        .tip_version()
        .nodes
        .keys()
        .map(|name| {
            let snap = state.snapshot(name);
            let mut m = Markup::new("node").with_attr("name", name);
            if snap.is_outdated() {
                m.attrs.push(("outdated".into(), "true".into()));
            }
            let body = snap
                .commands()
                .iter()
                .filter_map(|v| command_tree(&snap, v, opts))
                .collect();
            Tree::Elem(m, body)
        })
        .collect()
}

/// Renders trees in the chosen syntax: XML with one top-level element per
/// line, or YXML with the control bytes made visible.
pub fn render(trees: &[Tree], format: DumpFormat) -> String {
    match format {
        DumpFormat::Xml => trees.iter().map(|t| to_xml(std::slice::from_ref(t)) + "\n").collect(),
        DumpFormat::Yxml => {
            let bytes = yxml::encode(trees).expect("dumped trees are well-formed");
            let mut s = yxml::to_visible(&bytes);
            if !s.is_empty() {
                s.push('\n');
            }
            s
        }
    }
}

pub fn dump(state: &DocumentState, opts: &DumpOptions) -> String {
    render(&document_trees(state, opts), opts.format)
}

/// A markup query hit as an empty element carrying its external range.
pub fn hit_tree(hit: &MarkupHit) -> Tree {
    let mut m = Markup::new(hit.markup.name.clone());
    m.attrs.extend(external(hit.range));
    m.attrs.extend(hit.markup.attrs.iter().cloned());
    Tree::Elem(m, Vec::new())
}
