//! Markup trees, message values and positioned-markup stores.
//!
//! A [`Tree`] is the annotation currency shared by every other module: the
//! checker speaks it, the YXML codec transports it, the pretty printer emits
//! it and the document model accumulates it per execution.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

mod xml;

pub use xml::{parse_xml, to_xml, XmlError};

/// YXML structure marker opening and closing element chunks.
pub const X: u8 = 0x05;
/// YXML structure marker separating name and attributes.
pub const Y: u8 = 0x06;

pub(crate) fn has_control(s: &str) -> bool {
    s.bytes().any(|b| b == X || b == Y)
}

/// Name plus ordered attributes of an element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Markup {
    pub name: String,
    pub attrs: Vec<(String, String)>,
}

impl Markup {
    pub fn new(name: impl Into<String>) -> Self {
        Markup {
            name: name.into(),
            attrs: Vec::new(),
        }
    }

    pub fn with_attr(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.attrs.push((key.into(), value.to_string()));
        self
    }

    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn validate(&self) -> Result<(), MarkupError> {
        if self.name.is_empty() {
            return Err(MarkupError::EmptyName);
        }
        if has_control(&self.name) {
            return Err(MarkupError::ControlChar(self.name.clone()));
        }
        for (k, v) in &self.attrs {
            if k.is_empty() {
                return Err(MarkupError::EmptyKey(self.name.clone()));
            }
            if k.contains('=') {
                return Err(MarkupError::KeyWithEquals(k.clone()));
            }
            if has_control(k) {
                return Err(MarkupError::ControlChar(k.clone()));
            }
            if has_control(v) {
                return Err(MarkupError::ControlChar(v.clone()));
            }
        }
        Ok(())
    }
}

/// XML-like tree of named elements over text leaves.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tree {
    Elem(Markup, Vec<Tree>),
    Text(String),
}

impl Tree {
    pub fn text(s: impl Into<String>) -> Tree {
        Tree::Text(s.into())
    }

    pub fn elem(markup: Markup, body: Vec<Tree>) -> Tree {
        Tree::Elem(markup, body)
    }

    pub fn markup(&self) -> Option<&Markup> {
        match self {
            Tree::Elem(m, _) => Some(m),
            Tree::Text(_) => None,
        }
    }

    pub fn body(&self) -> &[Tree] {
        match self {
            Tree::Elem(_, body) => body,
            Tree::Text(_) => &[],
        }
    }

    pub fn validate(&self) -> Result<(), MarkupError> {
        match self {
            Tree::Text(s) if has_control(s) => Err(MarkupError::ControlChar(s.clone())),
            Tree::Text(_) => Ok(()),
            Tree::Elem(m, body) => {
                m.validate()?;
                body.iter().try_for_each(Tree::validate)
            }
        }
    }

    /// Pre-order walk over every element of the tree, including `self`.
    pub fn elements(&self) -> Vec<&Tree> {
        let mut out = Vec::new();
        fn go<'a>(t: &'a Tree, out: &mut Vec<&'a Tree>) {
            if let Tree::Elem(_, body) = t {
                out.push(t);
                body.iter().for_each(|c| go(c, out));
            }
        }
        go(self, &mut out);
        out
    }
}

/// Concatenation of all text leaves in document order.
pub fn text_content(tree: &Tree) -> String {
    let mut out = String::new();
    push_text(tree, &mut out);
    out
}

pub fn body_text(body: &[Tree]) -> String {
    let mut out = String::new();
    body.iter().for_each(|t| push_text(t, &mut out));
    out
}

fn push_text(tree: &Tree, out: &mut String) {
    match tree {
        Tree::Text(s) => out.push_str(s),
        Tree::Elem(_, body) => body.iter().for_each(|t| push_text(t, out)),
    }
}

/// Drops empty text leaves and merges adjacent text siblings.
pub fn normalize(body: Vec<Tree>) -> Vec<Tree> {
    let mut out: Vec<Tree> = Vec::with_capacity(body.len());
    for t in body {
        match t {
            Tree::Text(s) if s.is_empty() => {}
            Tree::Text(s) => match out.last_mut() {
                Some(Tree::Text(prev)) => prev.push_str(&s),
                _ => out.push(Tree::Text(s)),
            },
            Tree::Elem(m, b) => out.push(Tree::Elem(m, normalize(b))),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarkupError {
    #[error("empty element name")]
    EmptyName,
    #[error("empty attribute key in element {0:?}")]
    EmptyKey(String),
    #[error("attribute key {0:?} contains '='")]
    KeyWithEquals(String),
    #[error("control character in {0:?}")]
    ControlChar(String),
    #[error("range {start}..{stop} out of bounds for span of length {len}")]
    OutOfBounds {
        start: usize,
        stop: usize,
        len: usize,
    },
}

/// Half-open character interval `[start, stop)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TextRange {
    pub start: usize,
    pub stop: usize,
}

impl TextRange {
    pub fn new(start: usize, stop: usize) -> Self {
        debug_assert!(start <= stop, "inverted range {start}..{stop}");
        TextRange { start, stop }
    }

    pub fn len(&self) -> usize {
        self.stop - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.stop
    }

    /// Non-empty overlap; empty ranges never intersect anything.
    pub fn intersects(&self, other: &TextRange) -> bool {
        self.start < other.stop && other.start < self.stop
    }

    pub fn shift(&self, by: usize) -> TextRange {
        TextRange::new(self.start + by, self.stop + by)
    }

    pub fn contains_range(&self, other: &TextRange) -> bool {
        self.start <= other.start && other.stop <= self.stop
    }
}

impl fmt::Display for TextRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.stop)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    Writeln,
    Warning,
    Error,
    Status,
    Report,
}

impl MessageKind {
    pub const ALL: [MessageKind; 5] = [
        MessageKind::Writeln,
        MessageKind::Warning,
        MessageKind::Error,
        MessageKind::Status,
        MessageKind::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Writeln => "writeln",
            MessageKind::Warning => "warning",
            MessageKind::Error => "error",
            MessageKind::Status => "status",
            MessageKind::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<MessageKind> {
        MessageKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Status and report messages only augment document content.
    pub fn is_displayed(self) -> bool {
        !matches!(self, MessageKind::Status | MessageKind::Report)
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Serial-numbered output unit belonging to one execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub serial: u64,
    pub kind: MessageKind,
    pub exec_id: u64,
    /// Position within the command span the message refers to.
    pub range: Option<TextRange>,
    pub body: Vec<Tree>,
}

impl Message {
    pub fn text(&self) -> String {
        body_text(&self.body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PositionedMarkup {
    pub range: TextRange,
    pub markup: Markup,
}

impl PositionedMarkup {
    pub fn new(range: TextRange, markup: Markup) -> Self {
        PositionedMarkup { range, markup }
    }
}

/// Persistent, monotonically growing store of markup over one command span.
///
/// Cloning is cheap; `add` only copies the entry vector when it is shared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkupStore {
    span_len: usize,
    entries: Arc<Vec<PositionedMarkup>>,
}

impl MarkupStore {
    pub fn new(span_len: usize) -> Self {
        MarkupStore {
            span_len,
            entries: Arc::new(Vec::new()),
        }
    }

    pub fn span_len(&self) -> usize {
        self.span_len
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PositionedMarkup] {
        &self.entries
    }

    /// Returns the extended store; `self` is left untouched.
    pub fn add(&self, entry: PositionedMarkup) -> Result<MarkupStore, MarkupError> {
        let mut next = self.clone();
        next.push(entry)?;
        Ok(next)
    }

    pub fn push(&mut self, entry: PositionedMarkup) -> Result<(), MarkupError> {
        let TextRange { start, stop } = entry.range;
        if start > stop || stop > self.span_len {
            return Err(MarkupError::OutOfBounds {
                start,
                stop,
                len: self.span_len,
            });
        }
        Arc::make_mut(&mut self.entries).push(entry);
        Ok(())
    }

    /// Entries intersecting `range`, in insertion order.
    pub fn query(&self, range: TextRange) -> Vec<&PositionedMarkup> {
        self.entries
            .iter()
            .filter(|e| e.range.intersects(&range))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free(s: &str) -> Tree {
        Tree::elem(Markup::new("free"), vec![Tree::text(s)])
    }

    fn entry(start: usize, stop: usize, name: &str) -> PositionedMarkup {
        PositionedMarkup::new(TextRange::new(start, stop), Markup::new(name))
    }

    #[test]
    fn text_content_of_leaf_and_nested() {
        assert_eq!(text_content(&Tree::text("Term:")), "Term:");
        let w = Tree::elem(
            Markup::new("warning").with_attr("serial", 1),
            vec![Tree::text("Term: "), free("x")],
        );
        assert_eq!(text_content(&w), "Term: x");
    }

    #[test]
    fn validate_rejects_bad_names() {
        assert_eq!(Markup::new("").validate(), Err(MarkupError::EmptyName));
        assert!(Markup::new("a\u{5}").validate().is_err());
        assert!(Markup::new("a").with_attr("k=", "v").validate().is_err());
        assert!(Markup::new("a").with_attr("", "v").validate().is_err());
        assert!(Markup::new("a").with_attr("k", "v=w").validate().is_ok());
        assert!(Tree::text("\u{6}").validate().is_err());
    }

    #[test]
    fn store_add_is_monotonic_and_keeps_duplicates() {
        let empty = MarkupStore::new(10);
        let one = empty.add(entry(0, 3, "free")).unwrap();
        assert_eq!(one.len(), 1);
        assert!(empty.is_empty());
        let two = one.add(entry(0, 3, "free")).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn store_add_rejects_out_of_bounds() {
        let s = MarkupStore::new(4);
        assert!(matches!(
            s.add(entry(2, 5, "x")),
            Err(MarkupError::OutOfBounds { len: 4, .. })
        ));
        assert!(s.add(entry(4, 4, "x")).is_ok());
    }

    #[test]
    fn store_query_half_open() {
        let s = MarkupStore::new(10);
        assert!(s.query(TextRange::new(0, 10)).is_empty());
        let s = s
            .add(entry(0, 3, "a"))
            .unwrap()
            .add(entry(5, 7, "b"))
            .unwrap();
        assert!(s.query(TextRange::new(3, 5)).is_empty());
        let s = MarkupStore::new(10)
            .add(entry(0, 3, "a"))
            .unwrap()
            .add(entry(2, 5, "b"))
            .unwrap();
        let hits: Vec<_> = s
            .query(TextRange::new(2, 3))
            .into_iter()
            .map(|e| e.markup.name.as_str())
            .collect();
        assert_eq!(hits, ["a", "b"]);
    }

    #[test]
    fn normalize_merges_text() {
        let body = vec![
            Tree::text("a"),
            Tree::text(""),
            Tree::text("b"),
            Tree::elem(Markup::new("e"), vec![Tree::text(""), Tree::text("c")]),
        ];
        assert_eq!(
            normalize(body),
            vec![
                Tree::text("ab"),
                Tree::elem(Markup::new("e"), vec![Tree::text("c")])
            ]
        );
    }

    #[test]
    fn message_kind_display_flags() {
        for k in MessageKind::ALL {
            assert_eq!(MessageKind::parse(k.as_str()), Some(k));
        }
        assert!(!MessageKind::Report.is_displayed());
        assert!(!MessageKind::Status.is_displayed());
        assert!(MessageKind::Warning.is_displayed());
    }
}
