//! Immutable versions, command spans and structural sharing between them.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::ids::{CommandId, VersionId};
use crate::syntax::{lex, Keyword, TokenKind};

use super::edit::{apply_edits, EditError, TextEdit};

/// One slice of node text produced by [`parse_spans`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    /// `None` for leading text that does not start with a keyword.
    pub keyword: Option<Keyword>,
    pub source: String,
}

/// Splits text before every command keyword; concatenating spans gives back
/// the text.
pub fn parse_spans(text: &str) -> Vec<Span> {
    let starts: Vec<(usize, Keyword)> = lex(text, true)
        .into_iter()
        .filter_map(|t| match t.kind {
            TokenKind::Keyword(k) => Some((t.range.start, k)),
            _ => None,
        })
        .collect();
    let chars: Vec<char> = text.chars().collect();
    let slice = |a: usize, b: usize| chars[a..b].iter().collect::<String>();
    let mut spans = Vec::with_capacity(starts.len() + 1);
    let first = starts.first().map_or(chars.len(), |(s, _)| *s);
    if first > 0 {
        spans.push(Span {
            keyword: None,
            source: slice(0, first),
        });
    }
    for (i, (start, keyword)) in starts.iter().enumerate() {
        let stop = starts.get(i + 1).map_or(chars.len(), |(s, _)| *s);
        spans.push(Span {
            keyword: Some(*keyword),
            source: slice(*start, stop),
        });
    }
    spans
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub id: CommandId,
    pub keyword: Option<Keyword>,
    pub source: Arc<str>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        self.keyword.map_or("malformed", Keyword::as_str)
    }

    /// Length in characters.
    pub fn len(&self) -> usize {
        self.source.chars().count()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }
}

/// Command partition of one node's text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Node {
    pub commands: Vec<Command>,
    text: String,
}

impl Node {
    pub fn new(commands: Vec<Command>) -> Self {
        let text = commands.iter().map(|c| &*c.source).collect();
        Node { commands, text }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Start offsets of every command, plus the total length at the end.
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.commands.len() + 1);
        let mut at = 0;
        out.push(0);
        for c in &self.commands {
            at += c.len();
            out.push(at);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Version {
    pub id: VersionId,
    pub nodes: BTreeMap<String, Arc<Node>>,
}

impl Version {
    pub fn empty() -> Self {
        Version::default()
    }

    pub fn node(&self, name: &str) -> Option<&Arc<Node>> {
        self.nodes.get(name)
    }

    pub fn text(&self, name: &str) -> &str {
        self.node(name).map_or("", |n| n.text())
    }

    pub fn commands(&self) -> impl Iterator<Item = (&str, &Command)> {
        self.nodes
            .iter()
            .flat_map(|(name, node)| node.commands.iter().map(move |c| (name.as_str(), c)))
    }
}

/// Result of re-partitioning one node.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeChange {
    pub node: String,
    pub removed: Vec<CommandId>,
    pub inserted: Vec<Command>,
}

/// Applies `edits` to a node and re-partitions it, keeping the ids of the
/// longest matching prefix and suffix of command sources.
pub fn update_node(
    old: &Node,
    edits: &[TextEdit],
    mut fresh_id: impl FnMut() -> CommandId,
) -> Result<(Node, Vec<CommandId>, Vec<Command>), EditError> {
    let text = apply_edits(old.text(), edits)?;
    let spans = parse_spans(&text);
    let old_cmds = &old.commands;
    let limit = old_cmds.len().min(spans.len());
    let prefix = old_cmds
        .iter()
        .zip(&spans)
        .take_while(|(c, s)| *c.source == *s.source)
        .count();
    let suffix = old_cmds
        .iter()
        .rev()
        .zip(spans.iter().rev())
        .take(limit - prefix)
        .take_while(|(c, s)| *c.source == *s.source)
        .count();

    let removed = old_cmds[prefix..old_cmds.len() - suffix]
        .iter()
        .map(|c| c.id)
        .collect();
    let inserted: Vec<Command> = spans[prefix..spans.len() - suffix]
        .iter()
        .map(|s| Command {
            id: fresh_id(),
            keyword: s.keyword,
            source: Arc::from(s.source.as_str()),
        })
        .collect();
    let commands = old_cmds[..prefix]
        .iter()
        .cloned()
        .chain(inserted.iter().cloned())
        .chain(old_cmds[old_cmds.len() - suffix..].iter().cloned())
        .collect();
    Ok((Node::new(commands), removed, inserted))
}

/// Builds version `id` from `old` by applying per-node edit lists atomically.
/// Nodes without edits share their structure with `old`.
pub fn update(
    old: &Version,
    id: VersionId,
    batch: &[(String, Vec<TextEdit>)],
    mut fresh_id: impl FnMut() -> CommandId,
) -> Result<(Version, Vec<NodeChange>), EditError> {
    let mut nodes = old.nodes.clone();
    let mut changes = Vec::new();
    for (name, edits) in batch {
        let current = nodes.get(name).cloned().unwrap_or_default();
        let (node, removed, inserted) = update_node(&current, edits, &mut fresh_id)?;
        if !removed.is_empty() || !inserted.is_empty() || !nodes.contains_key(name) {
            nodes.insert(name.clone(), Arc::new(node));
        }
        changes.push(NodeChange {
            node: name.clone(),
            removed,
            inserted,
        });
    }
    Ok((Version { id, nodes }, changes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counter(start: u64) -> impl FnMut() -> CommandId {
        let mut next = start;
        move || {
            next += 1;
            CommandId(next)
        }
    }

    fn node_of(text: &str) -> Node {
        let (node, _, _) = update_node(&Node::default(), &[TextEdit::insert(0, text)], counter(0)).unwrap();
        node
    }

    fn ids(node: &Node) -> Vec<u64> {
        node.commands.iter().map(|c| c.id.0).collect()
    }

    #[test]
    fn span_examples() {
        assert!(parse_spans("").is_empty());
        assert_eq!(
            parse_spans("have \"a = b\"\nalso\n"),
            vec![
                Span {
                    keyword: Some(Keyword::Have),
                    source: "have \"a = b\"\n".into()
                },
                Span {
                    keyword: Some(Keyword::Also),
                    source: "also\n".into()
                },
            ]
        );
        assert_eq!(
            parse_spans("xyz have t"),
            vec![
                Span {
                    keyword: None,
                    source: "xyz ".into()
                },
                Span {
                    keyword: Some(Keyword::Have),
                    source: "have t".into()
                },
            ]
        );
    }

    #[test]
    fn keywords_inside_strings_do_not_split() {
        let spans = parse_spans("have \"also = end\" print 1");
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[0].source, "have \"also = end\" ");
    }

    #[test]
    fn identity_update_reuses_everything() {
        let node = node_of("let a = 1\nlet b = 2\n");
        let (next, removed, inserted) = update_node(&node, &[], counter(100)).unwrap();
        assert_eq!(next, node);
        assert!(removed.is_empty() && inserted.is_empty());
    }

    #[test]
    fn edit_in_last_command() {
        let node = node_of("let a = 1\nlet b = 2\nlet c = 3\nlet d = 4\nlet e = 5");
        assert_eq!(ids(&node), [1, 2, 3, 4, 5]);
        let at = node.text().len() - 1;
        let (next, removed, inserted) =
            update_node(&node, &[TextEdit::insert(at, "0")], counter(100)).unwrap();
        assert_eq!(ids(&next), [1, 2, 3, 4, 101]);
        assert_eq!(removed, [CommandId(5)]);
        assert_eq!(inserted.len(), 1);
    }

    #[test]
    fn edit_spanning_two_commands() {
        let node = node_of("let a = 1\nlet b = 2\nlet c = 3\nlet d = 4\nlet e = 5\n");
        // removes "2\nlet c = " leaving "let b = 3\n"
        let (next, removed, _) =
            update_node(&node, &[TextEdit::remove(18, 10)], counter(100)).unwrap();
        assert_eq!(next.text(), "let a = 1\nlet b = 3\nlet d = 4\nlet e = 5\n");
        assert_eq!(ids(&next), [1, 101, 4, 5]);
        assert_eq!(removed, [CommandId(2), CommandId(3)]);
    }

    #[test]
    fn prefix_and_suffix_do_not_overlap() {
        let node = node_of("also\nalso\n");
        let (next, removed, inserted) =
            update_node(&node, &[TextEdit::insert(5, "also\n")], counter(100)).unwrap();
        assert_eq!(ids(&next), [1, 2, 101]);
        assert!(removed.is_empty());
        assert_eq!(inserted.len(), 1);
    }

    #[test]
    fn bad_edit_yields_no_version() {
        let v = Version::empty();
        let batch = vec![("main".to_string(), vec![TextEdit::remove(0, 1)])];
        assert!(update(&v, VersionId(1), &batch, counter(0)).is_err());
    }

    #[test]
    fn untouched_nodes_are_shared() {
        let batch = vec![
            ("a".to_string(), vec![TextEdit::insert(0, "let x = 1")]),
            ("b".to_string(), vec![TextEdit::insert(0, "print 2")]),
        ];
        let (v1, _) = update(&Version::empty(), VersionId(1), &batch, counter(0)).unwrap();
        let batch = vec![("b".to_string(), vec![TextEdit::insert(7, "3")])];
        let (v2, changes) = update(&v1, VersionId(2), &batch, counter(10)).unwrap();
        assert!(Arc::ptr_eq(&v1.nodes["a"], &v2.nodes["a"]));
        assert_eq!(v2.text("b"), "print 23");
        assert_eq!(changes[0].removed, [CommandId(2)]);
    }
}
