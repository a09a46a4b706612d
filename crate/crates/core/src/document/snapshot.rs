//! Immutable views pairing the latest assigned version with pending edits.

use std::collections::HashMap;
use std::sync::Arc;

use crate::ids::{CommandId, ExecId};
use crate::markup::{Markup, TextRange};

use super::edit::{convert_range, revert_range, TextEdit};
use super::state::{Assignment, ExecState};
use super::version::{Command, Version};

#[derive(Debug, Clone)]
pub struct Snapshot {
    version: Arc<Version>,
    node: String,
    pending: Vec<TextEdit>,
    text: Arc<str>,
    assignment: Arc<Assignment>,
    execs: HashMap<ExecId, Arc<ExecState>>,
}

/// One command of the snapshot version and what is known about it.
#[derive(Debug, Clone)]
pub struct CommandView<'a> {
    pub command: &'a Command,
    pub version_range: TextRange,
    /// Range in the current text; `None` when pending edits removed it.
    pub range: Option<TextRange>,
    pub exec: Option<&'a Arc<ExecState>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkupHit {
    pub range: TextRange,
    pub markup: Markup,
    pub command: CommandId,
}

/// Maps a version range forward, dropping ranges the edits destroyed.
fn surviving(range: TextRange, pending: &[TextEdit]) -> Option<TextRange> {
    let moved = convert_range(range, pending);
    (moved.len() > 0 || range.is_empty()).then_some(moved)
}

impl Snapshot {
    pub(crate) fn new(
        version: Arc<Version>,
        node: String,
        pending: Vec<TextEdit>,
        text: Arc<str>,
        assignment: Arc<Assignment>,
        execs: HashMap<ExecId, Arc<ExecState>>,
    ) -> Self {
        Snapshot {
            version,
            node,
            pending,
            text,
            assignment,
            execs,
        }
    }

    pub fn version(&self) -> &Arc<Version> {
        &self.version
    }

    pub fn node(&self) -> &str {
        &self.node
    }

    pub fn pending_edits(&self) -> &[TextEdit] {
        &self.pending
    }

    pub fn is_outdated(&self) -> bool {
        !self.pending.is_empty()
    }

    /// Node text as of the newest submitted edit.
    pub fn text(&self) -> &str {
        &self.text
    }

    /// Node text as of the snapshot version.
    pub fn version_text(&self) -> &str {
        self.version.text(&self.node)
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn commands(&self) -> Vec<CommandView<'_>> {
        let Some(node) = self.version.node(&self.node) else {
            return Vec::new();
        };
        let offsets = node.offsets();
        node.commands
            .iter()
            .enumerate()
            .map(|(i, command)| {
                let version_range = TextRange::new(offsets[i], offsets[i + 1]);
                CommandView {
                    command,
                    version_range,
                    range: surviving(version_range, &self.pending),
                    exec: self
                        .assignment
                        .command_to_exec
                        .get(&command.id)
                        .and_then(|e| self.execs.get(e)),
                }
            })
            .collect()
    }

    /// Markup intersecting `range` of the current text, in current-text
    /// coordinates, ordered by command and then by arrival.
    pub fn markup_query(&self, range: TextRange) -> Vec<MarkupHit> {
        let query = revert_range(range, &self.pending);
        let mut hits = Vec::new();
        for view in self.commands() {
            let span = view.version_range;
            if !span.intersects(&query) {
                continue;
            }
            let Some(exec) = view.exec else { continue };
            let local = TextRange::new(
                query.start.max(span.start) - span.start,
                query.stop.min(span.stop) - span.start,
            );
            for entry in exec.markup.query(local) {
                let Some(current) = surviving(entry.range.shift(span.start), &self.pending) else {
                    continue;
                };
                if current.intersects(&range) {
                    hits.push(MarkupHit {
                        range: current,
                        markup: entry.markup.clone(),
                        command: view.command.id,
                    });
                }
            }
        }
        hits
    }

    /// Maps a range relative to `command` into current-text coordinates.
    pub fn current_range(&self, view: &CommandView<'_>, local: TextRange) -> Option<TextRange> {
        surviving(local.shift(view.version_range.start), &self.pending)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::state::{positioned_tree, DocumentState};
    use crate::ids::{ExecId, VersionId};
    use crate::markup::{Message, MessageKind, PositionedMarkup};

    /// Session with "let x = 1\nprint x\n" assigned, and a "free" report on
    /// each `x` token.
    fn checked() -> DocumentState {
        let mut state = DocumentState::new();
        let out = state
            .edit(&[("main".into(), vec![TextEdit::insert(0, "let x = 1\nprint x\n")])])
            .unwrap();
        let cmds = &out.version.node("main").unwrap().commands;
        let pairs: Vec<_> = cmds
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id, ExecId(i as u64 + 1)))
            .collect();
        state.assign(VersionId(1), &pairs).unwrap();
        for (exec, start) in [(1, 4), (2, 6)] {
            state.add_message(Message {
                serial: exec,
                kind: MessageKind::Report,
                exec_id: exec,
                range: None,
                body: vec![positioned_tree(&PositionedMarkup::new(
                    TextRange::new(start, start + 1),
                    Markup::new("free"),
                ))],
            });
        }
        state
    }

    fn ranges(hits: &[MarkupHit]) -> Vec<(usize, usize)> {
        hits.iter().map(|h| (h.range.start, h.range.stop)).collect()
    }

    #[test]
    fn query_without_pending_edits() {
        let state = checked();
        let snap = state.snapshot("main");
        assert!(!snap.is_outdated());
        assert_eq!(ranges(&snap.markup_query(TextRange::new(0, 18))), [(4, 5), (16, 17)]);
        assert_eq!(ranges(&snap.markup_query(TextRange::new(5, 16))), []);
    }

    #[test]
    fn pending_insert_shifts_results() {
        let mut state = checked();
        state
            .edit(&[("main".into(), vec![TextEdit::insert(0, "print 0\n")])])
            .unwrap();
        let snap = state.snapshot("main");
        assert!(snap.is_outdated());
        assert_eq!(snap.text(), "print 0\nlet x = 1\nprint x\n");
        assert_eq!(ranges(&snap.markup_query(TextRange::new(0, 26))), [(12, 13), (24, 25)]);
        // the inserted text itself has no markup yet
        assert!(snap.markup_query(TextRange::new(0, 8)).is_empty());
    }

    #[test]
    fn markup_inside_pending_remove_is_dropped() {
        let mut state = checked();
        state
            .edit(&[("main".into(), vec![TextEdit::remove(4, 4)])])
            .unwrap();
        let snap = state.snapshot("main");
        assert_eq!(snap.text(), "let 1\nprint x\n");
        assert_eq!(ranges(&snap.markup_query(TextRange::new(0, 14))), [(12, 13)]);
    }

    #[test]
    fn commands_report_current_ranges() {
        let mut state = checked();
        state
            .edit(&[("main".into(), vec![TextEdit::remove(0, 10)])])
            .unwrap();
        let snap = state.snapshot("main");
        let views = snap.commands();
        assert_eq!(views.len(), 2);
        assert_eq!(views[0].range, None);
        assert_eq!(views[1].range, Some(TextRange::new(0, 8)));
        assert!(views[1].exec.is_some());
    }
}
