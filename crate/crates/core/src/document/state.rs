//! Front-end session tables: versions, assignments and execution states.
//!
//! Every table entry is immutable once published: growth produces new
//! `Arc`s, so snapshots taken earlier keep observing exactly what they saw.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::ids::{CommandId, ExecId, VersionId};
use crate::markup::{Markup, MarkupStore, Message, MessageKind, PositionedMarkup, TextRange, Tree};

use super::edit::{EditError, TextEdit};
use super::snapshot::Snapshot;
use super::version::{update, NodeChange, Version};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecStatus {
    Pending,
    Running,
    Finished,
    Failed,
    Cancelled,
}

impl ExecStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecStatus::Pending => "pending",
            ExecStatus::Running => "running",
            ExecStatus::Finished => "finished",
            ExecStatus::Failed => "failed",
            ExecStatus::Cancelled => "cancelled",
        }
    }

    pub fn parse(s: &str) -> Option<ExecStatus> {
        [
            ExecStatus::Pending,
            ExecStatus::Running,
            ExecStatus::Finished,
            ExecStatus::Failed,
            ExecStatus::Cancelled,
        ]
        .into_iter()
        .find(|st| st.as_str() == s)
    }

    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            ExecStatus::Finished | ExecStatus::Failed | ExecStatus::Cancelled
        )
    }

    fn can_become(self, next: ExecStatus) -> bool {
        matches!(
            (self, next),
            (ExecStatus::Pending, ExecStatus::Running)
                | (
                    ExecStatus::Running,
                    ExecStatus::Finished | ExecStatus::Failed | ExecStatus::Cancelled
                )
        )
    }
}

impl fmt::Display for ExecStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecState {
    pub exec_id: ExecId,
    pub status: ExecStatus,
    pub messages: Arc<Vec<Message>>,
    pub markup: MarkupStore,
}

impl ExecState {
    pub fn new(exec_id: ExecId, span_len: usize) -> Self {
        ExecState {
            exec_id,
            status: ExecStatus::Pending,
            messages: Arc::new(Vec::new()),
            markup: MarkupStore::new(span_len),
        }
    }

    /// Appends a message; status and report messages also update status and
    /// markup. Problems are returned as diagnostics, never as failures.
    pub fn absorb(&mut self, msg: Message) -> Vec<String> {
        let mut diagnostics = Vec::new();
        match msg.kind {
            MessageKind::Status => {
                for tree in &msg.body {
                    let Some(next) = tree.markup().and_then(|m| ExecStatus::parse(&m.name)) else {
                        continue;
                    };
                    if self.status.can_become(next) {
                        self.status = next;
                    } else {
                        diagnostics.push(format!(
                            "exec {}: ignored status {} after {}",
                            self.exec_id, next, self.status
                        ));
                    }
                }
            }
            MessageKind::Report => {
                for tree in &msg.body {
                    match positioned(tree) {
                        Some(entry) => {
                            if let Err(e) = self.markup.push(entry) {
                                diagnostics.push(format!("exec {}: {e}", self.exec_id));
                            }
                        }
                        None => diagnostics.push(format!(
                            "exec {}: report element without position",
                            self.exec_id
                        )),
                    }
                }
            }
            _ => {}
        }
        Arc::make_mut(&mut self.messages).push(msg);
        diagnostics
    }

    /// Displayable messages only (no status or report).
    pub fn output(&self) -> impl Iterator<Item = &Message> {
        self.messages.iter().filter(|m| m.kind.is_displayed())
    }
}

/// Reads `offset`/`end_offset` off a report element.
pub fn positioned(tree: &Tree) -> Option<PositionedMarkup> {
    let m = tree.markup()?;
    let start = m.attr("offset")?.parse().ok()?;
    let stop = m.attr("end_offset")?.parse().ok()?;
    if start > stop {
        return None;
    }
    let attrs = m
        .attrs
        .iter()
        .filter(|(k, _)| k != "offset" && k != "end_offset")
        .cloned()
        .collect();
    Some(PositionedMarkup::new(
        TextRange::new(start, stop),
        Markup {
            name: m.name.clone(),
            attrs,
        },
    ))
}

/// Inverse of [`positioned`].
pub fn positioned_tree(entry: &PositionedMarkup) -> Tree {
    let mut m = Markup::new(entry.markup.name.clone())
        .with_attr("offset", entry.range.start)
        .with_attr("end_offset", entry.range.stop);
    m.attrs.extend(entry.markup.attrs.iter().cloned());
    Tree::Elem(m, Vec::new())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub version_id: VersionId,
    pub command_to_exec: BTreeMap<CommandId, ExecId>,
    pub complete: bool,
}

impl Assignment {
    pub fn pending(version_id: VersionId) -> Self {
        Assignment {
            version_id,
            command_to_exec: BTreeMap::new(),
            complete: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DocumentError {
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error("unknown version {0}")]
    UnknownVersion(VersionId),
    #[error("assignment for version {0} already complete")]
    AlreadyAssigned(VersionId),
    #[error("assignment for version {version} misses command {command}")]
    IncompleteAssignment {
        version: VersionId,
        command: CommandId,
    },
    #[error("cannot remove version {0}: it is the tip or the latest assigned version")]
    RemoveLive(VersionId),
}

/// Outcome of [`DocumentState::edit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditOutcome {
    pub old_version: VersionId,
    pub version: Arc<Version>,
    pub changes: Vec<NodeChange>,
}

/// Outcome of [`DocumentState::assign`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AssignOutcome {
    /// Execs of the previous tip assignment that the new one dropped.
    pub superseded: Vec<ExecId>,
    pub new_execs: Vec<ExecId>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Removed {
    pub versions: Vec<VersionId>,
    pub execs: Vec<ExecId>,
}

#[derive(Debug, Clone)]
pub struct DocumentState {
    versions: BTreeMap<VersionId, Arc<Version>>,
    /// Edits leading from the previous version to the keyed one.
    edits: BTreeMap<VersionId, Arc<Vec<(String, Vec<TextEdit>)>>>,
    assignments: BTreeMap<VersionId, Arc<Assignment>>,
    execs: HashMap<ExecId, Arc<ExecState>>,
    buffered: HashMap<ExecId, Vec<Message>>,
    tip: VersionId,
    latest_assigned: VersionId,
    next_version: u64,
    next_command: u64,
}

impl Default for DocumentState {
    fn default() -> Self {
        Self::new()
    }
}

impl DocumentState {
    pub fn new() -> Self {
        let v0 = VersionId(0);
        let mut assignment = Assignment::pending(v0);
        assignment.complete = true;
        DocumentState {
            versions: BTreeMap::from([(v0, Arc::new(Version::empty()))]),
            edits: BTreeMap::new(),
            assignments: BTreeMap::from([(v0, Arc::new(assignment))]),
            execs: HashMap::new(),
            buffered: HashMap::new(),
            tip: v0,
            latest_assigned: v0,
            next_version: 0,
            next_command: 0,
        }
    }

    pub fn tip(&self) -> VersionId {
        self.tip
    }

    pub fn latest_assigned(&self) -> VersionId {
        self.latest_assigned
    }

    pub fn version(&self, id: VersionId) -> Option<&Arc<Version>> {
        self.versions.get(&id)
    }

    pub fn tip_version(&self) -> &Arc<Version> {
        &self.versions[&self.tip]
    }

    pub fn versions(&self) -> impl Iterator<Item = &Arc<Version>> {
        self.versions.values()
    }

    pub fn assignment(&self, id: VersionId) -> Option<&Arc<Assignment>> {
        self.assignments.get(&id)
    }

    pub fn assignments(&self) -> impl Iterator<Item = &Arc<Assignment>> {
        self.assignments.values()
    }

    pub fn exec(&self, id: ExecId) -> Option<&Arc<ExecState>> {
        self.execs.get(&id)
    }

    pub fn exec_count(&self) -> usize {
        self.execs.len()
    }

    pub fn version_count(&self) -> usize {
        self.versions.len()
    }

    pub fn exec_ids(&self) -> impl Iterator<Item = ExecId> + '_ {
        self.execs.keys().copied()
    }

    pub fn buffered_count(&self) -> usize {
        self.buffered.values().map(Vec::len).sum()
    }

    /// Creates the next version from the tip; nothing changes on error.
    pub fn edit(&mut self, batch: &[(String, Vec<TextEdit>)]) -> Result<EditOutcome, DocumentError> {
        let old = Arc::clone(self.tip_version());
        let id = VersionId(self.next_version + 1);
        let mut next_command = self.next_command;
        let (version, changes) = update(&old, id, batch, || {
            next_command += 1;
            CommandId(next_command)
        })?;
        self.next_command = next_command;
        self.next_version += 1;
        let version = Arc::new(version);
        self.versions.insert(id, Arc::clone(&version));
        self.edits.insert(id, Arc::new(batch.to_vec()));
        self.assignments.insert(id, Arc::new(Assignment::pending(id)));
        self.tip = id;
        Ok(EditOutcome {
            old_version: old.id,
            version,
            changes,
        })
    }

    /// Completes the assignment of `version` and flushes buffered output of
    /// any exec it introduces.
    pub fn assign(
        &mut self,
        version: VersionId,
        pairs: &[(CommandId, ExecId)],
    ) -> Result<AssignOutcome, DocumentError> {
        let v = self
            .versions
            .get(&version)
            .cloned()
            .ok_or(DocumentError::UnknownVersion(version))?;
        if self.assignments.get(&version).is_some_and(|a| a.complete) {
            return Err(DocumentError::AlreadyAssigned(version));
        }
        let map: BTreeMap<CommandId, ExecId> = pairs.iter().copied().collect();
        let mut out = AssignOutcome::default();
        for (_, cmd) in v.commands() {
            let exec = *map.get(&cmd.id).ok_or(DocumentError::IncompleteAssignment {
                version,
                command: cmd.id,
            })?;
            if !self.execs.contains_key(&exec) {
                let mut state = ExecState::new(exec, cmd.len());
                for msg in self.buffered.remove(&exec).unwrap_or_default() {
                    out.diagnostics.extend(state.absorb(msg));
                }
                self.execs.insert(exec, Arc::new(state));
                out.new_execs.push(exec);
            }
        }
        let previous = self.assignments.get(&self.latest_assigned).cloned();
        self.assignments.insert(
            version,
            Arc::new(Assignment {
                version_id: version,
                command_to_exec: map,
                complete: true,
            }),
        );
        if version > self.latest_assigned {
            if let Some(prev) = previous {
                let now = &self.assignments[&version].command_to_exec;
                let live: BTreeSet<ExecId> = now.values().copied().collect();
                out.superseded = prev
                    .command_to_exec
                    .values()
                    .copied()
                    .filter(|e| !live.contains(e))
                    .collect();
            }
            self.latest_assigned = version;
        }
        Ok(out)
    }

    /// Routes a checker message to its exec, buffering unknown exec ids.
    pub fn add_message(&mut self, msg: Message) -> Vec<String> {
        let id = ExecId(msg.exec_id);
        match self.execs.get_mut(&id) {
            Some(state) => Arc::make_mut(state).absorb(msg),
            None => {
                self.buffered.entry(id).or_default().push(msg);
                Vec::new()
            }
        }
    }

    /// Edits submitted after `since`, for one node, in order.
    pub fn edits_after(&self, since: VersionId, node: &str) -> Vec<TextEdit> {
        self.edits
            .range(VersionId(since.0 + 1)..)
            .flat_map(|(_, batch)| batch.iter())
            .filter(|(n, _)| n == node)
            .flat_map(|(_, edits)| edits.iter().cloned())
            .collect()
    }

    pub fn snapshot(&self, node: &str) -> Snapshot {
        let version = Arc::clone(&self.versions[&self.latest_assigned]);
        let assignment = Arc::clone(&self.assignments[&self.latest_assigned]);
        let execs = version
            .node(node)
            .into_iter()
            .flat_map(|n| n.commands.iter())
            .filter_map(|c| assignment.command_to_exec.get(&c.id))
            .filter_map(|e| self.execs.get(e).map(|s| (*e, Arc::clone(s))))
            .collect();
        Snapshot::new(
            version,
            node.to_string(),
            self.edits_after(self.latest_assigned, node),
            self.tip_version().text(node).into(),
            assignment,
            execs,
        )
    }

    /// True when the tip is assigned and all of its execs have terminated.
    pub fn is_quiescent(&self) -> bool {
        self.tip == self.latest_assigned
            && self.assignments[&self.tip]
                .command_to_exec
                .values()
                .all(|e| self.execs.get(e).is_some_and(|s| s.status.is_terminal()))
    }

    /// Drops every version not in `keep`, together with assignments and
    /// execs no kept assignment refers to. Versions newer than the latest
    /// assigned one are still in flight and always retained.
    pub fn remove_versions(&mut self, keep: &BTreeSet<VersionId>) -> Result<Removed, DocumentError> {
        for live in [self.tip, self.latest_assigned] {
            if !keep.contains(&live) {
                return Err(DocumentError::RemoveLive(live));
            }
        }
        let retained = |v: &VersionId| keep.contains(v) || *v > self.latest_assigned;
        let versions: Vec<VersionId> = self.versions.keys().copied().filter(|v| !retained(v)).collect();
        for v in &versions {
            self.versions.remove(v);
            self.assignments.remove(v);
            self.edits.remove(v);
        }
        let reachable: BTreeSet<ExecId> = self
            .assignments
            .values()
            .flat_map(|a| a.command_to_exec.values().copied())
            .collect();
        let mut execs: Vec<ExecId> = self
            .execs
            .keys()
            .copied()
            .filter(|e| !reachable.contains(e))
            .collect();
        execs.sort();
        for e in &execs {
            self.execs.remove(e);
        }
        Ok(Removed { versions, execs })
    }
}
