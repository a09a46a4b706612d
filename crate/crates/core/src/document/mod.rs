//! Versioned document model on the editor side.
//!
//! Text edits produce new immutable [`Version`]s whose nodes are partitioned
//! into command spans. Command ids are shared between versions wherever the
//! span text did not change. The checker answers each version with an
//! [`Assignment`] of execs, whose [`ExecState`]s then accumulate messages and
//! markup. A [`Snapshot`] pairs the latest assigned version with any edits
//! submitted since, and maps queries through those edits.

mod edit;
pub mod script;
mod snapshot;
mod state;
mod version;

pub use edit::{apply_edits, convert, convert_range, revert, revert_range, EditError, TextEdit};
pub use snapshot::{CommandView, MarkupHit, Snapshot};
pub use state::{
    positioned, positioned_tree, AssignOutcome, Assignment, DocumentError, DocumentState,
    EditOutcome, ExecState, ExecStatus, Removed,
};
pub use version::{parse_spans, update, update_node, Command, Node, NodeChange, Span, Version};
