//! Deterministic workloads shared by the criterion benchmarks.

use pide_core::document::{TextEdit, Version};
use pide_core::ids::{CommandId, VersionId};
use pide_core::markup::{Markup, Tree};
use pide_core::pretty::Doc;

/// A complete tree of the given depth and fanout whose leaves are short
/// text runs.
pub fn sample_tree(depth: usize, fanout: usize) -> Tree {
    if depth == 0 {
        return Tree::text("leaf & <text>");
    }
    let m = Markup::new("node").with_attr("depth", depth).with_attr("kind", "sample");
    Tree::elem(m, (0..fanout).map(|_| sample_tree(depth - 1, fanout)).collect())
}

/// A sum of `terms` operands nested like a left-leaning expression printer
/// would produce.
pub fn sample_doc(terms: usize) -> Doc {
    let mut body = vec![Doc::text("x0")];
    for i in 1..terms {
        body.push(Doc::text(" +"));
        body.push(Doc::brk(1));
        if i % 5 == 0 {
            body.push(Doc::block(2, vec![Doc::text("f"), Doc::brk(1), Doc::text(format!("y{i}"))]));
        } else {
            body.push(Doc::text(format!("x{i}")));
        }
    }
    Doc::block(0, body)
}

/// Source text with `commands` independent definitions.
pub fn sample_source(commands: usize) -> String {
    (0..commands).map(|i| format!("let v{i} = {i} + 1\n")).collect()
}

/// A version holding [`sample_source`] in node `main`.
pub fn sample_version(commands: usize) -> Version {
    let mut next = 0;
    let batch = [("main".to_string(), vec![TextEdit::insert(0, sample_source(commands))])];
    pide_core::document::update(&Version::empty(), VersionId(1), &batch, || {
        next += 1;
        CommandId(next)
    })
    .expect("insert at 0 is valid")
    .0
}

/// `count` single-character inserts spread evenly over a text of `len`
/// characters, each expressed against the text produced by the ones before.
pub fn spread_edits(len: usize, count: usize) -> Vec<TextEdit> {
    (0..count).map(|i| TextEdit::insert(i * (len / count.max(1) + 1), "z")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workloads_are_well_formed() {
        assert_eq!(sample_version(10).commands().count(), 10);
        let text = sample_source(10);
        assert!(pide_core::document::apply_edits(&text, &spread_edits(text.len(), 20)).is_ok());
        assert!(pide_core::yxml::encode(&[sample_tree(3, 3)]).is_ok());
    }
}
