//! Exhaustive layout search over per-block break choices.

use pide_core::pretty::Doc;

fn count_blocks(doc: &Doc) -> usize {
    match doc {
        Doc::Block { body, .. } => 1 + body.iter().map(count_blocks).sum::<usize>(),
        _ => 0,
    }
}

/// Number of choice points, counting the implicit top-level block.
pub fn choice_points(doc: &Doc) -> usize {
    count_blocks(doc) + 1
}

fn render(doc: &Doc, level: usize, broken: bool, mask: u64, next: &mut usize, out: &mut String) {
    match doc {
        Doc::Text(s) => out.push_str(s),
        Doc::Break { width } => {
            if broken {
                out.push('\n');
                out.push_str(&" ".repeat(level));
            } else {
                out.push_str(&" ".repeat(*width));
            }
        }
        Doc::Block { indent, body } => {
            let mine = *next;
            *next += 1;
            let b = mask >> mine & 1 == 1;
            for d in body {
                render(d, level + indent, b, mask, next, out);
            }
        }
    }
}

/// Renders `doc` with block `i` (pre-order, root first) broken iff bit `i` is set.
pub fn render_with(doc: &Doc, mask: u64) -> String {
    let mut out = String::new();
    let mut next = 1;
    render(doc, 0, mask & 1 == 1, mask, &mut next, &mut out);
    out
}

pub fn widest(s: &str) -> usize {
    s.split('\n').map(|l| l.chars().count()).max().unwrap_or(0)
}

/// Some layout whose lines all fit, if one exists.
pub fn fitting_layout(doc: &Doc, margin: usize) -> Option<String> {
    let n = choice_points(doc);
    assert!(n <= 20, "too many blocks for exhaustive search");
    (0..1u64 << n)
        .map(|mask| render_with(doc, mask))
        .find(|s| widest(s) <= margin)
}

/// Minimal (overflow, line count) layout, the tie-break used for examples.
pub fn best_layout(doc: &Doc, margin: usize) -> String {
    let n = choice_points(doc);
    (0..1u64 << n)
        .map(|mask| render_with(doc, mask))
        .min_by_key(|s| {
            let overflow: usize = s
                .split('\n')
                .map(|l| l.chars().count().saturating_sub(margin))
                .sum();
            (overflow, s.matches('\n').count())
        })
        .unwrap()
}
