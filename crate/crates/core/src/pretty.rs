//! Block/break pretty printing carried as symbolic markup.
//!
//! Layout is described by `block` (with an `indent` attribute) and `break`
//! (with a `width` attribute) elements that may be freely interleaved with
//! semantic markup. [`format_markup`] resolves the layout elements against a
//! margin and keeps everything else intact, so a front-end can defer physical
//! formatting until it knows its window size.
//!
//! Blocks break consistently: either every break that belongs directly to a
//! block is taken, or none is. Each block is decided left to right, staying
//! flat whenever the remaining document can still be laid out within the
//! margin that way. The search is memoized on position, column and the
//! decisions of the enclosing blocks, so it is linear in the document for a
//! fixed nesting depth. Documents that cannot fit at all fall back to the
//! classic one-line width test per block.

use std::collections::HashMap;

use thiserror::Error;

use crate::markup::{normalize, text_content, Markup, Tree};

/// Upper bound for block indentation and break width.
pub const MAX_INDENT: usize = 1000;

/// Margin used by command-line dumps.
pub const DEFAULT_MARGIN: usize = 76;

pub const BLOCK: &str = "block";
pub const BREAK: &str = "break";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Doc {
    Text(String),
    Block { indent: usize, body: Vec<Doc> },
    Break { width: usize },
}

impl Doc {
    pub fn text(s: impl Into<String>) -> Doc {
        Doc::Text(s.into())
    }

    pub fn block(indent: usize, body: Vec<Doc>) -> Doc {
        Doc::Block { indent, body }
    }

    pub fn brk(width: usize) -> Doc {
        Doc::Break { width }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrettyError {
    #[error("element <{0}> is not layout markup")]
    NotLayout(String),
    #[error("bad {attr} attribute {value:?} on <{elem}>")]
    BadAttr {
        elem: &'static str,
        attr: &'static str,
        value: String,
    },
}

pub fn block_markup(indent: usize) -> Markup {
    Markup::new(BLOCK).with_attr("indent", indent)
}

pub fn break_markup(width: usize) -> Markup {
    Markup::new(BREAK).with_attr("width", width)
}

pub fn pretty_to_markup(doc: &Doc) -> Tree {
    match doc {
        Doc::Text(s) => Tree::Text(s.clone()),
        Doc::Block { indent, body } => Tree::Elem(
            block_markup(*indent),
            body.iter().map(pretty_to_markup).collect(),
        ),
        Doc::Break { width } => {
            Tree::Elem(break_markup(*width), vec![Tree::Text(" ".repeat(*width))])
        }
    }
}

/// Inverse of [`pretty_to_markup`] for trees made of layout markup only.
pub fn markup_to_pretty(tree: &Tree) -> Result<Doc, PrettyError> {
    match tree {
        Tree::Text(s) => Ok(Doc::Text(s.clone())),
        Tree::Elem(m, body) if m.name == BLOCK => Ok(Doc::Block {
            indent: numeric_attr(m, BLOCK, "indent")?,
            body: body
                .iter()
                .map(markup_to_pretty)
                .collect::<Result<_, _>>()?,
        }),
        Tree::Elem(m, _) if m.name == BREAK => Ok(Doc::Break {
            width: numeric_attr(m, BREAK, "width")?,
        }),
        Tree::Elem(m, _) => Err(PrettyError::NotLayout(m.name.clone())),
    }
}

fn numeric_attr(m: &Markup, elem: &'static str, attr: &'static str) -> Result<usize, PrettyError> {
    let value = m.attr(attr).unwrap_or("");
    value
        .parse::<usize>()
        .ok()
        .filter(|&n| n <= MAX_INDENT)
        .ok_or_else(|| PrettyError::BadAttr {
            elem,
            attr,
            value: value.to_string(),
        })
}

/// Lays out `doc` against `margin` and returns the plain text.
pub fn format(doc: &Doc, margin: usize) -> String {
    let tree = pretty_to_markup(doc);
    format_body(std::slice::from_ref(&tree), margin)
        .iter()
        .map(text_content)
        .collect()
}

/// Resolves layout markup into spaces and newlines; semantic markup stays.
pub fn format_markup(tree: &Tree, margin: usize) -> Vec<Tree> {
    format_body(std::slice::from_ref(tree), margin)
}

pub fn format_body(body: &[Tree], margin: usize) -> Vec<Tree> {
    let mut tokens = vec![Tok::Begin];
    linearize(body, 0, 0, &mut tokens);
    tokens.push(Tok::End);
    Printer::new(tokens, margin.max(1)).run()
}

#[derive(Debug)]
enum Tok<'a> {
    Text(&'a str, usize),
    /// Width, plus indentation level and nesting depth of the owning block.
    Break { width: usize, level: usize, depth: usize },
    Begin,
    End,
    Open(&'a Markup),
    Close,
}

impl Tok<'_> {
    fn width(&self) -> usize {
        match self {
            Tok::Text(_, w) | Tok::Break { width: w, .. } => *w,
            _ => 0,
        }
    }
}

fn attr_or_zero(m: &Markup, key: &str) -> usize {
    m.attr(key)
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0)
        .min(MAX_INDENT)
}

fn linearize<'a>(body: &'a [Tree], level: usize, depth: usize, out: &mut Vec<Tok<'a>>) {
    for t in body {
        match t {
            Tree::Text(s) => out.push(Tok::Text(s, s.chars().count())),
            Tree::Elem(m, b) if m.name == BLOCK => {
                out.push(Tok::Begin);
                linearize(b, level + attr_or_zero(m, "indent"), depth + 1, out);
                out.push(Tok::End);
            }
            Tree::Elem(m, _) if m.name == BREAK => out.push(Tok::Break {
                width: attr_or_zero(m, "width"),
                level,
                depth,
            }),
            Tree::Elem(m, b) => {
                out.push(Tok::Open(m));
                linearize(b, level, depth, out);
                out.push(Tok::Close);
            }
        }
    }
}

/// Break decisions of the currently open blocks, innermost last.
type Decisions = Vec<bool>;

struct Printer<'a> {
    tokens: Vec<Tok<'a>>,
    margin: usize,
    /// Flat width of each block, indexed by its `Begin` token.
    block_width: Vec<usize>,
    /// Index of the matching `End` for each `Begin`.
    block_end: Vec<usize>,
    /// Flat width from a token up to the next break (or the end).
    to_break: Vec<usize>,
    /// Whether the rest of the layout can fit, keyed by `Begin` position,
    /// column and open decisions.
    memo: HashMap<(usize, usize, Decisions), bool>,
}

impl<'a> Printer<'a> {
    fn new(tokens: Vec<Tok<'a>>, margin: usize) -> Self {
        let n = tokens.len();
        let mut block_width = vec![0; n];
        let mut block_end = vec![0; n];
        let mut open: Vec<(usize, usize)> = Vec::new();
        let mut prefix = 0usize;
        for (i, t) in tokens.iter().enumerate() {
            match t {
                Tok::Begin => open.push((i, prefix)),
                Tok::End => {
                    let (b, start) = open.pop().expect("balanced blocks");
                    block_width[b] = prefix - start;
                    block_end[b] = i;
                }
                t => prefix += t.width(),
            }
        }
        let mut to_break = vec![0; n + 1];
        for i in (0..n).rev() {
            to_break[i] = match tokens[i] {
                Tok::Break { .. } => 0,
                ref t => t.width() + to_break[i + 1],
            };
        }
        Printer {
            tokens,
            margin,
            block_width,
            block_end,
            to_break,
            memo: HashMap::new(),
        }
    }

    /// Can tokens from `i` on be laid out with every line within the margin?
    fn feasible(&mut self, mut i: usize, mut col: usize, mut open: Decisions) -> bool {
        while i < self.tokens.len() {
            match self.tokens[i] {
                Tok::Begin => {
                    let key = (i, col, open.clone());
                    if let Some(&known) = self.memo.get(&key) {
                        return known;
                    }
                    let ok = [false, true].into_iter().any(|broken| {
                        let mut next = open.clone();
                        next.push(broken);
                        self.feasible(i + 1, col, next)
                    });
                    self.memo.insert(key, ok);
                    return ok;
                }
                Tok::End => {
                    open.pop();
                }
                Tok::Break { width, level, depth } => {
                    col = if open[depth] { level } else { col + width };
                }
                Tok::Text(_, width) => col += width,
                Tok::Open(_) | Tok::Close => {}
            }
            if col > self.margin {
                return false;
            }
            i += 1;
        }
        true
    }

    /// Flat if the rest can still fit that way, else broken if that can fit;
    /// when nothing fits, fall back to comparing the block's one-line width
    /// (plus text up to the next break) against the remaining space.
    fn decide(&mut self, i: usize, col: usize, open: &Decisions) -> bool {
        for broken in [false, true] {
            let mut next = open.clone();
            next.push(broken);
            if self.feasible(i + 1, col, next) {
                return broken;
            }
        }
        let trailing = self.to_break[self.block_end[i] + 1];
        col + self.block_width[i] + trailing > self.margin
    }

    fn run(mut self) -> Vec<Tree> {
        let mut open: Decisions = Vec::new();
        let mut out: Vec<(Option<&Markup>, Vec<Tree>)> = vec![(None, Vec::new())];
        let mut col = 0usize;
        for i in 0..self.tokens.len() {
            match self.tokens[i] {
                Tok::Begin => {
                    let broken = self.decide(i, col, &open);
                    open.push(broken);
                }
                Tok::End => {
                    open.pop();
                }
                Tok::Break { width, level, depth } => {
                    let text = if open[depth] {
                        col = level;
                        format!("\n{}", " ".repeat(level))
                    } else {
                        col += width;
                        " ".repeat(width)
                    };
                    push_text(&mut out, text);
                }
                Tok::Text(s, width) => {
                    col += width;
                    push_text(&mut out, s.to_string());
                }
                Tok::Open(m) => out.push((Some(m), Vec::new())),
                Tok::Close => {
                    let (m, body) = out.pop().expect("balanced markup");
                    let elem = Tree::Elem(m.expect("markup frame").clone(), normalize(body));
                    out.last_mut().expect("root frame").1.push(elem);
                }
            }
        }
        let (_, body) = out.pop().expect("root frame");
        normalize(body)
    }
}

fn push_text(out: &mut [(Option<&Markup>, Vec<Tree>)], text: String) {
    if !text.is_empty() {
        out.last_mut().expect("root frame").1.push(Tree::Text(text));
    }
}

/// Width of the longest line of `s`, in characters.
pub fn max_line_width(s: &str) -> usize {
    s.split('\n').map(|l| l.chars().count()).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Doc {
        Doc::text(s)
    }

    #[test]
    fn break_and_block_markup() {
        assert_eq!(
            pretty_to_markup(&Doc::brk(1)),
            Tree::elem(
                Markup::new("break").with_attr("width", "1"),
                vec![Tree::text(" ")]
            )
        );
        assert_eq!(pretty_to_markup(&t("x")), Tree::text("x"));
        assert_eq!(
            pretty_to_markup(&Doc::block(0, vec![t("x")])),
            Tree::elem(
                Markup::new("block").with_attr("indent", "0"),
                vec![Tree::text("x")]
            )
        );
    }

    #[test]
    fn format_examples() {
        let sum = Doc::block(
            0,
            vec![t("x"), Doc::brk(1), t("+"), Doc::brk(1), t("y")],
        );
        assert_eq!(format(&sum, 80), "x + y");
        assert_eq!(format(&t("abcdef"), 3), "abcdef");
        let two = Doc::block(2, vec![t("aaaa"), Doc::brk(1), t("bbbb")]);
        assert_eq!(format(&two, 5), "aaaa\n  bbbb");
    }

    #[test]
    fn breaks_are_consistent_within_a_block() {
        let doc = Doc::block(
            1,
            vec![t("aa"), Doc::brk(1), t("b"), Doc::brk(1), t("cc")],
        );
        assert_eq!(format(&doc, 6), "aa\n b\n cc");
    }

    #[test]
    fn nested_indentation_accumulates() {
        let inner = Doc::block(2, vec![t("ccc"), Doc::brk(1), t("ddd")]);
        let doc = Doc::block(2, vec![t("aaa"), Doc::brk(1), inner]);
        assert_eq!(format(&doc, 5), "aaa\n  ccc\n    ddd");
    }

    #[test]
    fn trailing_text_counts_against_fit() {
        // "(x y)" alone fits in 6 but the closing text does not
        let inner = Doc::block(0, vec![t("x"), Doc::brk(1), t("y")]);
        let doc = Doc::block(0, vec![t("("), inner, t("abcd)")]);
        assert_eq!(format(&doc, 6), "(x\nyabcd)");
    }

    #[test]
    fn markup_roundtrip_and_errors() {
        let doc = Doc::block(3, vec![t("a"), Doc::brk(2), Doc::block(0, vec![])]);
        assert_eq!(markup_to_pretty(&pretty_to_markup(&doc)).unwrap(), doc);
        let free = Tree::elem(Markup::new("free"), vec![]);
        assert_eq!(
            markup_to_pretty(&free),
            Err(PrettyError::NotLayout("free".into()))
        );
        let bad = Tree::elem(Markup::new("block").with_attr("indent", "x"), vec![]);
        assert!(matches!(markup_to_pretty(&bad), Err(PrettyError::BadAttr { .. })));
    }

    #[test]
    fn semantic_markup_survives_formatting() {
        let tree = Tree::elem(
            block_markup(0),
            vec![
                Tree::elem(Markup::new("free"), vec![Tree::text("x")]),
                Tree::elem(break_markup(1), vec![Tree::text(" ")]),
                Tree::elem(Markup::new("entity"), vec![Tree::text("+")]),
            ],
        );
        assert_eq!(
            format_markup(&tree, 80),
            vec![
                Tree::elem(Markup::new("free"), vec![Tree::text("x")]),
                Tree::text(" "),
                Tree::elem(Markup::new("entity"), vec![Tree::text("+")]),
            ]
        );
        let plain = Tree::elem(Markup::new("free"), vec![Tree::text("x")]);
        assert_eq!(format_markup(&plain, 1), vec![plain.clone()]);
    }
}
