//! Random generators for markup trees and pretty documents.

use pide_core::markup::{Markup, Tree};
use pide_core::pretty::Doc;
use rand::Rng;

const NAMES: &[&str] = &["block", "free", "entity", "hilite", "a", "x-y", "täg"];
const TEXT_CHARS: &[char] = &['a', 'b', ' ', '=', '\n', '<', '&', 'é', 'λ', '"'];

fn word(rng: &mut impl Rng, chars: &[char], max: usize) -> String {
    let n = rng.gen_range(1..=max);
    (0..n).map(|_| chars[rng.gen_range(0..chars.len())]).collect()
}

fn markup(rng: &mut impl Rng) -> Markup {
    let mut m = Markup::new(NAMES[rng.gen_range(0..NAMES.len())]);
    for i in 0..rng.gen_range(0..4) {
        let value = if rng.gen_bool(0.2) {
            String::new()
        } else {
            word(rng, TEXT_CHARS, 6)
        };
        m.attrs.push((format!("k{i}"), value));
    }
    m
}

/// A normalized tree list: no empty text, no adjacent text siblings.
pub fn random_body(rng: &mut impl Rng, depth: usize, fanout: usize) -> Vec<Tree> {
    let n = rng.gen_range(0..=fanout);
    let mut body: Vec<Tree> = Vec::with_capacity(n);
    for _ in 0..n {
        let last_is_text = matches!(body.last(), Some(Tree::Text(_)));
        if depth == 0 || (!last_is_text && rng.gen_bool(0.4)) {
            if last_is_text {
                continue;
            }
            body.push(Tree::Text(word(rng, TEXT_CHARS, 8)));
        } else {
            let m = markup(rng);
            body.push(Tree::Elem(m, random_body(rng, depth - 1, fanout)));
        }
    }
    body
}

pub fn random_doc(rng: &mut impl Rng, depth: usize, blocks: &mut usize) -> Doc {
    let n = rng.gen_range(1..=4);
    let mut body = Vec::new();
    for _ in 0..n {
        let roll = rng.gen_range(0..10);
        if roll < 3 && depth > 0 && *blocks < 11 {
            *blocks += 1;
            body.push(random_doc(rng, depth - 1, blocks));
        } else if roll < 6 {
            body.push(Doc::brk(rng.gen_range(0..=2)));
        } else {
            body.push(Doc::text(word(rng, &['a', 'b', 'c', '+', '('], 9)));
        }
    }
    Doc::block(rng.gen_range(0..=4), body)
}
