//! Character-identity tracking for edit lists.
//!
//! Every character of the original string gets an identity; applying edits
//! moves identities around, so the fate of an offset can be read off
//! directly instead of computed arithmetically.

use pide_core::document::TextEdit;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Original(usize),
    Inserted,
}

pub fn track(len: usize, edits: &[TextEdit]) -> Vec<Cell> {
    let mut cells: Vec<Cell> = (0..len).map(Cell::Original).collect();
    for e in edits {
        match e {
            TextEdit::Insert { offset, text } => {
                let n = text.chars().count();
                cells.splice(*offset..*offset, std::iter::repeat(Cell::Inserted).take(n));
            }
            TextEdit::Remove { offset, length } => {
                cells.drain(*offset..*offset + *length);
            }
        }
    }
    cells
}

/// Original offsets whose character survives the edits, with new positions.
pub fn survivors(len: usize, edits: &[TextEdit]) -> Vec<(usize, usize)> {
    track(len, edits)
        .iter()
        .enumerate()
        .filter_map(|(new, c)| match c {
            Cell::Original(old) => Some((*old, new)),
            Cell::Inserted => None,
        })
        .collect()
}

/// Random valid edit list against a string of `len` characters.
pub fn random_edits(rng: &mut impl rand::Rng, mut len: usize, max: usize) -> Vec<TextEdit> {
    let n = rng.gen_range(0..=max);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        if len > 0 && rng.gen_bool(0.45) {
            let offset = rng.gen_range(0..len);
            let length = rng.gen_range(1..=(len - offset).min(6));
            len -= length;
            out.push(TextEdit::Remove { offset, length });
        } else {
            let offset = rng.gen_range(0..=len);
            let k = rng.gen_range(1..=4);
            let text: String = (0..k).map(|i| (b'A' + i as u8) as char).collect();
            len += k;
            out.push(TextEdit::Insert { offset, text });
        }
    }
    out
}
