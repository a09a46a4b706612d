//! Text edits and offset mapping through edit lists.

use thiserror::Error;

use crate::markup::TextRange;

/// A single change, in character offsets of the text it applies to.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TextEdit {
    Insert { offset: usize, text: String },
    Remove { offset: usize, length: usize },
}

impl TextEdit {
    pub fn insert(offset: usize, text: impl Into<String>) -> Self {
        TextEdit::Insert {
            offset,
            text: text.into(),
        }
    }

    pub fn remove(offset: usize, length: usize) -> Self {
        TextEdit::Remove { offset, length }
    }

    fn check(&self, len: usize, index: usize) -> Result<(), EditError> {
        if let TextEdit::Insert { text, .. } = self {
            if crate::markup::has_control(text) {
                return Err(EditError::ControlChar { index });
            }
        }
        let ok = match self {
            TextEdit::Insert { offset, .. } => *offset <= len,
            TextEdit::Remove { offset, length } => {
                *length > 0 && offset.checked_add(*length).is_some_and(|end| end <= len)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(EditError::OutOfBounds {
                index,
                edit: self.clone(),
                len,
            })
        }
    }

    /// Change in text length caused by this edit.
    pub fn delta(&self) -> isize {
        match self {
            TextEdit::Insert { text, .. } => text.chars().count() as isize,
            TextEdit::Remove { length, .. } => -(*length as isize),
        }
    }

    fn convert(&self, offset: usize) -> usize {
        match self {
            TextEdit::Insert { offset: at, text } => {
                if offset >= *at {
                    offset + text.chars().count()
                } else {
                    offset
                }
            }
            TextEdit::Remove { offset: at, length } => {
                if offset >= at + length {
                    offset - length
                } else if offset >= *at {
                    *at
                } else {
                    offset
                }
            }
        }
    }

    fn revert(&self, offset: usize) -> usize {
        match self {
            TextEdit::Insert { offset: at, text } => TextEdit::Remove {
                offset: *at,
                length: text.chars().count(),
            }
            .convert(offset),
            TextEdit::Remove { offset: at, length } => {
                if offset >= *at {
                    offset + length
                } else {
                    offset
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("edit #{index} {edit:?} out of bounds for text of length {len}")]
    OutOfBounds {
        index: usize,
        edit: TextEdit,
        len: usize,
    },
    #[error("edit #{index} inserts a reserved control character")]
    ControlChar { index: usize },
}

fn byte_index(text: &str, char_offset: usize) -> usize {
    text.char_indices()
        .nth(char_offset)
        .map_or(text.len(), |(b, _)| b)
}

/// Applies edits left to right; on error the input is left as it was.
pub fn apply_edits(text: &str, edits: &[TextEdit]) -> Result<String, EditError> {
    let mut out = text.to_string();
    let mut len = out.chars().count();
    for (index, edit) in edits.iter().enumerate() {
        edit.check(len, index)?;
        match edit {
            TextEdit::Insert { offset, text } => {
                let at = byte_index(&out, *offset);
                out.insert_str(at, text);
            }
            TextEdit::Remove { offset, length } => {
                let from = byte_index(&out, *offset);
                let to = byte_index(&out, offset + length);
                out.replace_range(from..to, "");
            }
        }
        len = (len as isize + edit.delta()) as usize;
    }
    Ok(out)
}

/// Maps an offset of the old text forward through `edits`.
pub fn convert(offset: usize, edits: &[TextEdit]) -> usize {
    edits.iter().fold(offset, |o, e| e.convert(o))
}

/// Maps an offset of the new text backward through `edits`.
pub fn revert(offset: usize, edits: &[TextEdit]) -> usize {
    edits.iter().rev().fold(offset, |o, e| e.revert(o))
}

pub fn convert_range(range: TextRange, edits: &[TextEdit]) -> TextRange {
    TextRange::new(convert(range.start, edits), convert(range.stop, edits))
}

pub fn revert_range(range: TextRange, edits: &[TextEdit]) -> TextRange {
    TextRange::new(revert(range.start, edits), revert(range.stop, edits))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_examples() {
        assert_eq!(apply_edits("abc", &[TextEdit::insert(1, "XY")]).unwrap(), "aXYbc");
        assert_eq!(apply_edits("abc", &[TextEdit::remove(0, 3)]).unwrap(), "");
        assert_eq!(
            apply_edits("abc", &[TextEdit::insert(3, "d"), TextEdit::remove(0, 1)]).unwrap(),
            "bcd"
        );
        assert_eq!(apply_edits("λx", &[TextEdit::insert(1, "é")]).unwrap(), "λéx");
    }

    #[test]
    fn apply_rejects_out_of_bounds() {
        let err = apply_edits("abc", &[TextEdit::insert(1, "x"), TextEdit::remove(2, 3)]);
        assert!(matches!(err, Err(EditError::OutOfBounds { index: 1, len: 4, .. })));
        assert!(apply_edits("abc", &[TextEdit::insert(4, "x")]).is_err());
        assert!(apply_edits("abc", &[TextEdit::remove(0, 0)]).is_err());
        assert!(apply_edits("abc", &[TextEdit::remove(usize::MAX, 2)]).is_err());
        assert_eq!(
            apply_edits("abc", &[TextEdit::insert(0, "\u{5}")]),
            Err(EditError::ControlChar { index: 0 })
        );
    }

    #[test]
    fn convert_examples() {
        let e = [TextEdit::insert(2, "ab")];
        assert_eq!(convert(5, &e), 7);
        assert_eq!(convert(1, &e), 1);
        assert_eq!(convert(2, &e), 4);
        let r = [TextEdit::remove(2, 3)];
        assert_eq!(convert(3, &r), 2);
        assert_eq!(convert(6, &r), 3);
        assert_eq!(revert(3, &r), 6);
        assert_eq!(revert(7, &e), 5);
        assert_eq!(revert(3, &e), 2);
    }
}
