//! YXML: markup trees embedded in text with two reserved control bytes.
//!
//! ```text
//! Text          ->  bytes verbatim
//! Elem(n, a, b) ->  X Y n (Y k=v)* X  encode(b)  X Y X
//! ```
//!
//! with `X = 0x05` and `Y = 0x06`. The format is the payload of every
//! protocol chunk and must stay byte-identical.

use thiserror::Error;

use crate::markup::{has_control, Markup, Tree, X, Y};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum YxmlError {
    #[error("control character in {0:?}")]
    ControlChar(String),
    #[error("empty element name")]
    EmptyName,
    #[error("attribute key {0:?} is empty or contains '='")]
    BadKey(String),
    #[error("unbalanced close at byte {0}")]
    UnbalancedClose(usize),
    #[error("unclosed element opened at byte {0}")]
    Unclosed(usize),
    #[error("unterminated markup chunk at byte {0}")]
    UnterminatedChunk(usize),
    #[error("markup chunk without Y marker at byte {0}")]
    MissingY(usize),
    #[error("empty element name at byte {0}")]
    EmptyNameAt(usize),
    #[error("attribute without '=' at byte {0}")]
    MissingEquals(usize),
    #[error("stray Y marker at byte {0}")]
    StrayY(usize),
    #[error("invalid UTF-8 at byte {0}")]
    Utf8(usize),
}

pub fn encode(body: &[Tree]) -> Result<Vec<u8>, YxmlError> {
    let mut out = Vec::new();
    encode_into(body, &mut out)?;
    Ok(out)
}

pub fn encode_tree(tree: &Tree) -> Result<Vec<u8>, YxmlError> {
    encode(std::slice::from_ref(tree))
}

pub fn encode_into(body: &[Tree], out: &mut Vec<u8>) -> Result<(), YxmlError> {
    for tree in body {
        match tree {
            Tree::Text(s) => {
                check(s)?;
                out.extend_from_slice(s.as_bytes());
            }
            Tree::Elem(m, children) => {
                if m.name.is_empty() {
                    return Err(YxmlError::EmptyName);
                }
                check(&m.name)?;
                out.extend_from_slice(&[X, Y]);
                out.extend_from_slice(m.name.as_bytes());
                for (k, v) in &m.attrs {
                    if k.is_empty() || k.contains('=') {
                        return Err(YxmlError::BadKey(k.clone()));
                    }
                    check(k)?;
                    check(v)?;
                    out.push(Y);
                    out.extend_from_slice(k.as_bytes());
                    out.push(b'=');
                    out.extend_from_slice(v.as_bytes());
                }
                out.push(X);
                encode_into(children, out)?;
                out.extend_from_slice(&[X, Y, X]);
            }
        }
    }
    Ok(())
}

fn check(s: &str) -> Result<(), YxmlError> {
    if has_control(s) {
        Err(YxmlError::ControlChar(s.to_string()))
    } else {
        Ok(())
    }
}

fn utf8(bytes: &[u8], at: usize) -> Result<String, YxmlError> {
    std::str::from_utf8(bytes)
        .map(str::to_string)
        .map_err(|e| YxmlError::Utf8(at + e.valid_up_to()))
}

struct Open {
    markup: Markup,
    body: Vec<Tree>,
    at: usize,
}

/// Parses a byte sequence into normalized trees (no empty or adjacent text).
pub fn parse(bytes: &[u8]) -> Result<Vec<Tree>, YxmlError> {
    let mut stack: Vec<Open> = Vec::new();
    let mut top: Vec<Tree> = Vec::new();
    let mut i = 0;

    fn current<'a>(stack: &'a mut [Open], top: &'a mut Vec<Tree>) -> &'a mut Vec<Tree> {
        match stack.last_mut() {
            Some(open) => &mut open.body,
            None => top,
        }
    }

    while i < bytes.len() {
        if bytes[i] == X {
            let end = bytes[i + 1..]
                .iter()
                .position(|&b| b == X)
                .map(|p| i + 1 + p)
                .ok_or(YxmlError::UnterminatedChunk(i))?;
            let chunk = &bytes[i + 1..end];
            if chunk.first() != Some(&Y) {
                return Err(YxmlError::MissingY(i));
            }
            if chunk.len() == 1 {
                let open = stack.pop().ok_or(YxmlError::UnbalancedClose(i))?;
                let elem = Tree::Elem(open.markup, open.body);
                current(&mut stack, &mut top).push(elem);
            } else {
                let mut parts = chunk[1..].split(|&b| b == Y);
                let name = parts.next().unwrap_or_default();
                if name.is_empty() {
                    return Err(YxmlError::EmptyNameAt(i));
                }
                let mut markup = Markup::new(utf8(name, i + 2)?);
                for part in parts {
                    let eq = part
                        .iter()
                        .position(|&b| b == b'=')
                        .filter(|&p| p > 0)
                        .ok_or(YxmlError::MissingEquals(i))?;
                    markup
                        .attrs
                        .push((utf8(&part[..eq], i)?, utf8(&part[eq + 1..], i)?));
                }
                stack.push(Open {
                    markup,
                    body: Vec::new(),
                    at: i,
                });
            }
            i = end + 1;
        } else {
            let end = bytes[i..]
                .iter()
                .position(|&b| b == X)
                .map_or(bytes.len(), |p| i + p);
            let chunk = &bytes[i..end];
            if let Some(p) = chunk.iter().position(|&b| b == Y) {
                return Err(YxmlError::StrayY(i + p));
            }
            let text = utf8(chunk, i)?;
            let body = current(&mut stack, &mut top);
            match body.last_mut() {
                Some(Tree::Text(prev)) => prev.push_str(&text),
                _ => body.push(Tree::Text(text)),
            }
            i = end;
        }
    }
    match stack.pop() {
        Some(open) => Err(YxmlError::Unclosed(open.at)),
        None => Ok(top),
    }
}

/// Exact encoded size, computed structurally without encoding.
pub fn encoded_len(body: &[Tree]) -> usize {
    body.iter()
        .map(|t| match t {
            Tree::Text(s) => s.len(),
            Tree::Elem(m, b) => {
                // X Y name X ... X Y X, plus Y key = value per attribute
                m.name.len()
                    + 6
                    + m.attrs
                        .iter()
                        .map(|(k, v)| k.len() + v.len() + 2)
                        .sum::<usize>()
                    + encoded_len(b)
            }
        })
        .sum()
}

/// Human-readable rendering with the control bytes spelled out.
pub fn to_visible(bytes: &[u8]) -> String {
    let s = String::from_utf8_lossy(bytes);
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\u{5}' => out.push_str("\\x05"),
            '\u{6}' => out.push_str("\\x06"),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_text() {
        assert_eq!(encode(&[]).unwrap(), b"");
        assert_eq!(encode(&[Tree::text("abc")]).unwrap(), b"abc");
        assert_eq!(parse(b"abc").unwrap(), vec![Tree::text("abc")]);
        assert_eq!(parse(b"").unwrap(), vec![]);
    }

    #[test]
    fn warning_element_bytes() {
        let t = Tree::elem(
            Markup::new("warning").with_attr("serial", "553408"),
            vec![Tree::text("Term:")],
        );
        let mut want = vec![X, Y];
        want.extend_from_slice(b"warning");
        want.push(Y);
        want.extend_from_slice(b"serial=553408");
        want.push(X);
        want.extend_from_slice(b"Term:");
        want.extend_from_slice(&[X, Y, X]);
        assert_eq!(encode_tree(&t).unwrap(), want);
        assert_eq!(parse(&want).unwrap(), vec![t]);
    }

    #[test]
    fn empty_body_is_immediate_close() {
        let t = Tree::elem(Markup::new("a"), vec![]);
        assert_eq!(encode_tree(&t).unwrap(), vec![X, Y, b'a', X, X, Y, X]);
    }

    #[test]
    fn attribute_splits_at_first_equals() {
        let bytes = [&[X, Y][..], b"e", &[Y], b"k=a=b", &[X, X, Y, X]].concat();
        let trees = parse(&bytes).unwrap();
        assert_eq!(trees[0].markup().unwrap().attr("k"), Some("a=b"));
    }

    #[test]
    fn malformed_inputs() {
        assert_eq!(parse(&[X, Y, X]), Err(YxmlError::UnbalancedClose(0)));
        assert_eq!(parse(&[X, Y, X, b'a']), Err(YxmlError::UnbalancedClose(0)));
        assert_eq!(
            parse(&[b'a', b'b', X, Y, b'e', X]),
            Err(YxmlError::Unclosed(2))
        );
        assert_eq!(parse(&[X, Y, Y, X]), Err(YxmlError::EmptyNameAt(0)));
        assert_eq!(
            parse(&[X, Y, b'e', Y, b'k', X, X, Y, X]),
            Err(YxmlError::MissingEquals(0))
        );
        assert_eq!(
            parse(&[X, Y, b'e', Y, b'=', b'v', X, X, Y, X]),
            Err(YxmlError::MissingEquals(0))
        );
        assert_eq!(parse(&[X, Y, b'e']), Err(YxmlError::UnterminatedChunk(0)));
        assert_eq!(parse(&[X, b'e', X]), Err(YxmlError::MissingY(0)));
        assert_eq!(parse(&[b'a', Y]), Err(YxmlError::StrayY(1)));
        assert!(matches!(parse(&[0xff]), Err(YxmlError::Utf8(0))));
    }

    #[test]
    fn encode_rejects_control_bytes() {
        assert_eq!(
            encode(&[Tree::text("a\u{5}")]),
            Err(YxmlError::ControlChar("a\u{5}".into()))
        );
        let bad_value = Tree::elem(Markup::new("e").with_attr("k", "\u{6}"), vec![]);
        assert!(matches!(encode_tree(&bad_value), Err(YxmlError::ControlChar(_))));
        let bad_key = Tree::elem(Markup::new("e").with_attr("a=b", "v"), vec![]);
        assert!(matches!(encode_tree(&bad_key), Err(YxmlError::BadKey(_))));
        assert_eq!(
            encode_tree(&Tree::elem(Markup::new(""), vec![])),
            Err(YxmlError::EmptyName)
        );
    }

    #[test]
    fn adjacent_text_is_merged() {
        let bytes = encode(&[Tree::text("a"), Tree::text("b")]).unwrap();
        assert_eq!(parse(&bytes).unwrap(), vec![Tree::text("ab")]);
    }

    #[test]
    fn visible_rendering() {
        assert_eq!(to_visible(&[X, Y, b'a', b'\\', X]), "\\x05\\x06a\\\\\\x05");
    }
}
