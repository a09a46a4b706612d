//! Plain XML text rendering of markup trees, plus a small reader for it.
//!
//! Only elements, attributes in double quotes, text and the five standard
//! character escapes are supported.

use thiserror::Error;

use super::{normalize, Markup, Tree};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum XmlError {
    #[error("unexpected end of input at byte {0}")]
    Eof(usize),
    #[error("unexpected {found:?} at byte {pos}")]
    Unexpected { pos: usize, found: char },
    #[error("closing tag </{found}> does not match <{expected}> at byte {pos}")]
    Mismatch {
        pos: usize,
        expected: String,
        found: String,
    },
    #[error("unknown entity &{0};")]
    Entity(String),
}

pub fn to_xml(body: &[Tree]) -> String {
    let mut out = String::new();
    body.iter().for_each(|t| write_tree(t, &mut out));
    out
}

fn write_tree(t: &Tree, out: &mut String) {
    match t {
        Tree::Text(s) => escape_into(s, out),
        Tree::Elem(m, body) => {
            out.push('<');
            out.push_str(&m.name);
            for (k, v) in &m.attrs {
                out.push(' ');
                out.push_str(k);
                out.push_str("=\"");
                escape_into(v, out);
                out.push('"');
            }
            if body.is_empty() {
                out.push_str("/>");
            } else {
                out.push('>');
                body.iter().for_each(|c| write_tree(c, out));
                out.push_str("</");
                out.push_str(&m.name);
                out.push('>');
            }
        }
    }
}

fn escape_into(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
}

/// Reads a sequence of trees; adjacent text is merged and empty text dropped.
pub fn parse_xml(input: &str) -> Result<Vec<Tree>, XmlError> {
    let mut p = Reader { src: input, pos: 0 };
    let body = p.content(None)?;
    Ok(normalize(body))
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

impl Reader<'_> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Result<char, XmlError> {
        let c = self.peek().ok_or(XmlError::Eof(self.pos))?;
        self.pos += c.len_utf8();
        Ok(c)
    }

    fn expect(&mut self, want: char) -> Result<(), XmlError> {
        let pos = self.pos;
        match self.bump()? {
            c if c == want => Ok(()),
            found => Err(XmlError::Unexpected { pos, found }),
        }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn name(&mut self) -> Result<String, XmlError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || matches!(c, '=' | '>' | '/' | '<' | '"') {
                break;
            }
            self.pos += c.len_utf8();
        }
        if self.pos == start {
            return match self.peek() {
                Some(found) => Err(XmlError::Unexpected {
                    pos: self.pos,
                    found,
                }),
                None => Err(XmlError::Eof(self.pos)),
            };
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn content(&mut self, open: Option<&str>) -> Result<Vec<Tree>, XmlError> {
        let mut body = Vec::new();
        let mut text = String::new();
        loop {
            match self.peek() {
                None => {
                    return match open {
                        None => {
                            flush(&mut text, &mut body);
                            Ok(body)
                        }
                        Some(_) => Err(XmlError::Eof(self.pos)),
                    }
                }
                Some('<') => {
                    flush(&mut text, &mut body);
                    if self.src[self.pos..].starts_with("</") {
                        let pos = self.pos;
                        self.pos += 2;
                        let name = self.name()?;
                        self.skip_ws();
                        self.expect('>')?;
                        return match open {
                            Some(expected) if expected == name => Ok(body),
                            Some(expected) => Err(XmlError::Mismatch {
                                pos,
                                expected: expected.to_string(),
                                found: name,
                            }),
                            None => Err(XmlError::Unexpected { pos, found: '/' }),
                        };
                    }
                    body.push(self.element()?);
                }
                Some('&') => text.push(self.entity()?),
                Some(_) => text.push(self.bump()?),
            }
        }
    }

    fn element(&mut self) -> Result<Tree, XmlError> {
        self.expect('<')?;
        let mut markup = Markup::new(self.name()?);
        loop {
            self.skip_ws();
            match self.peek() {
                Some('/') => {
                    self.pos += 1;
                    self.expect('>')?;
                    return Ok(Tree::Elem(markup, Vec::new()));
                }
                Some('>') => {
                    self.pos += 1;
                    let body = self.content(Some(&markup.name.clone()))?;
                    return Ok(Tree::Elem(markup, body));
                }
                Some(_) => {
                    let key = self.name()?;
                    self.skip_ws();
                    self.expect('=')?;
                    self.skip_ws();
                    self.expect('"')?;
                    let mut value = String::new();
                    loop {
                        match self.peek() {
                            Some('"') => {
                                self.pos += 1;
                                break;
                            }
                            Some('&') => value.push(self.entity()?),
                            Some(_) => value.push(self.bump()?),
                            None => return Err(XmlError::Eof(self.pos)),
                        }
                    }
                    markup.attrs.push((key, value));
                }
                None => return Err(XmlError::Eof(self.pos)),
            }
        }
    }

    fn entity(&mut self) -> Result<char, XmlError> {
        self.expect('&')?;
        let rest = &self.src[self.pos..];
        let end = rest.find(';').ok_or(XmlError::Eof(self.src.len()))?;
        let name = &rest[..end];
        let c = match name {
            "amp" => '&',
            "lt" => '<',
            "gt" => '>',
            "quot" => '"',
            "apos" => '\'',
            other => return Err(XmlError::Entity(other.to_string())),
        };
        self.pos += end + 1;
        Ok(c)
    }
}

fn flush(text: &mut String, body: &mut Vec<Tree>) {
    if !text.is_empty() {
        body.push(Tree::Text(std::mem::take(text)));
    }
}
