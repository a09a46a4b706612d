//! Keywords and lexer of the notepad calculus.
//!
//! Both sides need the same token boundaries: the document model splits text
//! into command spans at keywords, and the checker classifies tokens for
//! highlighting and parses expressions. Offsets are character offsets.

use std::fmt;

use crate::markup::TextRange;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Notepad,
    Begin,
    End,
    Let,
    Have,
    Also,
    Finally,
    Print,
}

impl Keyword {
    pub const ALL: [Keyword; 8] = [
        Keyword::Notepad,
        Keyword::Begin,
        Keyword::End,
        Keyword::Let,
        Keyword::Have,
        Keyword::Also,
        Keyword::Finally,
        Keyword::Print,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Notepad => "notepad",
            Keyword::Begin => "begin",
            Keyword::End => "end",
            Keyword::Let => "let",
            Keyword::Have => "have",
            Keyword::Also => "also",
            Keyword::Finally => "finally",
            Keyword::Print => "print",
        }
    }

    pub fn parse(word: &str) -> Option<Keyword> {
        Keyword::ALL.into_iter().find(|k| k.as_str() == word)
    }
}

impl fmt::Display for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident,
    Literal,
    Operator,
    Delimiter,
    /// A complete `"..."` string literal.
    String,
    /// Unknown characters and unterminated strings.
    Bad,
}

impl TokenKind {
    /// Markup name used when reporting the token class.
    pub fn markup_name(self) -> &'static str {
        match self {
            TokenKind::Keyword(_) => "keyword",
            TokenKind::Ident => "ident",
            TokenKind::Literal => "literal",
            TokenKind::Operator => "operator",
            TokenKind::Delimiter => "delimiter",
            TokenKind::String => "string",
            TokenKind::Bad => "bad",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub range: TextRange,
    pub text: String,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

/// Splits `source` into tokens; whitespace is skipped, nothing fails.
///
/// `keywords` controls whether command keywords are recognised; inside a
/// quoted proposition they are ordinary identifiers.
pub fn lex(source: &str, keywords: bool) -> Vec<Token> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let kind = if c.is_whitespace() {
            i += 1;
            continue;
        } else if is_ident_start(c) {
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            match Keyword::parse(&word).filter(|_| keywords) {
                Some(k) => TokenKind::Keyword(k),
                None => TokenKind::Ident,
            }
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            TokenKind::Literal
        } else if c == '"' {
            i += 1;
            while i < chars.len() && chars[i] != '"' {
                i += 1;
            }
            if i < chars.len() {
                i += 1;
                TokenKind::String
            } else {
                TokenKind::Bad
            }
        } else if chars[i..].starts_with(&['.', '.', '.']) {
            i += 3;
            TokenKind::Operator
        } else {
            i += 1;
            match c {
                '=' | '+' | '*' => TokenKind::Operator,
                '(' | ')' => TokenKind::Delimiter,
                _ => TokenKind::Bad,
            }
        };
        tokens.push(Token {
            kind,
            range: TextRange::new(start, i),
            text: chars[start..i].iter().collect(),
        });
    }
    tokens
}
