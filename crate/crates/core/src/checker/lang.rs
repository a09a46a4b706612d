//! Abstract syntax and parser of the notepad calculus.
//!
//! ```text
//! command := "let" ident "=" expr | "have" '"' prop '"' | "also" | "finally"
//!          | "print" expr | "notepad" | "begin" | "end"
//! prop    := (expr | "...") "=" expr
//! expr    := term ("+" term)*
//! term    := factor ("*" factor)*
//! factor  := literal | ident | "fib" "(" expr ")" | "(" expr ")"
//! ```
//!
//! Ranges are character offsets relative to the command span.

use num_bigint::BigInt;

use crate::markup::TextRange;
use crate::syntax::{lex, Keyword, Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Mul,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Mul => "*",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Add => 1,
            BinOp::Mul => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Num(BigInt, TextRange),
    Var(String, TextRange),
    /// `...`, the right-hand side of the previous fact.
    Prev(TextRange),
    Bin {
        op: BinOp,
        op_range: TextRange,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Fib {
        name_range: TextRange,
        arg: Box<Expr>,
        range: TextRange,
    },
    Paren(Box<Expr>, TextRange),
}

impl Expr {
    pub fn range(&self) -> TextRange {
        match self {
            Expr::Num(_, r) | Expr::Var(_, r) | Expr::Prev(r) | Expr::Paren(_, r) => *r,
            Expr::Fib { range, .. } => *range,
            Expr::Bin { lhs, rhs, .. } => TextRange::new(lhs.range().start, rhs.range().stop),
        }
    }

    /// Visits every node, parents first.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Bin { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            Expr::Fib { arg, .. } | Expr::Paren(arg, _) => arg.walk(f),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NotepadCommand {
    Notepad,
    Begin,
    End,
    Let {
        name: String,
        name_range: TextRange,
        expr: Expr,
    },
    Have {
        lhs: Expr,
        rhs: Expr,
        /// The quoted proposition, quotes included.
        range: TextRange,
    },
    Also,
    Finally,
    Print(Expr),
    /// Text that does not parse; `range` is the offending part.
    Malformed {
        message: String,
        range: TextRange,
    },
    /// Whitespace before the first command of a node.
    Blank,
}

impl NotepadCommand {
    pub fn is_malformed(&self) -> bool {
        matches!(self, NotepadCommand::Malformed { .. })
    }
}

type ParseResult<T> = Result<T, (String, TextRange)>;

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    /// Where "end of input" errors point.
    end: TextRange,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn error<T>(&self, what: &str) -> ParseResult<T> {
        match self.peek() {
            Some(t) => Err((format!("expected {what}, found {:?}", t.text), t.range)),
            None => Err((format!("expected {what}"), self.end)),
        }
    }

    fn is_op(&self, op: &str) -> bool {
        self.peek()
            .is_some_and(|t| t.kind == TokenKind::Operator && t.text == op)
    }

    fn expect(&mut self, kind: TokenKind, text: &str) -> ParseResult<&'a Token> {
        match self.peek() {
            Some(t) if t.kind == kind && t.text == text => {
                self.pos += 1;
                Ok(t)
            }
            _ => self.error(&format!("{text:?}")),
        }
    }

    fn expr(&mut self) -> ParseResult<Expr> {
        let mut lhs = self.term()?;
        while self.is_op("+") {
            let op_range = self.next().expect("peeked").range;
            let rhs = self.term()?;
            lhs = Expr::Bin {
                op: BinOp::Add,
                op_range,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> ParseResult<Expr> {
        let mut lhs = self.factor()?;
        while self.is_op("*") {
            let op_range = self.next().expect("peeked").range;
            let rhs = self.factor()?;
            lhs = Expr::Bin {
                op: BinOp::Mul,
                op_range,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> ParseResult<Expr> {
        let Some(t) = self.peek() else {
            return self.error("an expression");
        };
        match t.kind {
            TokenKind::Literal => {
                self.pos += 1;
                let n = t.text.parse().expect("literal tokens are digit strings");
                Ok(Expr::Num(n, t.range))
            }
            TokenKind::Ident if t.text == "fib" => {
                self.pos += 1;
                self.expect(TokenKind::Delimiter, "(")?;
                let arg = self.expr()?;
                let close = self.expect(TokenKind::Delimiter, ")")?;
                Ok(Expr::Fib {
                    name_range: t.range,
                    arg: Box::new(arg),
                    range: TextRange::new(t.range.start, close.range.stop),
                })
            }
            TokenKind::Ident => {
                self.pos += 1;
                Ok(Expr::Var(t.text.clone(), t.range))
            }
            TokenKind::Delimiter if t.text == "(" => {
                self.pos += 1;
                let inner = self.expr()?;
                let close = self.expect(TokenKind::Delimiter, ")")?;
                Ok(Expr::Paren(
                    Box::new(inner),
                    TextRange::new(t.range.start, close.range.stop),
                ))
            }
            _ => self.error("an expression"),
        }
    }

    fn finish(&self) -> ParseResult<()> {
        match self.peek() {
            None => Ok(()),
            Some(_) => self.error("end of command"),
        }
    }
}

/// Parses the proposition inside a `have` string token.
fn proposition(token: &Token) -> ParseResult<(Expr, Expr)> {
    let inner: String = token.text.chars().skip(1).take(token.range.len() - 2).collect();
    let shift = token.range.start + 1;
    let tokens: Vec<Token> = lex(&inner, false)
        .into_iter()
        .map(|t| Token {
            range: t.range.shift(shift),
            ..t
        })
        .collect();
    let mut p = Parser {
        tokens: &tokens,
        pos: 0,
        end: TextRange::new(token.range.stop - 1, token.range.stop),
    };
    let lhs = if p.is_op("...") {
        Expr::Prev(p.next().expect("peeked").range)
    } else {
        p.expr()?
    };
    p.expect(TokenKind::Operator, "=")?;
    let rhs = p.expr()?;
    p.finish()?;
    Ok((lhs, rhs))
}

fn parse_tokens(tokens: &[Token], len: usize) -> ParseResult<NotepadCommand> {
    let end = TextRange::new(len, len);
    let mut p = Parser { tokens, pos: 0, end };
    let Some(first) = p.next() else {
        return Ok(NotepadCommand::Blank);
    };
    let TokenKind::Keyword(keyword) = first.kind else {
        return Err(("expected a command keyword".into(), first.range));
    };
    let cmd = match keyword {
        Keyword::Notepad => NotepadCommand::Notepad,
        Keyword::Begin => NotepadCommand::Begin,
        Keyword::End => NotepadCommand::End,
        Keyword::Also => NotepadCommand::Also,
        Keyword::Finally => NotepadCommand::Finally,
        Keyword::Print => NotepadCommand::Print(p.expr()?),
        Keyword::Let => {
            let name = match p.next() {
                Some(t) if t.kind == TokenKind::Ident && t.text != "fib" => t,
                _ => {
                    p.pos -= 1;
                    return p.error("a name");
                }
            };
            p.expect(TokenKind::Operator, "=")?;
            NotepadCommand::Let {
                name: name.text.clone(),
                name_range: name.range,
                expr: p.expr()?,
            }
        }
        Keyword::Have => match p.next() {
            Some(t) if t.kind == TokenKind::String => {
                let (lhs, rhs) = proposition(t)?;
                NotepadCommand::Have {
                    lhs,
                    rhs,
                    range: t.range,
                }
            }
            _ => {
                p.pos -= 1;
                return p.error("a quoted proposition");
            }
        },
    };
    p.finish()?;
    Ok(cmd)
}

/// Parses one command span; never fails.
pub fn parse_command(source: &str) -> (NotepadCommand, Vec<Token>) {
    let tokens = lex(source, true);
    let len = source.chars().count();
    let cmd = parse_tokens(&tokens, len).unwrap_or_else(|(message, range)| {
        NotepadCommand::Malformed { message, range }
    });
    (cmd, tokens)
}
