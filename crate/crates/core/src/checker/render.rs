//! Markup produced by the checker: term printing, entity references and
//! highlighting reports.

use crate::markup::{Markup, PositionedMarkup, TextRange, Tree};
use crate::pretty::{block_markup, break_markup};
use crate::syntax::Token;

use super::elab::Plan;
use super::eval::Term;
use super::lang::{BinOp, Expr, NotepadCommand};

/// Pseudo-file in which the built-in operations are declared.
pub const BUILTIN_FILE: &str = "builtin/ops";

/// Text of [`BUILTIN_FILE`]; entity references point into it.
pub const BUILTIN_SOURCE: &str = "\
infixl 65 plus (\"+\")
infixl 70 times (\"*\")
fun fib
";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Plus,
    Times,
    Fib,
}

impl Builtin {
    fn of(op: BinOp) -> Builtin {
        match op {
            BinOp::Add => Builtin::Plus,
            BinOp::Mul => Builtin::Times,
        }
    }

    fn ident(self) -> &'static str {
        match self {
            Builtin::Plus => "plus",
            Builtin::Times => "times",
            Builtin::Fib => "fib",
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Builtin::Plus => "+",
            Builtin::Times => "*",
            Builtin::Fib => "fib",
        }
    }

    fn serial(self) -> u32 {
        self as u32 + 1
    }

    /// Entity markup referring to the declaration in [`BUILTIN_FILE`].
    ///
    /// Definition offsets follow the external convention: 1-based start,
    /// inclusive end.
    pub fn entity(self) -> Markup {
        let (line_no, line) = BUILTIN_SOURCE
            .lines()
            .enumerate()
            .find(|(_, l)| l.split_whitespace().any(|w| w == self.ident()))
            .expect("every builtin is declared");
        let line_start: usize = BUILTIN_SOURCE
            .lines()
            .take(line_no)
            .map(|l| l.chars().count() + 1)
            .sum();
        let column = line.find(self.ident()).expect("declared on this line");
        let start = line_start + line[..column].chars().count();
        Markup::new("entity")
            .with_attr("ref", self.serial())
            .with_attr("def_line", line_no + 1)
            .with_attr("def_offset", start + 1)
            .with_attr("def_end_offset", start + self.ident().len())
            .with_attr("def_file", BUILTIN_FILE)
            .with_attr("name", format!("ops.{}", self.ident()))
            .with_attr("kind", "constant")
    }
}

fn block(body: Vec<Tree>) -> Tree {
    Tree::elem(block_markup(0), body)
}

fn brk() -> Tree {
    Tree::elem(break_markup(1), vec![Tree::text(" ")])
}

fn entity(b: Builtin) -> Tree {
    Tree::elem(b.entity(), vec![block(vec![Tree::text(b.symbol())])])
}

/// Pretty-printing markup of `t`, highlighting variables that `is_free`.
fn term_doc(t: &Term, outer: u8, is_free: &dyn Fn(&str) -> bool) -> Tree {
    match t {
        Term::Num(n) => Tree::text(n.to_string()),
        Term::Var(v) if is_free(v) => Tree::elem(
            Markup::new("hilite"),
            vec![block(vec![Tree::elem(
                Markup::new("free"),
                vec![block(vec![Tree::text(v.clone())])],
            )])],
        ),
        Term::Var(v) => Tree::text(v.clone()),
        Term::Fib(a) => block(vec![
            entity(Builtin::Fib),
            Tree::text("("),
            term_doc(a, 0, is_free),
            Tree::text(")"),
        ]),
        Term::Bin(op, a, b) => {
            let p = op.precedence();
            let mut body = vec![
                term_doc(a, p, is_free),
                Tree::text(" "),
                entity(Builtin::of(*op)),
                brk(),
                term_doc(b, p + 1, is_free),
            ];
            if p < outer {
                body.insert(0, Tree::text("("));
                body.push(Tree::text(")"));
            }
            block(body)
        }
    }
}

/// The `term` element of a message: the term as a pretty-printing document
/// with semantic markup on variables and operators.
pub fn term_tree(t: &Term, is_free: &dyn Fn(&str) -> bool) -> Tree {
    Tree::elem(Markup::new("term"), vec![block(vec![term_doc(t, 0, is_free)])])
}

/// Body of the warning about a term with unbound variables.
pub fn unbound_warning(t: &Term, is_free: &dyn Fn(&str) -> bool, range: TextRange, exec: u64) -> Vec<Tree> {
    vec![
        Tree::text("Term: "),
        term_tree(t, is_free),
        Tree::elem(
            Markup::new("position")
                .with_attr("offset", range.start)
                .with_attr("end_offset", range.stop)
                .with_attr("id", exec),
            Vec::new(),
        ),
    ]
}

fn expressions(cmd: &NotepadCommand) -> Vec<&Expr> {
    match cmd {
        NotepadCommand::Let { expr, .. } | NotepadCommand::Print(expr) => vec![expr],
        NotepadCommand::Have { lhs, rhs, .. } => vec![lhs, rhs],
        _ => Vec::new(),
    }
}

/// Highlighting of one command: a class for every token, `free` on unbound
/// variables and `entity` on built-in operations.
pub fn report(tokens: &[Token], cmd: &NotepadCommand, plan: &Plan) -> Vec<PositionedMarkup> {
    let mut out: Vec<PositionedMarkup> = tokens
        .iter()
        .map(|t| PositionedMarkup::new(t.range, Markup::new(t.kind.markup_name())))
        .collect();
    for e in expressions(cmd) {
        e.walk(&mut |e| match e {
            Expr::Var(v, r) if !plan.is_bound(v) => {
                out.push(PositionedMarkup::new(*r, Markup::new("free")));
            }
            Expr::Bin { op, op_range, .. } => {
                out.push(PositionedMarkup::new(*op_range, Builtin::of(*op).entity()));
            }
            Expr::Fib { name_range, .. } => {
                out.push(PositionedMarkup::new(*name_range, Builtin::Fib.entity()));
            }
            _ => {}
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markup::text_content;

    #[test]
    fn entity_points_at_declaration() {
        let e = Builtin::Plus.entity();
        let start: usize = e.attr("def_offset").unwrap().parse().unwrap();
        let stop: usize = e.attr("def_end_offset").unwrap().parse().unwrap();
        let declared: String = BUILTIN_SOURCE.chars().skip(start - 1).take(stop + 1 - start).collect();
        assert_eq!(declared, "plus");
        assert_eq!(e.attr("def_line"), Some("1"));
        let fib = Builtin::Fib.entity();
        assert_eq!(fib.attr("def_line"), Some("3"));
        assert_eq!(fib.attr("name"), Some("ops.fib"));
    }

    #[test]
    fn term_text_and_parens() {
        let t = Term::Bin(
            BinOp::Mul,
            Box::new(Term::Bin(
                BinOp::Add,
                Box::new(Term::Var("x".into())),
                Box::new(Term::Num(1.into())),
            )),
            Box::new(Term::Fib(Box::new(Term::Var("y".into())))),
        );
        let tree = term_tree(&t, &|v| v == "x");
        assert_eq!(text_content(&tree), "(x + 1) * fib(y)");
        let free: Vec<_> = tree
            .elements()
            .into_iter()
            .filter(|e| e.markup().unwrap().name == "free")
            .collect();
        assert_eq!(free.len(), 1);
    }
}
