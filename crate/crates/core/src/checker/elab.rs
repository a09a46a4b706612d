//! The fast sequential pass over a node.
//!
//! Elaboration threads bindings and the calculation chain through the
//! commands without evaluating anything, so that every command ends up with
//! a self-contained task. Tasks of different commands can then run in any
//! order and in parallel.

use std::sync::Arc;

use crate::markup::TextRange;

use super::eval::{Bindings, Term};
use super::lang::{Expr, NotepadCommand};

/// An equation `lhs = rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fact {
    pub lhs: Term,
    pub rhs: Term,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Task {
    Nothing,
    /// Rejected without evaluation.
    Fail {
        message: String,
        range: TextRange,
    },
    Let {
        name: String,
        value: Term,
    },
    Print(Term),
    Have(Fact),
    /// `also` continuing an existing calculation: its right-hand side must
    /// link to the left-hand side of the new fact.
    Also {
        calc: Fact,
        fact: Fact,
    },
    Finally {
        calc: Fact,
        fact: Option<Fact>,
    },
}

/// What one command executes, with the names bound when it runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub env: Arc<Bindings>,
    /// Right-hand side the `...` abbreviation stands for.
    pub prev: Option<Term>,
    pub task: Task,
}

impl Plan {
    /// Term of `e` for display: variables as written, `...` expanded.
    pub fn display(&self, e: &Expr) -> Term {
        Term::from_expr(e, self.prev.as_ref())
    }

    pub fn is_bound(&self, name: &str) -> bool {
        self.env.contains_key(name)
    }
}

#[derive(Debug, Clone, Default)]
struct Scope {
    env: Arc<Bindings>,
    /// Last fact stated since the calculation step before it.
    fact: Option<Fact>,
    calc: Option<Fact>,
    prev: Option<Term>,
}

const NO_CALCULATION: &str = "no current calculation";

/// Elaborates the commands of one node in order.
pub fn elaborate<'a>(commands: impl IntoIterator<Item = &'a NotepadCommand>) -> Vec<Plan> {
    let mut stack = vec![Scope::default()];
    let mut plans = Vec::new();
    for cmd in commands {
        let scope = stack.last().expect("scope stack is never empty").clone();
        let mut plan = Plan {
            env: Arc::clone(&scope.env),
            prev: scope.prev.clone(),
            task: Task::Nothing,
        };
        let fail = |message: &str, range| Task::Fail {
            message: message.to_string(),
            range,
        };
        let top = stack.last_mut().expect("scope stack is never empty");
        match cmd {
            NotepadCommand::Blank => {}
            NotepadCommand::Malformed { message, range } => plan.task = fail(message, *range),
            NotepadCommand::Notepad => stack = vec![Scope::default()],
            NotepadCommand::Begin => stack.push(scope),
            NotepadCommand::End => {
                if stack.len() > 1 {
                    stack.pop();
                } else {
                    plan.task = fail("end without begin", TextRange::new(0, 3));
                }
            }
            NotepadCommand::Let { name, expr, .. } => {
                let value = Term::close(expr, &top.env, None);
                Arc::make_mut(&mut top.env).insert(name.clone(), value.clone());
                plan.task = Task::Let {
                    name: name.clone(),
                    value,
                };
            }
            NotepadCommand::Print(expr) => plan.task = Task::Print(Term::close(expr, &top.env, None)),
            NotepadCommand::Have { lhs, rhs, .. } => {
                if let (Expr::Prev(range), None) = (lhs, &top.prev) {
                    plan.task = fail("no previous fact for ...", *range);
                } else {
                    let fact = Fact {
                        lhs: Term::close(lhs, &top.env, top.prev.as_ref()),
                        rhs: Term::close(rhs, &top.env, None),
                    };
                    top.prev = Some(fact.rhs.clone());
                    top.fact = Some(fact.clone());
                    plan.task = Task::Have(fact);
                }
            }
            NotepadCommand::Also => match (top.calc.take(), top.fact.take()) {
                (calc, None) => {
                    top.calc = calc;
                    plan.task = fail(NO_CALCULATION, TextRange::new(0, 4));
                }
                (None, Some(fact)) => top.calc = Some(fact),
                (Some(calc), Some(fact)) => {
                    top.calc = Some(Fact {
                        lhs: calc.lhs.clone(),
                        rhs: fact.rhs.clone(),
                    });
                    plan.task = Task::Also { calc, fact };
                }
            },
            NotepadCommand::Finally => match top.calc.take() {
                None => plan.task = fail(NO_CALCULATION, TextRange::new(0, 7)),
                Some(calc) => {
                    let fact = top.fact.take();
                    let derived = Fact {
                        lhs: calc.lhs.clone(),
                        rhs: fact.as_ref().map_or(&calc.rhs, |f| &f.rhs).clone(),
                    };
                    top.prev = Some(derived.rhs.clone());
                    top.fact = Some(derived);
                    plan.task = Task::Finally { calc, fact };
                }
            },
        }
        plans.push(plan);
    }
    plans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::lang::parse_command;

    fn plans(sources: &[&str]) -> Vec<Plan> {
        let cmds: Vec<NotepadCommand> = sources.iter().map(|s| parse_command(s).0).collect();
        elaborate(&cmds)
    }

    fn var(v: &str) -> Term {
        Term::Var(v.into())
    }

    #[test]
    fn chain_of_three() {
        let p = plans(&["have \"a = b\"", "also", "have \"b = c\"", "finally"]);
        assert_eq!(p[1].task, Task::Nothing);
        let Task::Finally { calc, fact } = &p[3].task else {
            panic!("{:?}", p[3].task)
        };
        assert_eq!((&calc.lhs, &fact.as_ref().unwrap().rhs), (&var("a"), &var("c")));
    }

    #[test]
    fn longer_chain_checks_links() {
        let p = plans(&[
            "have \"a = b\"",
            "also",
            "have \"... = c\"",
            "also",
            "have \"c = d\"",
            "finally",
        ]);
        assert_eq!(p[2].task, Task::Have(Fact { lhs: var("b"), rhs: var("c") }));
        let Task::Also { calc, fact } = &p[3].task else { panic!() };
        assert_eq!((&calc.rhs, &fact.lhs), (&var("b"), &var("b")));
        let Task::Finally { calc, .. } = &p[5].task else { panic!() };
        assert_eq!((&calc.lhs, &calc.rhs), (&var("a"), &var("c")));
    }

    #[test]
    fn chain_misuse() {
        let p = plans(&["also"]);
        assert_eq!(
            p[0].task,
            Task::Fail {
                message: NO_CALCULATION.into(),
                range: TextRange::new(0, 4)
            }
        );
        assert!(matches!(plans(&["have \"a = b\"", "finally"])[1].task, Task::Fail { .. }));
        assert!(matches!(plans(&["have \"... = b\""])[0].task, Task::Fail { .. }));
    }

    #[test]
    fn bindings_are_symbolic_and_scoped() {
        let p = plans(&["let x = 1", "begin", "let x = x + 1", "print x", "end", "print x", "end"]);
        assert!(p[3].is_bound("x"));
        let Task::Print(inner) = &p[3].task else { panic!() };
        assert_eq!(inner.to_string(), "1 + 1");
        let Task::Print(outer) = &p[5].task else { panic!() };
        assert_eq!(outer.to_string(), "1");
        assert!(matches!(p[6].task, Task::Fail { .. }));
    }

    #[test]
    fn notepad_resets() {
        let p = plans(&["let x = 1", "notepad", "print x"]);
        assert!(!p[2].is_bound("x"));
    }
}
