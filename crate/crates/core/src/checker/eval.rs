//! Position-free terms, substitution, folding and cancellable evaluation.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};

use super::lang::{BinOp, Expr};

/// Largest accepted `fib` argument; the result still fits in 128 bits.
pub const FIB_LIMIT: u32 = 186;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Num(BigInt),
    Var(String),
    Bin(BinOp, Box<Term>, Box<Term>),
    Fib(Box<Term>),
}

pub type Bindings = HashMap<String, Term>;

impl Term {
    /// Converts an expression, replacing `...` by `prev` (or leaving a free
    /// `...` variable when there is none).
    pub fn from_expr(e: &Expr, prev: Option<&Term>) -> Term {
        match e {
            Expr::Num(n, _) => Term::Num(n.clone()),
            Expr::Var(v, _) => Term::Var(v.clone()),
            Expr::Prev(_) => prev.cloned().unwrap_or_else(|| Term::Var("...".into())),
            Expr::Bin { op, lhs, rhs, .. } => Term::Bin(
                *op,
                Box::new(Term::from_expr(lhs, prev)),
                Box::new(Term::from_expr(rhs, prev)),
            ),
            Expr::Fib { arg, .. } => Term::Fib(Box::new(Term::from_expr(arg, prev))),
            Expr::Paren(inner, _) => Term::from_expr(inner, prev),
        }
    }

    /// Converts an expression with bound variables replaced by their
    /// definitions and `...` by `prev`.
    pub fn close(e: &Expr, env: &Bindings, prev: Option<&Term>) -> Term {
        match e {
            Expr::Var(v, _) => env.get(v).cloned().unwrap_or_else(|| Term::Var(v.clone())),
            Expr::Bin { op, lhs, rhs, .. } => Term::Bin(
                *op,
                Box::new(Term::close(lhs, env, prev)),
                Box::new(Term::close(rhs, env, prev)),
            ),
            Expr::Fib { arg, .. } => Term::Fib(Box::new(Term::close(arg, env, prev))),
            Expr::Paren(inner, _) => Term::close(inner, env, prev),
            _ => Term::from_expr(e, prev),
        }
    }

    /// Replaces bound variables by their (already closed) definitions.
    pub fn subst(&self, env: &Bindings) -> Term {
        match self {
            Term::Var(v) => env.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Num(_) => self.clone(),
            Term::Bin(op, a, b) => Term::Bin(*op, Box::new(a.subst(env)), Box::new(b.subst(env))),
            Term::Fib(a) => Term::Fib(Box::new(a.subst(env))),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Num(_) => {}
            Term::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Term::Fib(a) => a.collect_vars(out),
        }
    }

    /// Evaluates every variable-free subterm, leaving the rest in place.
    pub fn fold(&self, cancel: &Cancel) -> Result<Term, EvalError> {
        if self.free_vars().is_empty() {
            return eval(self, cancel).map(Term::Num);
        }
        Ok(match self {
            Term::Bin(op, a, b) => Term::Bin(*op, Box::new(a.fold(cancel)?), Box::new(b.fold(cancel)?)),
            Term::Fib(a) => Term::Fib(Box::new(a.fold(cancel)?)),
            _ => self.clone(),
        })
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(t: &Term, outer: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match t {
                Term::Num(n) => write!(f, "{n}"),
                Term::Var(v) => f.write_str(v),
                Term::Fib(a) => {
                    f.write_str("fib(")?;
                    go(a, 0, f)?;
                    f.write_str(")")
                }
                Term::Bin(op, a, b) => {
                    let p = op.precedence();
                    if p < outer {
                        f.write_str("(")?;
                    }
                    go(a, p, f)?;
                    write!(f, " {} ", op.symbol())?;
                    // both operators associate to the left
                    go(b, p + 1, f)?;
                    if p < outer {
                        f.write_str(")")?;
                    }
                    Ok(())
                }
            }
        }
        go(self, 0, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    Cancelled,
    Unbound(BTreeSet<String>),
    FibDomain(BigInt),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Cancelled => f.write_str("interrupted"),
            EvalError::Unbound(vs) => {
                let names: Vec<&str> = vs.iter().map(String::as_str).collect();
                write!(f, "unbound: {}", names.join(", "))
            }
            EvalError::FibDomain(n) if n.is_negative() => write!(f, "fib of negative argument {n}"),
            EvalError::FibDomain(n) => write!(f, "fib argument {n} exceeds {FIB_LIMIT}"),
        }
    }
}

/// Cooperative interruption flag, polled between evaluation steps.
#[derive(Debug, Default)]
pub struct Cancel(AtomicBool);

impl Cancel {
    pub fn cancel(&self) {
        self.0.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::Relaxed)
    }
}

pub fn eval(t: &Term, cancel: &Cancel) -> Result<BigInt, EvalError> {
    let free = t.free_vars();
    if !free.is_empty() {
        return Err(EvalError::Unbound(free));
    }
    let mut steps = 0u64;
    eval_closed(t, cancel, &mut steps)
}

fn eval_closed(t: &Term, cancel: &Cancel, steps: &mut u64) -> Result<BigInt, EvalError> {
    if cancel.is_cancelled() {
        return Err(EvalError::Cancelled);
    }
    match t {
        Term::Num(n) => Ok(n.clone()),
        Term::Var(v) => unreachable!("closed term has variable {v}"),
        Term::Bin(BinOp::Add, a, b) => Ok(eval_closed(a, cancel, steps)? + eval_closed(b, cancel, steps)?),
        Term::Bin(BinOp::Mul, a, b) => Ok(eval_closed(a, cancel, steps)? * eval_closed(b, cancel, steps)?),
        Term::Fib(a) => {
            let n = eval_closed(a, cancel, steps)?;
            match n.to_u32().filter(|n| *n <= FIB_LIMIT) {
                Some(n) => fib(n, cancel, steps).map(BigInt::from),
                None => Err(EvalError::FibDomain(n)),
            }
        }
    }
}

/// Naive doubly recursive Fibonacci: deliberately slow, polling `cancel`.
fn fib(n: u32, cancel: &Cancel, steps: &mut u64) -> Result<u128, EvalError> {
    if n < 2 {
        return Ok(n as u128);
    }
    *steps += 1;
    if *steps & 0x3fff == 0 && cancel.is_cancelled() {
        return Err(EvalError::Cancelled);
    }
    Ok(fib(n - 1, cancel, steps)? + fib(n - 2, cancel, steps)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::lang::{parse_command, NotepadCommand};

    fn term(src: &str) -> Term {
        let NotepadCommand::Print(e) = parse_command(&format!("print {src}")).0 else {
            panic!("{src}")
        };
        Term::from_expr(&e, None)
    }

    fn value(src: &str) -> Result<BigInt, EvalError> {
        eval(&term(src), &Cancel::default())
    }

    #[test]
    fn arithmetic() {
        assert_eq!(value("2 + 2").unwrap(), BigInt::from(4));
        assert_eq!(value("2 * (3 + 4)").unwrap(), BigInt::from(14));
        assert_eq!(value("fib(10) + fib(0)").unwrap(), BigInt::from(55));
        assert_eq!(
            value("99999999999999999999 * 10").unwrap().to_string(),
            "999999999999999999990"
        );
    }

    #[test]
    fn domain_and_free_variables() {
        assert_eq!(value("fib(187)"), Err(EvalError::FibDomain(BigInt::from(187))));
        assert_eq!(
            value("x + y * x"),
            Err(EvalError::Unbound(["x".to_string(), "y".to_string()].into()))
        );
    }

    #[test]
    fn substitution_and_folding() {
        let env: Bindings = [("x".to_string(), term("2 + 1"))].into();
        let t = term("x * y + fib(x)").subst(&env);
        assert_eq!(t.to_string(), "(2 + 1) * y + fib(2 + 1)");
        let folded = t.fold(&Cancel::default()).unwrap();
        assert_eq!(folded.to_string(), "3 * y + 2");
        assert_eq!(term("a + (b + c)").to_string(), "a + (b + c)");
        assert_eq!(term("(a + b) + c").to_string(), "a + b + c");
    }

    #[test]
    fn cancellation_stops_fib() {
        let cancel = Cancel::default();
        cancel.cancel();
        assert_eq!(eval(&term("fib(40)"), &cancel), Err(EvalError::Cancelled));
        // the largest argument is accepted, then interrupted
        assert_eq!(eval(&term("fib(186)"), &cancel), Err(EvalError::Cancelled));
    }
}
