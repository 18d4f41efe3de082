//! Syntax tree for CWhile programs.
//!
//! A thread body is a tree of [`Node`]s. Simple statements are the leaves and
//! carry the program locations; `atomic { }` and `group { }` blocks are
//! containers that may carry an optional name; `if (*)` and `while (*)` carry
//! their own location label because they are executed as branch steps.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Name of the distinguished error variable raised by failing assertions.
pub const ERR_VAR: &str = "err";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Mul,
    Div,
    Ge,
    Eq,
    And,
}

impl BinOp {
    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::And => 1,
            BinOp::Ge | BinOp::Eq => 2,
            BinOp::Add => 3,
            BinOp::Mul | BinOp::Div => 4,
        }
    }

    pub(crate) fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::And => "&&",
        }
    }
}

/// Integer and boolean expressions share one tree; booleans evaluate to 0/1.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(i64),
    Var(String),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic overflow")]
    Overflow,
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Bin(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Not(e) => e.collect_vars(out),
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn eval(&self, lookup: &dyn Fn(&str) -> i64) -> Result<i64, EvalError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => lookup(v),
            Expr::Not(e) => i64::from(e.eval(lookup)? == 0),
            Expr::Bin(op, l, r) => {
                let a = l.eval(lookup)?;
                let b = r.eval(lookup)?;
                match op {
                    BinOp::Add => a.checked_add(b).ok_or(EvalError::Overflow)?,
                    BinOp::Mul => a.checked_mul(b).ok_or(EvalError::Overflow)?,
                    BinOp::Div => {
                        if b == 0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a.checked_div(b).ok_or(EvalError::Overflow)?
                    }
                    BinOp::Ge => i64::from(a >= b),
                    BinOp::Eq => i64::from(a == b),
                    BinOp::And => i64::from(a != 0 && b != 0),
                }
            }
        })
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0 && min > 3 => write!(f, "({c})"),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Not(e) => {
                write!(f, "!")?;
                e.fmt_prec(f, 5)
            }
            Expr::Bin(op, l, r) => {
                let p = op.precedence();
                let paren = p < min;
                if paren {
                    write!(f, "(")?;
                }
                l.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                r.fmt_prec(f, p + 1)?;
                if paren {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StmtKind {
    Assign { var: String, value: Expr },
    Assume(Expr),
    Assert(Expr),
    Await(Expr),
    Skip,
    /// `wait(s)`: blocks until the signal `s` is raised; behaves as `await(s == 1)`.
    Wait(String),
    /// `notify(s)`: raises the signal `s`; behaves as `s := 1`.
    Notify(String),
}

/// A simple (leaf) statement with its unique location label.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Stmt {
    pub label: String,
    pub kind: StmtKind,
}

impl Stmt {
    pub fn new(label: impl Into<String>, kind: StmtKind) -> Self {
        Stmt { label: label.into(), kind }
    }

    pub fn reads(&self) -> BTreeSet<String> {
        match &self.kind {
            StmtKind::Assign { value, .. } => value.vars(),
            StmtKind::Assume(e) | StmtKind::Assert(e) | StmtKind::Await(e) => e.vars(),
            StmtKind::Wait(s) => BTreeSet::from([s.clone()]),
            StmtKind::Skip | StmtKind::Notify(_) => BTreeSet::new(),
        }
    }

    pub fn writes(&self) -> BTreeSet<String> {
        match &self.kind {
            StmtKind::Assign { var, .. } => BTreeSet::from([var.clone()]),
            StmtKind::Notify(s) => BTreeSet::from([s.clone()]),
            _ => BTreeSet::new(),
        }
    }

    /// Awaits (and waits) are the only blocking statements.
    pub fn is_preemption_point(&self) -> bool {
        matches!(self.kind, StmtKind::Await(_) | StmtKind::Wait(_))
    }

    pub fn is_assert(&self) -> bool {
        matches!(self.kind, StmtKind::Assert(_))
    }

    pub fn is_condition(&self) -> bool {
        matches!(
            self.kind,
            StmtKind::Assume(_) | StmtKind::Await(_) | StmtKind::Wait(_)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Block {
    pub name: Option<String>,
    pub body: Vec<Node>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Stmt(Stmt),
    Atomic(Block),
    /// Statements that reorderings may only move as a whole.
    Group(Block),
    If {
        label: String,
        then_branch: Vec<Node>,
        else_branch: Vec<Node>,
    },
    While {
        label: String,
        body: Vec<Node>,
    },
}

impl Node {
    /// True when the node contains no `if (*)` / `while (*)`.
    pub fn is_straight_line(&self) -> bool {
        match self {
            Node::Stmt(_) => true,
            Node::Atomic(b) | Node::Group(b) => b.body.iter().all(Node::is_straight_line),
            Node::If { .. } | Node::While { .. } => false,
        }
    }

    pub fn for_each_leaf<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        match self {
            Node::Stmt(s) => f(s),
            Node::Atomic(b) | Node::Group(b) => b.body.iter().for_each(|n| n.for_each_leaf(f)),
            Node::If {
                then_branch,
                else_branch,
                ..
            } => {
                then_branch.iter().for_each(|n| n.for_each_leaf(f));
                else_branch.iter().for_each(|n| n.for_each_leaf(f));
            }
            Node::While { body, .. } => body.iter().for_each(|n| n.for_each_leaf(f)),
        }
    }

    pub fn leaves(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        self.for_each_leaf(&mut |s| out.push(s));
        out
    }

    pub fn first_leaf(&self) -> Option<&Stmt> {
        match self {
            Node::Stmt(s) => Some(s),
            Node::Atomic(b) | Node::Group(b) => b.body.iter().find_map(Node::first_leaf),
            _ => None,
        }
    }

    /// The label that names this node when it is used as a reordering unit.
    pub fn unit_name(&self) -> Option<&str> {
        match self {
            Node::Stmt(s) => Some(&s.label),
            Node::Atomic(b) | Node::Group(b) => b
                .name
                .as_deref()
                .or_else(|| self.first_leaf().map(|s| s.label.as_str())),
            Node::If { label, .. } | Node::While { label, .. } => Some(label),
        }
    }

    /// Child statement sequences, in selector order.
    pub fn children(&self) -> Vec<&Vec<Node>> {
        match self {
            Node::Stmt(_) => vec![],
            Node::Atomic(b) | Node::Group(b) => vec![&b.body],
            Node::If {
                then_branch,
                else_branch,
                ..
            } => vec![then_branch, else_branch],
            Node::While { body, .. } => vec![body],
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Vec<Node>> {
        match self {
            Node::Stmt(_) => vec![],
            Node::Atomic(b) | Node::Group(b) => vec![&mut b.body],
            Node::If {
                then_branch,
                else_branch,
                ..
            } => vec![then_branch, else_branch],
            Node::While { body, .. } => vec![body],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Thread {
    pub name: String,
    /// Fixed threads are outside the code under repair and are never transformed.
    pub fixed: bool,
    pub body: Vec<Node>,
}

impl Thread {
    pub fn leaves(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        for n in &self.body {
            n.for_each_leaf(&mut |s| out.push(s));
        }
        out
    }
}

/// A parsed CWhile program.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Program {
    pub threads: Vec<Thread>,
    /// Values from the `init:` line; every other variable starts at 0.
    pub init: BTreeMap<String, i64>,
}

impl Program {
    /// All variables mentioned anywhere, plus `err`, sorted by name.
    pub fn variables(&self) -> Vec<String> {
        let mut vars: BTreeSet<String> = self.init.keys().cloned().collect();
        vars.insert(ERR_VAR.to_string());
        for t in &self.threads {
            for s in t.leaves() {
                vars.extend(s.reads());
                vars.extend(s.writes());
            }
        }
        vars.into_iter().collect()
    }

    pub fn initial_value(&self, var: &str) -> i64 {
        self.init.get(var).copied().unwrap_or(0)
    }

    pub fn find_stmt(&self, label: &str) -> Option<(usize, &Stmt)> {
        self.threads.iter().enumerate().find_map(|(i, t)| {
            t.leaves()
                .into_iter()
                .find(|s| s.label == label)
                .map(|s| (i, s))
        })
    }

    pub fn thread_of(&self, label: &str) -> Option<usize> {
        crate::lang::index::ProgramIndex::new(self)
            .resolve(label)
            .map(|l| l.thread)
    }

    /// Multiset of leaf labels, used to check that reorderings only permute.
    pub fn leaf_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .threads
            .iter()
            .flat_map(|t| t.leaves().into_iter().map(|s| s.label.clone()))
            .collect();
        out.sort();
        out
    }
}

/// A program location: the owning thread and the statement (or unit) label.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Location {
    pub thread: usize,
    pub label: String,
}

impl Location {
    pub fn new(thread: usize, label: impl Into<String>) -> Self {
        Location {
            thread,
            label: label.into(),
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}
