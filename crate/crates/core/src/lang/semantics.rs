//! Statement semantics shared by the interpreter, replay and equivalence checks.

use std::collections::BTreeMap;

use super::ast::{EvalError, Node, Stmt, StmtKind, ERR_VAR};

/// A variable store the statement semantics can read and update.
pub trait Store {
    fn get(&self, var: &str) -> i64;
    fn set(&mut self, var: &str, value: i64);
}

impl Store for BTreeMap<String, i64> {
    fn get(&self, var: &str) -> i64 {
        BTreeMap::get(self, var).copied().unwrap_or(0)
    }

    fn set(&mut self, var: &str, value: i64) {
        self.insert(var.to_string(), value);
    }
}

/// Result of executing one statement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Continue,
    /// An await (or wait) whose condition is false.
    Blocked,
    /// An assume whose condition is false: the path does not exist.
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Fault {
    #[error("statement `{label}`: {source}")]
    Eval { label: String, source: EvalError },
    #[error("statement `{label}`: value {value} of `{var}` is outside [-{bound}, {bound}]")]
    OutOfDomain {
        label: String,
        var: String,
        value: i64,
        bound: i64,
    },
}

fn eval(s: &Stmt, e: &super::Expr, st: &dyn Store) -> Result<i64, Fault> {
    e.eval(&|v| st.get(v)).map_err(|source| Fault::Eval {
        label: s.label.clone(),
        source,
    })
}

/// Execute `s` on `st`. A blocked or infeasible statement leaves `st` untouched.
pub fn exec<S: Store>(s: &Stmt, st: &mut S, bound: i64) -> Result<Exec, Fault> {
    match &s.kind {
        StmtKind::Assign { var, value } => {
            let v = eval(s, value, st)?;
            if v.abs() > bound {
                return Err(Fault::OutOfDomain {
                    label: s.label.clone(),
                    var: var.clone(),
                    value: v,
                    bound,
                });
            }
            st.set(var, v);
        }
        StmtKind::Assume(e) => {
            if eval(s, e, st)? == 0 {
                return Ok(Exec::Infeasible);
            }
        }
        StmtKind::Assert(e) => {
            if eval(s, e, st)? == 0 {
                st.set(ERR_VAR, 1);
            }
        }
        StmtKind::Await(e) => {
            if eval(s, e, st)? == 0 {
                return Ok(Exec::Blocked);
            }
        }
        StmtKind::Skip => {}
        StmtKind::Wait(sig) => {
            if st.get(sig) != 1 {
                return Ok(Exec::Blocked);
            }
        }
        StmtKind::Notify(sig) => st.set(sig, 1),
    }
    Ok(Exec::Continue)
}

/// Execute straight-line nodes in order, stopping at the first statement
/// that does not continue.
pub fn exec_nodes<S: Store>(nodes: &[Node], st: &mut S, bound: i64) -> Result<Exec, Fault> {
    for n in nodes {
        let mut r = Ok(Exec::Continue);
        n.for_each_leaf(&mut |s| {
            if matches!(r, Ok(Exec::Continue)) {
                r = exec(s, st, bound);
            }
        });
        if !matches!(r, Ok(Exec::Continue)) {
            return r;
        }
    }
    Ok(Exec::Continue)
}
