//! Does applying a sequence of transformations regress on a given good trace?

use std::collections::{BTreeSet, HashMap};

use crate::explore::closure::{free_closure, transformation_closure, ClosureError, CLOSURE_BUDGET};
use crate::explore::{replay, Bounds, Machine, Trace};
use crate::graph::{Pos, TraceGraph, TraceInfo};
use crate::lang::ast::{Program, StmtKind};
use crate::lang::transform::Transformation;

/// A witness that a good trace turned bad.
#[derive(Clone, Debug)]
pub struct Regression {
    pub trace: Trace,
}

/// Look for a bad trace of `p2` obtained from the good trace `tr` of `p` by
/// the images of `ts` and free swaps, keeping every condition's data flow.
///
/// A bad trace only counts when it fails an assertion that no free
/// transformation of `tr` in `p` can fail already.
pub fn check_regression(
    p: &Program,
    ts: &[Transformation],
    p2: &Program,
    tr: &Trace,
    bounds: Bounds,
) -> Result<Option<Regression>, ClosureError> {
    if ts.is_empty() {
        return Ok(None);
    }
    let m = Machine::with_vars(p, bounds, &tr.vars);
    let mut known = BTreeSet::new();
    for ev in free_closure(&m, tr, CLOSURE_BUDGET)? {
        if let Ok(t) = replay(&m, &ev) {
            known.extend(failing_asserts(&m, &t));
        }
    }
    let Ok(g) = TraceGraph::build(p, tr) else {
        return Ok(None);
    };
    let ids: Vec<usize> = tr.executed().map(|e| e.id).collect();
    let m2 = Machine::with_vars(p2, bounds, &tr.vars);
    for ev in transformation_closure(p, tr, ts, p2, bounds, CLOSURE_BUDGET)? {
        let Ok(t2) = replay(&m2, &ev) else {
            continue;
        };
        if !t2.is_bad()
            || failing_asserts(&m2, &t2).is_subset(&known)
            || !keeps_conditions(&g, &ids, p2, &t2)
        {
            continue;
        }
        return Ok(Some(Regression { trace: t2 }));
    }
    Ok(None)
}

/// Every condition of `g` still reads each of its variables from the same event.
fn keeps_conditions(g: &TraceGraph, ids: &[usize], p2: &Program, t2: &Trace) -> bool {
    let Ok(info2) = TraceInfo::new(p2, t2) else {
        return false;
    };
    let pos2: HashMap<usize, usize> = t2.executed().enumerate().map(|(i, e)| (e.id, i)).collect();
    g.df_conds.iter().all(|e| {
        let Some(&y) = pos2.get(&ids[e.to]) else {
            return false;
        };
        let want = match e.from {
            Pos::Bot => Some(Pos::Bot),
            Pos::At(x) => pos2.get(&ids[x]).map(|&x| Pos::At(x)),
        };
        e.vars
            .iter()
            .all(|v| want.is_some() && info2.last(y, v).ok() == want)
    })
}

/// Labels of the assertions whose condition is false when they execute.
pub fn failing_asserts(m: &Machine, tr: &Trace) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (i, e) in tr.events.iter().enumerate() {
        if e.pending || e.choice.is_some() {
            continue;
        }
        let Some(StmtKind::Assert(cond)) = m.stmt(&e.label).map(|s| &s.kind) else {
            continue;
        };
        let vals = tr.before(i);
        if cond.eval(&|v| m.value(vals, v)) == Ok(0) {
            out.insert(e.label.clone());
        }
    }
    out
}
