//! Sequential equivalence of two adjacent units, decided by exhaustive
//! evaluation over the bounded domain.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::{Node, Program, ERR_VAR};
use super::index::ProgramIndex;
use super::semantics::{exec_nodes, Exec};
use super::LangError;

/// Above this many variables the check falls back to a syntactic conflict test.
const MAX_ENUM_VARS: usize = 6;

#[derive(Debug, PartialEq, Eq)]
enum Outcome {
    Done(BTreeMap<String, i64>),
    Blocked,
    Infeasible,
    Fault,
}

fn run(first: &Node, second: &Node, start: &BTreeMap<String, i64>, bound: i64) -> Outcome {
    let mut st = start.clone();
    match exec_nodes(std::slice::from_ref(first), &mut st, bound)
        .and_then(|r| match r {
            Exec::Continue => exec_nodes(std::slice::from_ref(second), &mut st, bound),
            other => Ok(other),
        }) {
        Ok(Exec::Continue) => Outcome::Done(st),
        Ok(Exec::Blocked) => Outcome::Blocked,
        Ok(Exec::Infeasible) => Outcome::Infeasible,
        Err(_) => Outcome::Fault,
    }
}

fn footprint(n: &Node) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut reads = BTreeSet::new();
    let mut writes = BTreeSet::new();
    n.for_each_leaf(&mut |s| {
        reads.extend(s.reads());
        writes.extend(s.writes());
        if s.is_assert() {
            writes.insert(ERR_VAR.to_string());
        }
    });
    (reads, writes)
}

/// True when `a; b` and `b; a` agree on every start valuation within `bound`.
pub fn units_equivalent(a: &Node, b: &Node, bound: i64) -> bool {
    let (ra, wa) = footprint(a);
    let (rb, wb) = footprint(b);
    let mut vars: BTreeSet<String> = ra.union(&rb).cloned().collect();
    vars.extend(wa.iter().cloned());
    vars.extend(wb.iter().cloned());
    vars.remove(ERR_VAR);
    let vars: Vec<String> = vars.into_iter().collect();
    if vars.len() > MAX_ENUM_VARS {
        let conflict = |w: &BTreeSet<String>, r: &BTreeSet<String>, w2: &BTreeSet<String>| {
            w.iter().any(|v| v != ERR_VAR && (r.contains(v) || w2.contains(v)))
        };
        return !conflict(&wa, &rb, &wb) && !conflict(&wb, &ra, &wa);
    }
    let width = (2 * bound + 1) as usize;
    let total = width.pow(vars.len() as u32);
    let mut start = BTreeMap::new();
    for mut code in 0..total {
        start.clear();
        start.insert(ERR_VAR.to_string(), 0);
        for v in &vars {
            start.insert(v.clone(), (code % width) as i64 - bound);
            code /= width;
        }
        match (run(a, b, &start, bound), run(b, a, &start, bound)) {
            (Outcome::Blocked, Outcome::Blocked) => {}
            (x, y) if x == y => {}
            _ => return false,
        }
    }
    true
}

/// The top-level unit node containing `label`.
pub fn unit_node<'a>(p: &'a Program, idx: &ProgramIndex, label: &str) -> Option<&'a Node> {
    let (b, u) = idx.unit_of(label)?;
    let block = &idx.blocks[b];
    block.seq.get(p)?.get(block.start + u)
}

/// Sequential equivalence of the units containing `l1` and `l2`.
pub fn sequentially_equivalent(
    p: &Program,
    l1: &str,
    l2: &str,
    bound: i64,
) -> Result<bool, LangError> {
    let idx = ProgramIndex::new(p);
    let a = unit_node(p, &idx, l1).ok_or_else(|| LangError::UnknownLocation(l1.into()))?;
    let b = unit_node(p, &idx, l2).ok_or_else(|| LangError::UnknownLocation(l2.into()))?;
    Ok(units_equivalent(a, b, bound))
}
