//! Brute-force reference for small inputs: the exact set of programs, among
//! those reachable by a few neighbour transformations, that do not regress on
//! a trace.

use std::collections::{BTreeSet, HashSet, VecDeque};

use crate::constraint::{unit_location, Atom, Constraint};
use crate::explore::closure::ClosureError;
use crate::explore::{Bounds, Trace};
use crate::lang::ast::Program;
use crate::lang::index::ProgramIndex;
use crate::lang::print::print_program;
use crate::lang::transform::{apply_transformation, neighbour_transformations, Transformation};
use crate::lang::LangError;

use super::check_regression;

/// Largest trace and search the oracle accepts.
pub const ORACLE_MAX_EVENTS: usize = 12;
pub const ORACLE_MAX_PROGRAMS: usize = 5_000;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("input too large for the oracle: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Closure(#[from] ClosureError),
    #[error(transparent)]
    Lang(#[from] LangError),
}

/// Ordering atoms between all unit pairs of each block and atomicity atoms
/// between neighbouring units.
pub fn atom_universe(p: &Program) -> BTreeSet<Atom> {
    let idx = ProgramIndex::new(p);
    let mut out = BTreeSet::new();
    for b in &idx.blocks {
        let locs: Vec<_> = b
            .unit_names
            .iter()
            .filter_map(|n| unit_location(&idx, n))
            .collect();
        for (i, x) in locs.iter().enumerate() {
            for (j, y) in locs.iter().enumerate() {
                if i != j {
                    out.insert(Atom::ordering(x.clone(), y.clone()));
                }
            }
            if let Some(y) = locs.get(i + 1) {
                out.insert(Atom::atomicity(x.clone(), y.clone()));
            }
        }
    }
    out
}

/// Programs reachable from `p` by at most `k` neighbour transformations, each
/// with the sequence that produced it. `p` itself comes first.
pub fn neighbourhood(
    p: &Program,
    k: usize,
    bound: i64,
) -> Result<Vec<(Program, Vec<Transformation>)>, OracleError> {
    let mut seen: HashSet<String> = HashSet::from([print_program(p)]);
    let mut out = vec![(p.clone(), Vec::new())];
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        if out[i].1.len() >= k {
            continue;
        }
        let (cur, ts) = out[i].clone();
        for t in neighbour_transformations(&cur, bound) {
            let next = apply_transformation(&cur, &t, bound)?;
            if !seen.insert(print_program(&next)) {
                continue;
            }
            if out.len() >= ORACLE_MAX_PROGRAMS {
                return Err(OracleError::TooLarge(format!(
                    "more than {ORACLE_MAX_PROGRAMS} programs"
                )));
            }
            let mut ts2 = ts.clone();
            ts2.push(t);
            out.push((next, ts2));
            queue.push_back(out.len() - 1);
        }
    }
    Ok(out)
}

/// The weakest constraint over the atom universe that admits exactly the
/// non-regressing programs within `k` transformations of `p`, up to atom
/// sets: the disjunction of the atoms true in each non-regressing program.
pub fn sound_complete_oracle(
    p: &Program,
    tr: &Trace,
    k: usize,
    bounds: Bounds,
) -> Result<Constraint, OracleError> {
    if tr.executed().count() > ORACLE_MAX_EVENTS {
        return Err(OracleError::TooLarge(format!(
            "trace longer than {ORACLE_MAX_EVENTS} events"
        )));
    }
    let universe = atom_universe(p);
    let mut disjuncts = Vec::new();
    for (p2, ts) in neighbourhood(p, k, bounds.domain_bound)? {
        if check_regression(p, &ts, &p2, tr, bounds)?.is_some() {
            continue;
        }
        let idx = ProgramIndex::new(&p2);
        let mut atoms = Vec::new();
        for a in &universe {
            if a.holds(&p2, &idx)? {
                atoms.push(Constraint::Atom(a.clone()));
            }
        }
        disjuncts.push(Constraint::and(atoms));
    }
    Ok(Constraint::or(disjuncts))
}
