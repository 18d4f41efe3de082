//! Trace transformations: free swaps of adjacent independent events and the
//! images of program transformations on traces.

use std::collections::{HashSet, VecDeque};

use crate::lang::ast::{Program, ERR_VAR};
use crate::lang::index::ProgramIndex;
use crate::lang::transform::{apply_structural, notify_label, wait_label, Transformation};

use super::machine::Machine;
use super::replay::{replay, replay_values};
use super::trace::{Event, Trace};
use super::Bounds;

/// Default number of closure expansions before giving up.
pub const CLOSURE_BUDGET: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ClosureError {
    #[error("trace closure exceeded its budget of {0} expansions")]
    Budget(usize),
    #[error("transformation could not be applied: {0}")]
    Transformation(String),
}

/// Extra neighbours of an id sequence, beside the free swaps.
type Expand<'a> = dyn Fn(&Closure, &[usize]) -> Vec<Vec<usize>> + 'a;

/// Event sequences are handled as id lists over a shared event table.
struct Closure<'a> {
    m: &'a Machine,
    table: Vec<Event>,
    err: Option<usize>,
    budget: usize,
    expansions: usize,
}

impl<'a> Closure<'a> {
    fn new(m: &'a Machine, events: &[Event], budget: usize) -> Self {
        let mut table: Vec<Event> = Vec::new();
        for e in events {
            if table.len() <= e.id {
                table.resize(e.id + 1, e.clone());
            }
            table[e.id] = e.clone();
        }
        Closure {
            m,
            table,
            err: m.var_index(ERR_VAR),
            budget,
            expansions: 0,
        }
    }

    fn events(&self, ids: &[usize]) -> Vec<Event> {
        ids.iter().map(|&i| self.table[i].clone()).collect()
    }

    fn states(&self, ids: &[usize]) -> Option<Vec<Vec<i64>>> {
        replay_values(self.m, &self.events(ids), &self.m.initial_vals())
    }

    fn eq_mod_err(&self, a: &[i64], b: &[i64]) -> bool {
        a.iter()
            .zip(b)
            .enumerate()
            .all(|(i, (x, y))| Some(i) == self.err || x == y)
    }

    /// All sequences reachable by one free swap.
    fn free_neighbours(&self, ids: &[usize]) -> Vec<Vec<usize>> {
        let Some(states) = self.states(ids) else {
            return Vec::new();
        };
        let init = self.m.initial_vals();
        let mut out = Vec::new();
        for i in 0..ids.len().saturating_sub(1) {
            let (a, b) = (&self.table[ids[i]], &self.table[ids[i + 1]]);
            // Neither event may be split from its atomic step.
            let glued = ids.get(i + 2).is_some_and(|&n| self.table[n].in_step);
            if a.thread == b.thread || a.in_step || glued {
                continue;
            }
            let before = if i == 0 { &init } else { &states[i - 1] };
            let Some(after) = replay_values(self.m, &[b.clone(), a.clone()], before) else {
                continue;
            };
            if self.eq_mod_err(&after[1], &states[i + 1]) {
                let mut n = ids.to_vec();
                n.swap(i, i + 1);
                out.push(n);
            }
        }
        out
    }

    /// Breadth-first closure of `start` under free swaps and `extra`.
    fn close(
        &mut self,
        start: Vec<Vec<usize>>,
        extra: &Expand,
    ) -> Result<Vec<Vec<usize>>, ClosureError> {
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        for s in start {
            if seen.insert(s.clone()) {
                order.push(s.clone());
                queue.push_back(s);
            }
        }
        while let Some(cur) = queue.pop_front() {
            self.expansions += 1;
            if self.expansions > self.budget {
                return Err(ClosureError::Budget(self.budget));
            }
            let mut next = self.free_neighbours(&cur);
            next.extend(extra(self, &cur));
            for n in next {
                if seen.insert(n.clone()) {
                    order.push(n.clone());
                    queue.push_back(n);
                }
            }
        }
        Ok(order)
    }
}

/// All event sequences reachable from `tr` by free swaps, `tr` first.
pub fn free_closure(m: &Machine, tr: &Trace, budget: usize) -> Result<Vec<Vec<Event>>, ClosureError> {
    let events: Vec<Event> = tr.executed().cloned().collect();
    let mut c = Closure::new(m, &events, budget);
    let ids: Vec<usize> = events.iter().map(|e| e.id).collect();
    let members = c.close(vec![ids], &|_, _| Vec::new())?;
    Ok(members.iter().map(|ids| c.events(ids)).collect())
}

/// Does some free transformation of `tr` replay as a preemption-free trace
/// of the machine's program? Exceeding the budget answers `false`.
pub fn freely_transforms_to_preemption_free(m: &Machine, tr: &Trace) -> bool {
    let Ok(members) = free_closure(m, tr, CLOSURE_BUDGET) else {
        return false;
    };
    members
        .iter()
        .any(|ev| replay(m, ev).is_ok_and(|t| t.is_preemption_free()))
}

/// Leaf labels of the unit holding `label`.
fn unit_leaves(idx: &ProgramIndex, label: &str) -> HashSet<String> {
    idx.unit_of(label)
        .map(|(b, u)| idx.blocks[b].units[u].iter().cloned().collect())
        .unwrap_or_default()
}

/// Swap a run of `first`-unit events immediately followed by a run of
/// `second`-unit events of the same thread.
fn reorder_image(c: &Closure, ids: &[usize], first: &HashSet<String>, second: &HashSet<String>) -> Vec<Vec<usize>> {
    let is = |i: usize, set: &HashSet<String>| {
        let e = &c.table[ids[i]];
        e.choice.is_none() && set.contains(&e.label)
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < ids.len() {
        if !is(i, first) || (i > 0 && is(i - 1, first)) {
            i += 1;
            continue;
        }
        let thread = c.table[ids[i]].thread;
        let mut j = i;
        while j < ids.len() && is(j, first) && c.table[ids[j]].thread == thread {
            j += 1;
        }
        let mut k = j;
        while k < ids.len() && is(k, second) && c.table[ids[k]].thread == thread {
            k += 1;
        }
        if k > j {
            let mut n = ids[..i].to_vec();
            n.extend_from_slice(&ids[j..k]);
            n.extend_from_slice(&ids[i..j]);
            n.extend_from_slice(&ids[k..]);
            out.push(n);
        }
        i = j;
    }
    out
}

/// Image of `tr` under `ts` (applied to `p` in order) combined with free
/// swaps, filtered to traces of the final program `p2`.
pub fn apply_trace_transformations(
    p: &Program,
    tr: &Trace,
    ts: &[Transformation],
    p2: &Program,
    bounds: Bounds,
) -> Result<Vec<Trace>, ClosureError> {
    let members = transformation_closure(p, tr, ts, p2, bounds, CLOSURE_BUDGET)?;
    let m2 = Machine::with_vars(p2, bounds, &tr.vars);
    Ok(members
        .into_iter()
        .filter_map(|ev| replay(&m2, &ev).ok())
        .collect())
}

/// The unfiltered closure used by [`apply_trace_transformations`].
pub fn transformation_closure(
    p: &Program,
    tr: &Trace,
    ts: &[Transformation],
    p2: &Program,
    bounds: Bounds,
    budget: usize,
) -> Result<Vec<Vec<Event>>, ClosureError> {
    // Statement semantics are taken from the final program, which holds
    // every statement of the earlier ones.
    let m = Machine::with_vars(p2, bounds, &tr.vars);
    let events: Vec<Event> = tr.executed().cloned().collect();
    let mut c = Closure::new(&m, &events, budget);
    let mut next_id = c.table.len();
    let mut members = c.close(vec![events.iter().map(|e| e.id).collect()], &|_, _| Vec::new())?;
    let mut cur = p.clone();
    for t in ts {
        let idx = ProgramIndex::new(&cur);
        match t {
            Transformation::Swap { first, second } => {
                let (a, b) = (unit_leaves(&idx, first), unit_leaves(&idx, second));
                members = c.close(members, &|c, ids| reorder_image(c, ids, &a, &b))?;
            }
            Transformation::Atomic { .. } => {}
            Transformation::WaitNotify {
                notify_after,
                wait_before,
                signal,
            } => {
                let n_id = next_id;
                let w_id = next_id + 1;
                next_id += 2;
                let thread_of = |l: &str| idx.resolve(l).map(|n| n.thread);
                let (Some(nt), Some(wt)) = (thread_of(notify_after), thread_of(wait_before)) else {
                    return Err(ClosureError::Transformation(t.to_string()));
                };
                for (id, thread, label) in [(n_id, nt, notify_label(signal)), (w_id, wt, wait_label(signal))] {
                    c.table.push(Event {
                        id,
                        thread,
                        label,
                        choice: None,
                        pending: false,
                        done_after: false,
                        switch_ok: false,
                        in_step: false,
                    });
                }
                let (na, wb) = (unit_leaves(&idx, notify_after), unit_leaves(&idx, wait_before));
                let mut inserted = Vec::new();
                for ids in &members {
                    let mut n = ids.clone();
                    if let Some(pos) = n.iter().rposition(|&i| na.contains(&c.table[i].label)) {
                        n.insert(pos + 1, n_id);
                    }
                    if let Some(pos) = n.iter().position(|&i| wb.contains(&c.table[i].label)) {
                        n.insert(pos, w_id);
                    }
                    inserted.push(n);
                }
                members = c.close(inserted, &|_, _| Vec::new())?;
            }
        }
        cur = apply_structural(&cur, t).map_err(|e| ClosureError::Transformation(e.to_string()))?;
    }
    Ok(members.iter().map(|ids| c.events(ids)).collect())
}
