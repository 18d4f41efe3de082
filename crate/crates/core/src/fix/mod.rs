//! Fixing a bad trace: generalize it, find elimination cycles, and realize
//! the cheapest cycle's constraint as program transformations.

pub mod elim;
pub mod realize;

pub use elim::{find_elimination_cycles, generalize_bad_trace, Cycle, ElimEdge, EliminationGraph, Role};
pub use realize::Realizer;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::constraint::{satisfies, unit_location, Atom, Constraint};
use crate::explore::closure::{free_closure, CLOSURE_BUDGET};
use crate::explore::{extend_trace, freely_transforms_to_preemption_free, replay, Bounds, Event, Machine, Trace};
use crate::lang::ast::Program;
use crate::lang::index::ProgramIndex;
use crate::lang::transform::{acts_across_preemption, apply_transformation, Transformation};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    /// Try every reordering before any atomic section.
    #[default]
    Ce1,
    /// Allow atomic sections after a few rejected reorderings.
    Ce2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixConfig {
    pub heuristic: Heuristic,
    pub allow_wait_notify: bool,
    pub bounds: Bounds,
    pub cycle_limit: usize,
    /// Rejected reorderings before ce2 considers atomic sections.
    pub ce2_patience: usize,
    pub max_depth: usize,
    pub max_programs: usize,
}

impl Default for FixConfig {
    fn default() -> Self {
        FixConfig {
            heuristic: Heuristic::Ce1,
            allow_wait_notify: false,
            bounds: Bounds::default(),
            cycle_limit: 256,
            ce2_patience: 3,
            max_depth: 8,
            max_programs: 5_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Fix {
    pub transformations: Vec<Transformation>,
    /// The adopted constraint Φ′.
    pub constraint: Constraint,
    pub program: Program,
    /// The elimination cycle used, absent after escalation.
    pub cycle: Option<String>,
    /// Cycles tried before this one succeeded.
    pub rejected: usize,
    /// Escalation had to act across preemption points.
    pub crossed_preemption: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FixError {
    #[error("trace is not bad")]
    NotBad,
    #[error("trace analysis failed: {0}")]
    Graph(String),
    #[error("trace does not replay: {0}")]
    Replay(String),
    #[error("no fix found")]
    NoFix,
}

/// Does `p2` still admit the bad trace or a free transformation of it?
struct Eliminator {
    members: Vec<Vec<Event>>,
    own: Vec<Event>,
    bounds: Bounds,
    vars: Vec<String>,
}

impl Eliminator {
    fn new(m: &Machine, tr: &Trace) -> Self {
        let members =
            free_closure(m, tr, CLOSURE_BUDGET).unwrap_or_else(|_| vec![tr.executed().cloned().collect()]);
        Eliminator {
            members,
            own: tr.executed().cloned().collect(),
            bounds: m.bounds,
            vars: tr.vars.to_vec(),
        }
    }

    fn eliminated(&self, p2: &Program) -> bool {
        self.gone(p2, &self.members)
    }

    /// Only the trace itself must go, not its free transformations.
    fn eliminated_exactly(&self, p2: &Program) -> bool {
        self.gone(p2, std::slice::from_ref(&self.own))
    }

    fn gone(&self, p2: &Program, members: &[Vec<Event>]) -> bool {
        let m2 = Machine::with_vars(p2, self.bounds, &self.vars);
        !members.iter().any(|ev| replay(&m2, ev).is_ok_and(|t| t.is_bad()))
    }
}

/// The elimination graph of `tr` with candidates, as FixBad sees it.
pub fn elimination_graph(p: &Program, phi: &Constraint, tr: &Trace, cfg: &FixConfig) -> Result<EliminationGraph, FixError> {
    let m = Machine::new(p, cfg.bounds);
    let ext = extend_trace(&m, tr).map_err(|e| FixError::Replay(e.to_string()))?;
    let mut g = generalize_bad_trace(p, &ext)?;
    let keep = !freely_transforms_to_preemption_free(&m, tr);
    let r = realizer(p, cfg, keep);
    let mut cache: HashMap<Atom, bool> = HashMap::new();
    let mut ordering_ok = |a: &Atom| {
        *cache.entry(a.clone()).or_insert_with(|| {
            let c: Constraint = a.clone().into();
            r.realize(&Constraint::and([phi.clone(), c.clone()]), &c, &mut |_| true)
                .is_some()
        })
    };
    g.add_candidates(p, cfg.allow_wait_notify, &mut ordering_ok);
    Ok(g)
}

fn realizer<'a>(p: &'a Program, cfg: &FixConfig, keep_preemption: bool) -> Realizer<'a> {
    Realizer {
        p,
        bound: cfg.bounds.domain_bound,
        keep_preemption,
        max_depth: cfg.max_depth,
        max_programs: cfg.max_programs,
    }
}

/// Cycles in the order the heuristic tries them.
fn schedule(cycles: Vec<Cycle>, cfg: &FixConfig) -> Vec<Cycle> {
    let (orders, rest): (Vec<Cycle>, Vec<Cycle>) = cycles.into_iter().partition(Cycle::only_orderings);
    match cfg.heuristic {
        Heuristic::Ce1 => orders.into_iter().chain(rest).collect(),
        Heuristic::Ce2 => {
            let k = cfg.ce2_patience.min(orders.len());
            let mut tail: Vec<Cycle> = orders[k..].iter().cloned().chain(rest).collect();
            tail.sort_by(|a, b| a.rank().cmp(&b.rank()));
            orders[..k].iter().cloned().chain(tail).collect()
        }
    }
}

/// Eliminate the bad trace `tr` of `p` while keeping `phi`.
pub fn fix_bad(p: &Program, phi: &Constraint, tr: &Trace, cfg: &FixConfig) -> Result<Fix, FixError> {
    let m = Machine::new(p, cfg.bounds);
    if !tr.is_bad() {
        return Err(FixError::NotBad);
    }
    let g = elimination_graph(p, phi, tr, cfg)?;
    let keep = !freely_transforms_to_preemption_free(&m, tr);
    let elim = Eliminator::new(&m, tr);
    let cycles = schedule(find_elimination_cycles(&g, p, cfg.cycle_limit), cfg);
    let r = realizer(p, cfg, keep);
    // Among equally ranked cycles, take the one needing the fewest transformations.
    let mut start = 0;
    while start < cycles.len() {
        let key = |c: &Cycle| (c.candidates, c.worst_kind);
        let end = start + cycles[start..].iter().take_while(|c| key(c) == key(&cycles[start])).count();
        let mut best: Option<(usize, Vec<Transformation>, Program)> = None;
        for (i, c) in cycles.iter().enumerate().take(end).skip(start) {
            let goal = Constraint::and([phi.clone(), c.constraint.clone()]);
            if let Some((ts, p2)) = r.realize(&goal, &c.constraint, &mut |q| elim.eliminated(q)) {
                if best.as_ref().is_none_or(|(_, bts, _)| ts.len() < bts.len()) {
                    best = Some((i, ts, p2));
                }
            }
        }
        if let Some((i, ts, p2)) = best {
            let c = &cycles[i];
            return Ok(Fix {
                transformations: ts,
                constraint: c.constraint.clone(),
                program: p2,
                cycle: Some(c.text.clone()),
                rejected: i,
                crossed_preemption: false,
            });
        }
        start = end;
    }
    let threads: Vec<usize> = {
        let mut t: Vec<usize> = tr.executed().map(|e| e.thread).collect();
        t.sort_unstable();
        t.dedup();
        t.retain(|&t| !p.threads[t].fixed);
        t
    };
    for (cross, exact) in [(false, false), (false, true), (true, false), (true, true)] {
        if cross && !keep {
            break;
        }
        let accept = |q: &Program| if exact { elim.eliminated_exactly(q) } else { elim.eliminated(q) };
        if let Some(mut fix) = escalate(p, phi, &threads, cfg, keep && !cross, &accept) {
            fix.rejected = cycles.len();
            fix.crossed_preemption = cross;
            return Ok(fix);
        }
    }
    Err(FixError::NoFix)
}

/// Wrap progressively larger runs of units into atomic sections, up to a
/// whole thread.
fn escalate(
    p: &Program,
    phi: &Constraint,
    threads: &[usize],
    cfg: &FixConfig,
    keep_preemption: bool,
    accept: &dyn Fn(&Program) -> bool,
) -> Option<Fix> {
    let idx = ProgramIndex::new(p);
    let widest = idx.blocks.iter().map(|b| b.units.len()).max().unwrap_or(0);
    let mut tries: Vec<(String, String)> = Vec::new();
    for w in 2..=widest {
        for b in idx.blocks.iter().filter(|b| threads.contains(&b.thread)) {
            for win in b.unit_names.windows(w) {
                tries.push((win[0].clone(), win[w - 1].clone()));
            }
        }
    }
    for &t in threads {
        let body = &p.threads[t].body;
        if body.len() > 1 {
            if let (Some(a), Some(z)) = (body[0].unit_name(), body[body.len() - 1].unit_name()) {
                tries.push((a.to_string(), z.to_string()));
            }
        }
    }
    for (first, last) in tries {
        let t = Transformation::Atomic { first, last };
        if keep_preemption && acts_across_preemption(p, &t) {
            continue;
        }
        let Ok(p2) = apply_transformation(p, &t, cfg.bounds.domain_bound) else {
            continue;
        };
        let Transformation::Atomic { first, last } = &t else {
            unreachable!()
        };
        let idx2 = ProgramIndex::new(&p2);
        let atom = match (unit_location(&idx, first), unit_location(&idx, last)) {
            (Some(a), Some(b)) => Some(Atom::atomicity(a, b)),
            _ => None,
        }
        .filter(|a| a.holds(&p2, &idx2).unwrap_or(false));
        let c = atom.map_or(Constraint::True, Constraint::Atom);
        let goal = Constraint::and([phi.clone(), c.clone()]);
        if satisfies(&p2, &goal).unwrap_or(false) && accept(&p2) {
            return Some(Fix {
                transformations: vec![t],
                constraint: c,
                program: p2,
                cycle: None,
                rejected: 0,
                crossed_preemption: false,
            });
        }
    }
    None
}
