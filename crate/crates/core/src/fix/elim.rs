//! Trace elimination graphs: a bad trace generalized to the orderings the bug
//! needs, plus candidate edges whose constraints would reverse them.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::constraint::{unit_location, unit_ordering, Atom, AtomKind, Constraint};
use crate::explore::Trace;
use crate::graph::{Pos, TraceGraph};
use crate::lang::ast::{Program, Stmt, StmtKind, ERR_VAR};
use crate::lang::index::ProgramIndex;
use crate::learn::activation_tags;

use super::FixError;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    /// Program order inside one thread.
    Keep,
    /// A cross-thread ordering the bug depends on.
    Hard,
    /// Adopting the atom enforces the edge's direction.
    Candidate(Atom),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElimEdge {
    pub from: usize,
    pub to: usize,
    pub role: Role,
}

#[derive(Clone, Debug)]
pub struct ElimNode {
    pub thread: usize,
    pub label: String,
    pub pending: bool,
    pub stmt: Option<Stmt>,
    pub activation: Option<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct EliminationGraph {
    pub nodes: Vec<ElimNode>,
    pub edges: Vec<ElimEdge>,
    /// Position of the failing assertion.
    pub failing: usize,
}

/// Position of the first assertion whose condition is false when it runs.
pub fn failing_assertion(p: &Program, tr: &Trace) -> Option<usize> {
    tr.events.iter().enumerate().find_map(|(i, e)| {
        if e.pending || e.choice.is_some() {
            return None;
        }
        let (_, st) = p.find_stmt(&e.label)?;
        let StmtKind::Assert(cond) = &st.kind else {
            return None;
        };
        let vals = tr.before(i);
        (cond.eval(&|v| tr.value(vals, v)) == Ok(0)).then_some(i)
    })
}

/// Necessary edges of the bad trace `tr` (normally extended with pending events).
pub fn generalize_bad_trace(p: &Program, tr: &Trace) -> Result<EliminationGraph, FixError> {
    let failing = failing_assertion(p, tr).ok_or(FixError::NotBad)?;
    let idx = ProgramIndex::new(p);
    let stmts: Vec<Option<Stmt>> = tr
        .events
        .iter()
        .map(|e| {
            if e.choice.is_some() {
                None
            } else {
                p.find_stmt(&e.label).map(|(_, s)| s.clone())
            }
        })
        .collect();
    let tags = activation_tags(
        &idx,
        tr.events
            .iter()
            .zip(&stmts)
            .map(|(e, s)| (e.thread, s.as_ref().map(|_| e.label.as_str()))),
    );
    let nodes: Vec<ElimNode> = tr
        .events
        .iter()
        .zip(stmts)
        .zip(tags)
        .map(|((e, stmt), activation)| ElimNode {
            thread: e.thread,
            label: e.label.clone(),
            pending: e.pending,
            stmt,
            activation,
        })
        .collect();

    let mut edges = BTreeSet::new();
    let role = |a: usize, b: usize| {
        if nodes[a].thread == nodes[b].thread {
            Role::Keep
        } else {
            Role::Hard
        }
    };
    let mut last_of: HashMap<usize, usize> = HashMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if let Some(j) = last_of.insert(n.thread, i) {
            edges.insert(ElimEdge {
                from: j,
                to: i,
                role: Role::Keep,
            });
        }
    }
    let g = TraceGraph::build(p, tr).map_err(|e| FixError::Graph(e.to_string()))?;
    for e in &g.df_conds {
        if let Pos::At(x) = e.from {
            edges.insert(ElimEdge {
                from: x,
                to: e.to,
                role: role(x, e.to),
            });
        }
    }
    let writes = |i: usize| -> BTreeSet<String> {
        let mut w = nodes[i].stmt.as_ref().map(Stmt::writes).unwrap_or_default();
        w.remove(ERR_VAR);
        w
    };
    let reads = nodes[failing].stmt.as_ref().map(Stmt::reads).unwrap_or_default();
    for v in &reads {
        if let Some(j) = (0..failing).rev().find(|&j| writes(j).contains(v)) {
            edges.insert(ElimEdge {
                from: j,
                to: failing,
                role: role(j, failing),
            });
        }
        for k in failing + 1..nodes.len() {
            if writes(k).contains(v) {
                edges.insert(ElimEdge {
                    from: failing,
                    to: k,
                    role: role(failing, k),
                });
            }
        }
    }
    Ok(EliminationGraph {
        nodes,
        edges: edges.into_iter().collect(),
        failing,
    })
}

impl EliminationGraph {
    fn necessary_reach(&self) -> Vec<Vec<bool>> {
        let n = self.nodes.len();
        let mut reach = vec![vec![false; n]; n];
        for e in self.edges.iter().filter(|e| !matches!(e.role, Role::Candidate(_))) {
            reach[e.from][e.to] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    let row = reach[k].clone();
                    for (r, &via) in reach[i].iter_mut().zip(&row) {
                        *r |= via;
                    }
                }
            }
        }
        reach
    }

    pub fn same_activation(&self, x: usize, y: usize) -> bool {
        self.nodes[x].activation.is_some() && self.nodes[x].activation == self.nodes[y].activation
    }

    /// Add candidate edges. Fixed threads get none. `ordering_ok` decides
    /// whether an ordering atom can be realized at all.
    pub fn add_candidates(
        &mut self,
        p: &Program,
        wait_notify: bool,
        ordering_ok: &mut dyn FnMut(&Atom) -> bool,
    ) {
        let idx = ProgramIndex::new(p);
        let reach = self.necessary_reach();
        let n = self.nodes.len();
        let fixed = |t: usize| p.threads[t].fixed;
        let mut out = BTreeSet::new();
        for x in 0..n {
            for y in 0..n {
                let (nx, ny) = (&self.nodes[x], &self.nodes[y]);
                if x == y || !reach[x][y] || nx.thread != ny.thread || fixed(nx.thread) {
                    continue;
                }
                if !self.same_activation(x, y) {
                    continue;
                }
                if let Some(atom) = unit_ordering(&idx, &ny.label, &nx.label) {
                    if ordering_ok(&atom) {
                        out.insert(ElimEdge {
                            from: y,
                            to: x,
                            role: Role::Candidate(atom),
                        });
                    }
                }
                let (Some((_, ux)), Some((_, uy))) = (idx.unit_of(&nx.label), idx.unit_of(&ny.label)) else {
                    continue;
                };
                let through_other = (0..n).any(|z| self.nodes[z].thread != nx.thread && reach[x][z] && reach[z][y]);
                if uy == ux + 1 && through_other {
                    if let (Some(a), Some(b)) = (unit_location(&idx, &nx.label), unit_location(&idx, &ny.label)) {
                        out.insert(ElimEdge {
                            from: y,
                            to: x,
                            role: Role::Candidate(Atom::atomicity(a, b)),
                        });
                    }
                }
            }
        }
        if wait_notify {
            for e in &self.edges {
                let (nx, ny) = (&self.nodes[e.from], &self.nodes[e.to]);
                if e.role != Role::Hard || fixed(nx.thread) || fixed(ny.thread) {
                    continue;
                }
                if let (Some(a), Some(b)) = (unit_location(&idx, &ny.label), unit_location(&idx, &nx.label)) {
                    out.insert(ElimEdge {
                        from: e.to,
                        to: e.from,
                        role: Role::Candidate(Atom::scheduling(a, b)),
                    });
                }
            }
        }
        self.edges.extend(out);
        self.edges.sort();
        self.edges.dedup();
    }

    pub fn candidates(&self) -> impl Iterator<Item = &ElimEdge> {
        self.edges.iter().filter(|e| matches!(e.role, Role::Candidate(_)))
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph elimination {\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let style = if n.pending { ", style=dashed" } else { "" };
            let _ = writeln!(s, "  n{i} [label=\"{}\"{style}];", n.label);
        }
        for e in &self.edges {
            let attr = match &e.role {
                Role::Keep => String::new(),
                Role::Hard => " [penwidth=2]".into(),
                Role::Candidate(a) => format!(" [style=dotted, label=\"{a}\"]"),
            };
            let _ = writeln!(s, "  n{} -> n{}{attr};", e.from, e.to);
        }
        s.push_str("}\n");
        s
    }
}

/// A simple cycle through at least one candidate and one hard edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cycle {
    pub edges: Vec<ElimEdge>,
    /// Candidate atoms and the orders of the kept intra-thread edges.
    pub constraint: Constraint,
    pub text: String,
    pub candidates: usize,
    pub worst_kind: AtomKind,
}

impl Cycle {
    /// Preference key: fewer candidates, milder kinds, shorter, then text.
    pub fn rank(&self) -> (usize, AtomKind, usize, &str) {
        (self.candidates, self.worst_kind, self.edges.len(), &self.text)
    }

    pub fn only_orderings(&self) -> bool {
        self.worst_kind == AtomKind::Ordering
    }
}

/// Upper bound on cycle-search work.
const CYCLE_WORK: usize = 500_000;

/// Up to `limit` elimination cycles, best first, one per constraint.
pub fn find_elimination_cycles(g: &EliminationGraph, p: &Program, limit: usize) -> Vec<Cycle> {
    let idx = ProgramIndex::new(p);
    let n = g.nodes.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in g.edges.iter().enumerate() {
        adj[e.from].push(i);
    }
    let mut raw: Vec<Vec<usize>> = Vec::new();
    let mut work = 0;
    for s in 0..n {
        let mut path: Vec<usize> = Vec::new();
        let mut on = vec![false; n];
        on[s] = true;
        cycles_from(g, &adj, s, s, &mut path, &mut on, &mut raw, &mut work);
    }
    let mut best: HashMap<Constraint, Cycle> = HashMap::new();
    for edges in raw {
        let c = make_cycle(g, &idx, edges);
        match best.get(&c.constraint) {
            Some(old) if old.rank() <= c.rank() => {}
            _ => {
                best.insert(c.constraint.clone(), c);
            }
        }
    }
    let mut out: Vec<Cycle> = best.into_values().collect();
    out.sort_by(|a, b| a.rank().cmp(&b.rank()));
    out.truncate(limit);
    out
}

#[allow(clippy::too_many_arguments)]
fn cycles_from(
    g: &EliminationGraph,
    adj: &[Vec<usize>],
    start: usize,
    at: usize,
    path: &mut Vec<usize>,
    on: &mut [bool],
    out: &mut Vec<Vec<usize>>,
    work: &mut usize,
) {
    for &ei in &adj[at] {
        *work += 1;
        if *work > CYCLE_WORK {
            return;
        }
        let to = g.edges[ei].to;
        if to == start {
            path.push(ei);
            let roles = path.iter().map(|&i| &g.edges[i].role);
            let cand = roles.clone().any(|r| matches!(r, Role::Candidate(_)));
            let hard = path.iter().any(|&i| g.edges[i].role == Role::Hard);
            if cand && hard {
                out.push(path.clone());
            }
            path.pop();
        } else if to > start && !on[to] {
            on[to] = true;
            path.push(ei);
            cycles_from(g, adj, start, to, path, on, out, work);
            path.pop();
            on[to] = false;
        }
    }
}

fn make_cycle(g: &EliminationGraph, idx: &ProgramIndex, mut ids: Vec<usize>) -> Cycle {
    // Start at the first candidate edge so the text reads naturally.
    let first = ids
        .iter()
        .position(|&i| matches!(g.edges[i].role, Role::Candidate(_)))
        .unwrap_or(0);
    ids.rotate_left(first);
    let edges: Vec<ElimEdge> = ids.iter().map(|&i| g.edges[i].clone()).collect();
    let mut atoms = Vec::new();
    let mut candidates = 0;
    let mut worst = AtomKind::Ordering;
    for e in &edges {
        match &e.role {
            Role::Candidate(a) => {
                candidates += 1;
                worst = worst.max(a.kind);
                atoms.push(Constraint::Atom(a.clone()));
            }
            Role::Keep if g.same_activation(e.from, e.to) => {
                let (x, y) = (&g.nodes[e.from].label, &g.nodes[e.to].label);
                if let Some(a) = unit_ordering(idx, x, y) {
                    atoms.push(Constraint::Atom(a));
                }
            }
            _ => {}
        }
    }
    let mut text = g.nodes[edges[0].from].label.clone();
    for e in &edges {
        text.push_str(" -> ");
        text.push_str(&g.nodes[e.to].label);
    }
    Cycle {
        edges,
        constraint: Constraint::and(atoms),
        text,
        candidates,
        worst_kind: worst,
    }
}
