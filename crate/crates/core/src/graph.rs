//! Trace analysis graphs: data flow between trace positions, non-free
//! orders, interference edges and covers.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write;

use crate::explore::Trace;
use crate::lang::ast::{Program, Stmt, ERR_VAR};

/// A graph node: the initial state or a trace position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pos {
    Bot,
    At(usize),
}

impl Pos {
    pub fn index(self) -> Option<usize> {
        match self {
            Pos::Bot => None,
            Pos::At(i) => Some(i),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    IntraThreadOrder,
    DfConds,
    DfAsserts,
    NonFreeOrder,
}

impl EdgeKind {
    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::IntraThreadOrder => "IntraThreadOrder",
            EdgeKind::DfConds => "DFConds",
            EdgeKind::DfAsserts => "DFAsserts",
            EdgeKind::NonFreeOrder => "NonFreeOrder",
        }
    }
}

/// A data-flow edge: position `to` reads `vars` from `from`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DataEdge {
    pub from: Pos,
    pub to: usize,
    pub vars: BTreeSet<String>,
}

/// A plain ordering edge `from -> to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub from: Pos,
    pub to: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("position {0} is outside the trace")]
    Position(usize),
    #[error("variable `{var}` is not read at position {pos}")]
    NotRead { pos: usize, var: String },
    #[error("label `{0}` is not a statement of the program")]
    UnknownLabel(String),
}

/// Per-position facts about a trace, looked up in its program.
#[derive(Clone, Debug)]
pub struct TraceInfo {
    pub threads: Vec<usize>,
    pub labels: Vec<String>,
    pub reads: Vec<BTreeSet<String>>,
    pub writes: Vec<BTreeSet<String>>,
    pub stmts: Vec<Option<Stmt>>,
    /// Value written per written variable.
    pub written: Vec<BTreeMap<String, i64>>,
}

impl TraceInfo {
    /// Facts for the executed events of `tr`.
    pub fn new(p: &Program, tr: &Trace) -> Result<Self, GraphError> {
        let stmts: HashMap<&str, &Stmt> = p
            .threads
            .iter()
            .flat_map(|t| t.leaves())
            .map(|s| (s.label.as_str(), s))
            .collect();
        let mut info = TraceInfo {
            threads: Vec::new(),
            labels: Vec::new(),
            reads: Vec::new(),
            writes: Vec::new(),
            stmts: Vec::new(),
            written: Vec::new(),
        };
        for (e, vals) in tr.events.iter().zip(&tr.states).filter(|(e, _)| !e.pending) {
            let stmt = if e.choice.is_some() {
                None
            } else {
                Some(
                    (*stmts
                        .get(e.label.as_str())
                        .ok_or_else(|| GraphError::UnknownLabel(e.label.clone()))?)
                    .clone(),
                )
            };
            let reads = stmt.as_ref().map(Stmt::reads).unwrap_or_default();
            let mut writes = stmt.as_ref().map(Stmt::writes).unwrap_or_default();
            writes.remove(ERR_VAR);
            let written = writes.iter().map(|v| (v.clone(), tr.value(vals, v))).collect();
            info.threads.push(e.thread);
            info.labels.push(e.label.clone());
            info.reads.push(reads);
            info.writes.push(writes);
            info.stmts.push(stmt);
            info.written.push(written);
        }
        Ok(info)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The last write to `var` strictly before position `i`.
    pub fn last(&self, i: usize, var: &str) -> Result<Pos, GraphError> {
        if i >= self.len() {
            return Err(GraphError::Position(i));
        }
        if !self.reads[i].contains(var) {
            return Err(GraphError::NotRead {
                pos: i,
                var: var.to_string(),
            });
        }
        Ok((0..i)
            .rev()
            .find(|&j| self.writes[j].contains(var))
            .map_or(Pos::Bot, Pos::At))
    }

    /// Direct data flow into `i`, grouped by source.
    pub fn reads_from(&self, i: usize) -> Vec<DataEdge> {
        let mut by_src: BTreeMap<Pos, BTreeSet<String>> = BTreeMap::new();
        for v in &self.reads[i] {
            let w = self.last(i, v).expect("read variable");
            by_src.entry(w).or_default().insert(v.clone());
        }
        by_src
            .into_iter()
            .map(|(from, vars)| DataEdge { from, to: i, vars })
            .collect()
    }

    /// Transitive data flow into `i`.
    pub fn depends(&self, i: usize) -> BTreeSet<DataEdge> {
        let mut out = BTreeSet::new();
        let mut stack = vec![i];
        let mut done = BTreeSet::new();
        while let Some(x) = stack.pop() {
            if !done.insert(x) {
                continue;
            }
            for e in self.reads_from(x) {
                if let Pos::At(j) = e.from {
                    stack.push(j);
                }
                out.insert(e);
            }
        }
        out
    }

    fn is(&self, i: usize, f: fn(&Stmt) -> bool) -> bool {
        self.stmts[i].as_ref().is_some_and(f)
    }

    pub fn is_condition(&self, i: usize) -> bool {
        self.is(i, Stmt::is_condition)
    }

    pub fn is_assert(&self, i: usize) -> bool {
        self.is(i, Stmt::is_assert)
    }
}

#[derive(Clone, Debug)]
pub struct TraceGraph {
    pub info: TraceInfo,
    pub df_conds: BTreeSet<DataEdge>,
    pub df_asserts: BTreeSet<DataEdge>,
    pub non_free: BTreeSet<Edge>,
}

/// A cover path and the kind of each hop.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cover {
    pub path: Vec<Pos>,
    pub hops: Vec<EdgeKind>,
}

impl Cover {
    /// Intra-thread hops of the cover.
    pub fn intra_edges(&self) -> Vec<Edge> {
        self.path
            .windows(2)
            .zip(&self.hops)
            .filter(|(_, k)| **k == EdgeKind::IntraThreadOrder)
            .map(|(w, _)| Edge {
                from: w[0],
                to: w[1],
            })
            .collect()
    }
}

pub const MAX_COVERS: usize = 64;
/// Work limit for one cover search, in path extensions.
const COVER_SEARCH_LIMIT: usize = 200_000;

impl TraceGraph {
    pub fn build(p: &Program, tr: &Trace) -> Result<Self, GraphError> {
        Ok(Self::from_info(TraceInfo::new(p, tr)?))
    }

    pub fn from_info(info: TraceInfo) -> Self {
        let mut df_conds = BTreeSet::new();
        let mut df_asserts = BTreeSet::new();
        for i in 0..info.len() {
            if info.is_condition(i) {
                df_conds.extend(info.depends(i));
            }
            if info.is_assert(i) {
                df_asserts.extend(info.depends(i));
            }
        }
        let mut non_free = BTreeSet::new();
        for x in 0..info.len() {
            for y in x + 1..info.len() {
                let differs = info.written[x]
                    .iter()
                    .any(|(v, a)| info.written[y].get(v).is_some_and(|b| a != b));
                if differs {
                    non_free.insert(Edge {
                        from: Pos::At(x),
                        to: Pos::At(y),
                    });
                }
            }
        }
        TraceGraph {
            info,
            df_conds,
            df_asserts,
            non_free,
        }
    }

    pub fn len(&self) -> usize {
        self.info.len()
    }

    pub fn is_empty(&self) -> bool {
        self.info.is_empty()
    }

    /// Transitive intra-thread order, including edges out of the initial state.
    pub fn intra(&self, from: Pos, to: Pos) -> bool {
        match (from, to) {
            (Pos::Bot, Pos::At(_)) => true,
            (Pos::At(x), Pos::At(y)) => x < y && self.info.threads[x] == self.info.threads[y],
            _ => false,
        }
    }

    /// Interference edges of the data-flow edge `e`.
    pub fn interfere(&self, e: &DataEdge) -> BTreeSet<Edge> {
        let r = e.to;
        let read = &self.info.reads[r];
        let relevant: BTreeSet<&String> = match e.from {
            Pos::Bot => read.iter().collect(),
            Pos::At(w) => self.info.writes[w].intersection(read).collect(),
        };
        let hits = |j: usize| self.info.writes[j].iter().any(|v| relevant.contains(v));
        let mut out = BTreeSet::new();
        for j in r + 1..self.len() {
            if hits(j) {
                out.insert(Edge {
                    from: Pos::At(r),
                    to: Pos::At(j),
                });
            }
        }
        if let Pos::At(w) = e.from {
            for j in 0..w {
                if hits(j) {
                    out.insert(Edge {
                        from: Pos::At(j),
                        to: Pos::At(w),
                    });
                }
            }
        }
        out
    }

    /// Outgoing cover hops of `x`, sorted by target. A hop that is also a
    /// data-flow or non-free edge is reported with that kind.
    fn hops(&self, x: Pos) -> Vec<(Pos, EdgeKind)> {
        let mut out: BTreeMap<Pos, EdgeKind> = BTreeMap::new();
        for y in 0..self.len() {
            if self.intra(x, Pos::At(y)) {
                out.insert(Pos::At(y), EdgeKind::IntraThreadOrder);
            }
        }
        for e in &self.df_conds {
            if e.from == x {
                out.insert(Pos::At(e.to), EdgeKind::DfConds);
            }
        }
        for e in &self.non_free {
            if e.from == x {
                out.insert(e.to, EdgeKind::NonFreeOrder);
            }
        }
        out.into_iter().collect()
    }

    /// Up to `max` covers of `from -> to`, shortest first, then by node order.
    pub fn find_covers(&self, from: Pos, to: Pos, max: usize) -> Vec<Cover> {
        let adj: BTreeMap<Pos, Vec<(Pos, EdgeKind)>> = std::iter::once(Pos::Bot)
            .chain((0..self.len()).map(Pos::At))
            .map(|x| (x, self.hops(x)))
            .collect();
        let mut out = Vec::new();
        let mut work = 0usize;
        for depth in 1..=self.len() + 1 {
            let mut path = vec![from];
            let mut hops = Vec::new();
            self.dfs(&adj, to, depth, &mut path, &mut hops, &mut out, max, &mut work);
            if out.len() >= max || work > COVER_SEARCH_LIMIT {
                break;
            }
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &self,
        adj: &BTreeMap<Pos, Vec<(Pos, EdgeKind)>>,
        to: Pos,
        depth: usize,
        path: &mut Vec<Pos>,
        hops: &mut Vec<EdgeKind>,
        out: &mut Vec<Cover>,
        max: usize,
        work: &mut usize,
    ) {
        if out.len() >= max || *work > COVER_SEARCH_LIMIT {
            return;
        }
        let x = *path.last().expect("nonempty");
        if hops.len() == depth {
            if x == to {
                out.push(Cover {
                    path: path.clone(),
                    hops: hops.clone(),
                });
            }
            return;
        }
        if x == to {
            return;
        }
        for &(y, k) in &adj[&x] {
            *work += 1;
            if path.contains(&y) {
                continue;
            }
            // Two intra hops in a row collapse into one.
            if k == EdgeKind::IntraThreadOrder && hops.last() == Some(&EdgeKind::IntraThreadOrder) {
                continue;
            }
            path.push(y);
            hops.push(k);
            self.dfs(adj, to, depth, path, hops, out, max, work);
            path.pop();
            hops.pop();
        }
    }

    /// Graphviz rendering; intra-thread order is drawn between neighbours only.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph trace {\n  bot [label=\"⊥\"];\n");
        let name = |p: Pos| match p {
            Pos::Bot => "bot".to_string(),
            Pos::At(i) => format!("n{i}"),
        };
        for i in 0..self.len() {
            let _ = writeln!(
                s,
                "  n{i} [label=\"{}:{}\"];",
                self.info.threads[i], self.info.labels[i]
            );
        }
        let mut last: BTreeMap<usize, usize> = BTreeMap::new();
        for i in 0..self.len() {
            let from = last.insert(self.info.threads[i], i).map_or(Pos::Bot, Pos::At);
            let _ = writeln!(s, "  {} -> n{i} [kind=IntraThreadOrder];", name(from));
        }
        for (kind, set) in [(EdgeKind::DfConds, &self.df_conds), (EdgeKind::DfAsserts, &self.df_asserts)] {
            for e in set {
                let vars: Vec<&str> = e.vars.iter().map(String::as_str).collect();
                let _ = writeln!(
                    s,
                    "  {} -> n{} [kind={}, label=\"{}\"];",
                    name(e.from),
                    e.to,
                    kind.name(),
                    vars.join(",")
                );
            }
        }
        for e in &self.non_free {
            let _ = writeln!(s, "  {} -> {} [kind=NonFreeOrder];", name(e.from), name(e.to));
        }
        s.push_str("}\n");
        s
    }
}
