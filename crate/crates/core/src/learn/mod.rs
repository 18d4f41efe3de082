//! Learning regression-preventing constraints from good traces.

pub mod oracle;
pub mod regression;

pub use oracle::{sound_complete_oracle, OracleError};
pub use regression::{check_regression, failing_asserts, Regression};

use std::collections::HashMap;

use crate::constraint::{unit_ordering, Atom, Constraint};
use crate::explore::Trace;
use crate::graph::{Edge, GraphError, Pos, TraceGraph, TraceInfo, MAX_COVERS};
use crate::lang::ast::Program;
use crate::lang::index::ProgramIndex;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LearnConfig {
    /// Fall back to freezing all intra-thread orders when an edge has no cover.
    pub sound_fallback: bool,
    pub max_covers: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            sound_fallback: false,
            max_covers: MAX_COVERS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Learned {
    pub constraint: Constraint,
    /// Edges without a cover, as `(from label, to label)`.
    pub uncovered: Vec<(String, String)>,
    pub fallback_used: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LearnError {
    #[error("trace is not good")]
    NotGood,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Tag every event with its basic-block activation `(block, counter)`. Events
/// are `(thread, label)` pairs, with no label for branch decisions. Events of
/// one thread share a tag while they stay in one block without passing a branch.
pub fn activation_tags<'a>(
    idx: &ProgramIndex,
    events: impl IntoIterator<Item = (usize, Option<&'a str>)>,
) -> Vec<Option<(usize, usize)>> {
    let mut prev: HashMap<usize, Option<usize>> = HashMap::new();
    let mut counter: HashMap<usize, usize> = HashMap::new();
    let mut out = Vec::new();
    for (t, label) in events {
        let block = label.and_then(|l| idx.unit_of(l)).map(|(b, _)| b);
        let last = prev.insert(t, block).flatten();
        out.push(block.map(|b| {
            let c = counter.entry(t).or_insert(0);
            if last != Some(b) {
                *c += 1;
            }
            (b, *c)
        }));
    }
    out
}

fn activations(idx: &ProgramIndex, info: &TraceInfo) -> Vec<Option<(usize, usize)>> {
    activation_tags(
        idx,
        (0..info.len()).map(|i| (info.threads[i], info.stmts[i].as_ref().map(|_| info.labels[i].as_str()))),
    )
}

fn label(info: &TraceInfo, p: Pos) -> String {
    match p {
        Pos::Bot => "⊥".into(),
        Pos::At(i) => info.labels[i].clone(),
    }
}

/// Ordering atom for an intra-thread edge, if it lies within one block activation.
fn intra_atom(
    idx: &ProgramIndex,
    info: &TraceInfo,
    act: &[Option<(usize, usize)>],
    e: Edge,
) -> Option<Atom> {
    let (Pos::At(x), Pos::At(y)) = (e.from, e.to) else {
        return None;
    };
    let same = act[x].is_some() && act[x] == act[y];
    if !same {
        return None;
    }
    unit_ordering(idx, &info.labels[x], &info.labels[y])
}

/// Orders between neighbouring positions of each thread in one block activation.
fn all_intra_orders(idx: &ProgramIndex, info: &TraceInfo, act: &[Option<(usize, usize)>]) -> Constraint {
    let mut last: HashMap<usize, usize> = HashMap::new();
    let mut atoms = Vec::new();
    for i in 0..info.len() {
        if let Some(j) = last.insert(info.threads[i], i) {
            let e = Edge {
                from: Pos::At(j),
                to: Pos::At(i),
            };
            if let Some(a) = intra_atom(idx, info, act, e) {
                atoms.push(Constraint::Atom(a));
            }
        }
    }
    Constraint::and(atoms)
}

/// Learn a regression-preventing constraint from the good trace `tr` of `p`.
pub fn learn_good(p: &Program, tr: &Trace, cfg: LearnConfig) -> Result<Learned, LearnError> {
    if tr.is_bad() {
        return Err(LearnError::NotGood);
    }
    let g = TraceGraph::build(p, tr)?;
    Ok(learn_from_graph(p, &g, cfg))
}

pub fn learn_from_graph(p: &Program, g: &TraceGraph, cfg: LearnConfig) -> Learned {
    let idx = ProgramIndex::new(p);
    let act = activations(&idx, &g.info);
    let mut edges: Vec<Edge> = Vec::new();
    for f in &g.df_asserts {
        edges.push(Edge {
            from: f.from,
            to: Pos::At(f.to),
        });
        edges.extend(g.interfere(f));
    }
    edges.sort();
    edges.dedup();
    let mut parts = Vec::new();
    let mut uncovered = Vec::new();
    for e in edges {
        let covers = g.find_covers(e.from, e.to, cfg.max_covers);
        if covers.is_empty() {
            uncovered.push((label(&g.info, e.from), label(&g.info, e.to)));
            if cfg.sound_fallback {
                return Learned {
                    constraint: all_intra_orders(&idx, &g.info, &act),
                    uncovered,
                    fallback_used: true,
                };
            }
            continue;
        }
        let disjuncts = covers.iter().map(|c| {
            Constraint::and(
                c.intra_edges()
                    .into_iter()
                    .filter_map(|h| intra_atom(&idx, &g.info, &act, h))
                    .map(Constraint::Atom),
            )
        });
        parts.push(Constraint::or(disjuncts));
    }
    Learned {
        constraint: Constraint::and(parts),
        uncovered,
        fallback_used: false,
    }
}
