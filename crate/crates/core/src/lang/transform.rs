//! Program transformations: swaps of adjacent units, atomic-section
//! insertion and wait/notify insertion.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{Block, Node, Program, Stmt, StmtKind};
use super::equiv::units_equivalent;
use super::index::{NodeLoc, ProgramIndex, SeqPath};
use super::LangError;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transformation {
    /// Exchange the unit holding `first` with the unit right after it holding `second`.
    Swap { first: String, second: String },
    /// Wrap the units from the one holding `first` to the one holding `last`
    /// into a new atomic section.
    Atomic { first: String, last: String },
    /// Insert `notify(signal)` after `notify_after` and `wait(signal)` before `wait_before`.
    WaitNotify {
        notify_after: String,
        wait_before: String,
        signal: String,
    },
}

impl fmt::Display for Transformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transformation::Swap { first, second } => write!(f, "swap({first}, {second})"),
            Transformation::Atomic { first, last } => write!(f, "atomic({first}, {last})"),
            Transformation::WaitNotify {
                notify_after,
                wait_before,
                signal,
            } => write!(f, "wait-notify({notify_after} -> {wait_before}, {signal})"),
        }
    }
}

/// The label of the inserted notify statement for `signal`.
pub fn notify_label(signal: &str) -> String {
    format!("notify_{signal}")
}

pub fn wait_label(signal: &str) -> String {
    format!("wait_{signal}")
}

/// A signal variable name not used anywhere in `p`.
pub fn fresh_signal(p: &Program) -> String {
    let vars = p.variables();
    let idx = ProgramIndex::new(p);
    (0..)
        .map(|i| format!("sig{i}"))
        .find(|s| {
            !vars.contains(s)
                && idx.resolve(&notify_label(s)).is_none()
                && idx.resolve(&wait_label(s)).is_none()
        })
        .expect("unbounded search")
}

fn illegal(t: &Transformation, reason: impl Into<String>) -> LangError {
    LangError::IllegalTransformation {
        transformation: t.to_string(),
        reason: reason.into(),
    }
}

/// Location of the node that stands for `label` in its sequence: the
/// enclosing unit for straight-line statements, the node itself otherwise.
fn top_node(idx: &ProgramIndex, label: &str) -> Option<NodeLoc> {
    if let Some((b, u)) = idx.unit_of(label) {
        let block = &idx.blocks[b];
        return Some(NodeLoc {
            thread: block.thread,
            seq: block.seq.clone(),
            index: block.start + u,
        });
    }
    idx.resolve(label).cloned()
}

fn check_thread(p: &Program, t: &Transformation, thread: usize) -> Result<(), LangError> {
    if p.threads[thread].fixed {
        return Err(illegal(
            t,
            format!("thread `{}` is fixed", p.threads[thread].name),
        ));
    }
    Ok(())
}

/// Where a legal transformation acts, resolved against the current program.
enum Site {
    Swap(SeqPath, usize),
    Atomic(SeqPath, usize, usize),
    WaitNotify(NodeLoc, NodeLoc),
}

fn locate(p: &Program, t: &Transformation, bound: Option<i64>) -> Result<Site, LangError> {
    let idx = ProgramIndex::new(p);
    let resolve = |l: &str| top_node(&idx, l).ok_or_else(|| LangError::UnknownLocation(l.into()));
    match t {
        Transformation::Swap { first, second } => {
            let (Some((b1, u1)), Some((b2, u2))) = (idx.unit_of(first), idx.unit_of(second))
            else {
                let l = if idx.unit_of(first).is_none() { first } else { second };
                return match idx.resolve(l) {
                    None => Err(LangError::UnknownLocation(l.clone())),
                    Some(_) => Err(illegal(t, format!("`{l}` is not a straight-line unit"))),
                };
            };
            if b1 != b2 {
                return Err(illegal(t, "units are not in the same basic block"));
            }
            if u2 != u1 + 1 {
                return Err(illegal(t, "first unit does not immediately precede the second"));
            }
            let block = &idx.blocks[b1];
            check_thread(p, t, block.thread)?;
            if let Some(bound) = bound {
                let seq = block.seq.get(p).expect("indexed sequence");
                let (a, b) = (&seq[block.start + u1], &seq[block.start + u2]);
                if !units_equivalent(a, b, bound) {
                    return Err(illegal(t, "units are not sequentially equivalent"));
                }
            }
            Ok(Site::Swap(block.seq.clone(), block.start + u1))
        }
        Transformation::Atomic { first, last } => {
            let a = resolve(first)?;
            let b = resolve(last)?;
            if a.seq != b.seq {
                return Err(illegal(t, "locations are not in the same statement sequence"));
            }
            if a.index >= b.index {
                return Err(illegal(t, "first location does not precede the last"));
            }
            check_thread(p, t, a.thread)?;
            Ok(Site::Atomic(a.seq, a.index, b.index))
        }
        Transformation::WaitNotify {
            notify_after,
            wait_before,
            signal,
        } => {
            let n = resolve(notify_after)?;
            let w = resolve(wait_before)?;
            if n.thread == w.thread {
                return Err(illegal(t, "notify and wait must be in different threads"));
            }
            check_thread(p, t, n.thread)?;
            check_thread(p, t, w.thread)?;
            if p.variables().contains(signal)
                || idx.resolve(&notify_label(signal)).is_some()
                || idx.resolve(&wait_label(signal)).is_some()
            {
                return Err(illegal(t, format!("signal `{signal}` is not fresh")));
            }
            Ok(Site::WaitNotify(n, w))
        }
    }
}

/// Check legality; `bound` is the domain bound for the equivalence check.
pub fn check_transformation(p: &Program, t: &Transformation, bound: i64) -> Result<(), LangError> {
    locate(p, t, Some(bound)).map(|_| ())
}

/// Apply a legal transformation, returning the new program.
pub fn apply_transformation(
    p: &Program,
    t: &Transformation,
    bound: i64,
) -> Result<Program, LangError> {
    let site = locate(p, t, Some(bound))?;
    Ok(apply_site(p, t, site))
}

/// Apply without the sequential-equivalence check (structural checks still run).
pub fn apply_structural(p: &Program, t: &Transformation) -> Result<Program, LangError> {
    let site = locate(p, t, None)?;
    Ok(apply_site(p, t, site))
}

fn apply_site(p: &Program, t: &Transformation, site: Site) -> Program {
    let mut out = p.clone();
    match site {
        Site::Swap(seq, i) => {
            seq.get_mut(&mut out).expect("located").swap(i, i + 1);
        }
        Site::Atomic(seq, i, j) => {
            let s = seq.get_mut(&mut out).expect("located");
            let body: Vec<Node> = s.drain(i..=j).collect();
            s.insert(i, Node::Atomic(Block { name: None, body }));
        }
        Site::WaitNotify(n, w) => {
            let Transformation::WaitNotify { signal, .. } = t else {
                unreachable!()
            };
            let notify = Node::Stmt(Stmt::new(notify_label(signal), StmtKind::Notify(signal.clone())));
            let wait = Node::Stmt(Stmt::new(wait_label(signal), StmtKind::Wait(signal.clone())));
            // Different threads, so the two insertions do not disturb each other.
            n.seq.get_mut(&mut out).expect("located").insert(n.index + 1, notify);
            w.seq.get_mut(&mut out).expect("located").insert(w.index, wait);
        }
    }
    out
}

/// Whether `t` acts across preemption points in `p`: a swap with an await
/// unit, or an atomic section whose later units start with an await.
pub fn acts_across_preemption(p: &Program, t: &Transformation) -> bool {
    let idx = ProgramIndex::new(p);
    let starts_with_pp = |loc: &NodeLoc| {
        loc.seq
            .get(p)
            .and_then(|s| s.get(loc.index))
            .and_then(Node::first_leaf)
            .is_some_and(Stmt::is_preemption_point)
    };
    match t {
        Transformation::Swap { first, second } => [first, second]
            .iter()
            .filter_map(|l| top_node(&idx, l))
            .any(|l| starts_with_pp(&l)),
        Transformation::Atomic { first, last } => {
            match (top_node(&idx, first), top_node(&idx, last)) {
                (Some(a), Some(b)) if a.seq == b.seq => (a.index + 1..=b.index).any(|i| {
                    starts_with_pp(&NodeLoc {
                        thread: a.thread,
                        seq: a.seq.clone(),
                        index: i,
                    })
                }),
                _ => false,
            }
        }
        Transformation::WaitNotify { .. } => false,
    }
}

/// Every legal swap and two-unit atomic section between neighbouring units.
pub fn neighbour_transformations(p: &Program, bound: i64) -> Vec<Transformation> {
    let idx = ProgramIndex::new(p);
    let mut out = Vec::new();
    for b in &idx.blocks {
        for w in b.unit_names.windows(2) {
            let swap = Transformation::Swap {
                first: w[0].clone(),
                second: w[1].clone(),
            };
            let atomic = Transformation::Atomic {
                first: w[0].clone(),
                last: w[1].clone(),
            };
            for t in [swap, atomic] {
                if check_transformation(p, &t, bound).is_ok() {
                    out.push(t);
                }
            }
        }
    }
    out
}
