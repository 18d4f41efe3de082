//! Positional index over a program: where every label lives, basic blocks,
//! reordering units and atomic-section membership.

use std::collections::{HashMap, HashSet};

use super::ast::{Node, Program};

/// Identifies a statement sequence: the thread body, then a chain of
/// `(index of node in parent sequence, child selector)` steps.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeqPath {
    pub thread: usize,
    pub steps: Vec<(usize, usize)>,
}

impl SeqPath {
    pub fn root(thread: usize) -> Self {
        SeqPath {
            thread,
            steps: Vec::new(),
        }
    }

    pub fn child(&self, index: usize, selector: usize) -> Self {
        let mut steps = self.steps.clone();
        steps.push((index, selector));
        SeqPath {
            thread: self.thread,
            steps,
        }
    }

    pub fn get<'a>(&self, p: &'a Program) -> Option<&'a Vec<Node>> {
        let mut seq = &p.threads.get(self.thread)?.body;
        for &(i, sel) in &self.steps {
            seq = seq.get(i)?.children().into_iter().nth(sel)?;
        }
        Some(seq)
    }

    pub fn get_mut<'a>(&self, p: &'a mut Program) -> Option<&'a mut Vec<Node>> {
        let mut seq = &mut p.threads.get_mut(self.thread)?.body;
        for &(i, sel) in &self.steps {
            seq = seq.get_mut(i)?.children_mut().into_iter().nth(sel)?;
        }
        Some(seq)
    }
}

/// Position of one node in the program tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodeLoc {
    pub thread: usize,
    pub seq: SeqPath,
    pub index: usize,
}

/// A maximal run of straight-line units in one statement sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: usize,
    pub thread: usize,
    pub seq: SeqPath,
    /// Range of the run inside its sequence.
    pub start: usize,
    pub end: usize,
    /// Leaf labels of every unit, in program order.
    pub units: Vec<Vec<String>>,
    /// Name of each unit (leaf label, container name, or first leaf label).
    pub unit_names: Vec<String>,
}

impl BasicBlock {
    pub fn locations(&self) -> Vec<String> {
        self.units.iter().flatten().cloned().collect()
    }
}

#[derive(Clone, Debug)]
pub struct LeafInfo {
    pub thread: usize,
    /// Pre-order position among the thread's leaves.
    pub order: usize,
    pub block: usize,
    pub unit: usize,
    /// Ids of the atomic containers enclosing the leaf, outermost first.
    pub atomics: Vec<usize>,
    pub preemption_point: bool,
}

#[derive(Clone, Debug)]
pub struct ProgramIndex {
    pub leaves: HashMap<String, LeafInfo>,
    /// Every leaf label, container name and branch label.
    pub nodes: HashMap<String, NodeLoc>,
    pub blocks: Vec<BasicBlock>,
    /// Leaf labels of every named node (containers and leaves).
    node_leaves: HashMap<String, Vec<String>>,
    straight: HashSet<String>,
}

struct Builder<'a> {
    program: &'a Program,
    idx: ProgramIndex,
    order: Vec<usize>,
    next_atomic: usize,
}

impl ProgramIndex {
    pub fn new(p: &Program) -> Self {
        let mut b = Builder {
            program: p,
            idx: ProgramIndex {
                leaves: HashMap::new(),
                nodes: HashMap::new(),
                blocks: Vec::new(),
                node_leaves: HashMap::new(),
                straight: HashSet::new(),
            },
            order: vec![0; p.threads.len()],
            next_atomic: 0,
        };
        for t in 0..p.threads.len() {
            b.walk_seq(&SeqPath::root(t), &mut Vec::new());
        }
        b.idx
    }

    pub fn resolve(&self, label: &str) -> Option<&NodeLoc> {
        self.nodes.get(label)
    }

    /// Leaves belonging to the node named `label`.
    pub fn leaves_of(&self, label: &str) -> Option<&[String]> {
        self.node_leaves.get(label).map(Vec::as_slice)
    }

    /// The top-level reordering unit containing `label`, as `(block, unit)`.
    pub fn unit_of(&self, label: &str) -> Option<(usize, usize)> {
        if let Some(l) = self.leaves.get(label) {
            return Some((l.block, l.unit));
        }
        // Containers that hold branches are not units of any block.
        if !self.straight.contains(label) {
            return None;
        }
        let first = self.node_leaves.get(label)?.first()?;
        let l = self.leaves.get(first)?;
        Some((l.block, l.unit))
    }

    pub fn unit_name(&self, block: usize, unit: usize) -> &str {
        &self.blocks[block].unit_names[unit]
    }

    /// Name of the unit containing `label`.
    pub fn unit_name_of(&self, label: &str) -> Option<&str> {
        self.unit_of(label).map(|(b, u)| self.unit_name(b, u))
    }

    /// Leaf position range `(first, last)` of a labelled node within its thread.
    pub fn span(&self, label: &str) -> Option<(usize, usize, usize)> {
        let leaves = self.node_leaves.get(label)?;
        let first = self.leaves.get(leaves.first()?)?;
        let last = self.leaves.get(leaves.last()?)?;
        Some((first.thread, first.order, last.order))
    }

    pub fn in_common_atomic(&self, a: &str, b: &str) -> bool {
        let (Some(la), Some(lb)) = (self.node_leaves.get(a), self.node_leaves.get(b)) else {
            return false;
        };
        let Some(first) = la.first().and_then(|l| self.leaves.get(l)) else {
            return false;
        };
        first.atomics.iter().any(|id| {
            la.iter()
                .chain(lb.iter())
                .all(|l| self.leaves.get(l).is_some_and(|i| i.atomics.contains(id)))
        })
    }

    /// True when the unit `label` starts with an await.
    pub fn starts_with_preemption_point(&self, label: &str) -> bool {
        self.node_leaves
            .get(label)
            .and_then(|ls| ls.first())
            .and_then(|l| self.leaves.get(l))
            .is_some_and(|i| i.preemption_point)
    }
}

impl Builder<'_> {
    fn register(&mut self, name: &str, loc: NodeLoc, leaves: Vec<String>) {
        self.idx.nodes.insert(name.to_string(), loc);
        self.idx.node_leaves.insert(name.to_string(), leaves);
    }

    fn walk_seq(&mut self, path: &SeqPath, atomics: &mut Vec<usize>) {
        let seq = path.get(self.program).expect("valid path");
        let mut run_start: Option<usize> = None;
        for (i, node) in seq.iter().enumerate() {
            if node.is_straight_line() {
                run_start.get_or_insert(i);
            } else {
                if let Some(s) = run_start.take() {
                    self.flush_block(path, s, i, atomics);
                }
                self.walk_compound(path, i, node, atomics);
            }
        }
        if let Some(s) = run_start {
            self.flush_block(path, s, seq.len(), atomics);
        }
    }

    fn walk_compound(&mut self, path: &SeqPath, i: usize, node: &Node, atomics: &mut Vec<usize>) {
        let loc = NodeLoc {
            thread: path.thread,
            seq: path.clone(),
            index: i,
        };
        let leaves: Vec<String> = node.leaves().iter().map(|s| s.label.clone()).collect();
        let pushed = matches!(node, Node::Atomic(_));
        if pushed {
            atomics.push(self.next_atomic);
            self.next_atomic += 1;
        }
        match node {
            Node::If { label, .. } | Node::While { label, .. } => {
                self.register(label, loc, leaves)
            }
            Node::Atomic(b) | Node::Group(b) => {
                if let Some(n) = &b.name {
                    self.register(n, loc, leaves)
                }
            }
            Node::Stmt(_) => unreachable!("statements are straight-line"),
        }
        for sel in 0..node.children().len() {
            self.walk_seq(&path.child(i, sel), atomics);
        }
        if pushed {
            atomics.pop();
        }
    }

    fn flush_block(&mut self, path: &SeqPath, start: usize, end: usize, atomics: &mut Vec<usize>) {
        let id = self.idx.blocks.len();
        let seq = path.get(self.program).expect("valid path");
        let mut units = Vec::new();
        let mut names = Vec::new();
        for (u, i) in (start..end).enumerate() {
            let node = &seq[i];
            let mut labels = Vec::new();
            self.walk_unit(path, i, node, id, u, atomics, &mut labels);
            names.push(node.unit_name().unwrap_or_default().to_string());
            units.push(labels);
        }
        self.idx.blocks.push(BasicBlock {
            id,
            thread: path.thread,
            seq: path.clone(),
            start,
            end,
            units,
            unit_names: names,
        });
    }

    #[allow(clippy::too_many_arguments)]
    fn walk_unit(
        &mut self,
        path: &SeqPath,
        i: usize,
        node: &Node,
        block: usize,
        unit: usize,
        atomics: &mut Vec<usize>,
        labels: &mut Vec<String>,
    ) {
        let loc = NodeLoc {
            thread: path.thread,
            seq: path.clone(),
            index: i,
        };
        match node {
            Node::Stmt(s) => {
                let t = path.thread;
                self.idx.leaves.insert(
                    s.label.clone(),
                    LeafInfo {
                        thread: t,
                        order: self.order[t],
                        block,
                        unit,
                        atomics: atomics.clone(),
                        preemption_point: s.is_preemption_point(),
                    },
                );
                self.order[t] += 1;
                self.register(&s.label, loc, vec![s.label.clone()]);
                labels.push(s.label.clone());
            }
            Node::Atomic(b) | Node::Group(b) => {
                let pushed = matches!(node, Node::Atomic(_));
                if pushed {
                    atomics.push(self.next_atomic);
                    self.next_atomic += 1;
                }
                let inner = path.child(i, 0);
                let start = labels.len();
                for (j, child) in b.body.iter().enumerate() {
                    self.walk_unit(&inner, j, child, block, unit, atomics, labels);
                }
                if let Some(n) = &b.name {
                    self.register(n, loc, labels[start..].to_vec());
                    self.idx.straight.insert(n.clone());
                }
                if pushed {
                    atomics.pop();
                }
            }
            Node::If { .. } | Node::While { .. } => unreachable!("units are straight-line"),
        }
    }
}
