//! Threads compiled to flat instruction lists, and the single-step relation.

use std::collections::HashMap;
use std::sync::Arc;

use crate::lang::ast::{Node, Program, Stmt, ERR_VAR};
use crate::lang::semantics::{exec, Exec, Fault, Store};

use super::Bounds;

#[derive(Clone, Debug)]
pub enum Instr {
    Leaf(Stmt),
    /// `if (*)` or `while (*)`: choice 0 falls through, choice 1 jumps to `alt`.
    Branch {
        label: String,
        alt: usize,
        loop_id: Option<usize>,
    },
    Jump(usize),
    AtomicBegin,
    AtomicEnd,
}

/// A leaf or branch executed by one thread.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Step {
    pub label: String,
    pub choice: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct State {
    pub pcs: Vec<usize>,
    /// Iteration counters of every loop, indexed by global loop id.
    pub loops: Vec<u32>,
    pub vals: Vec<i64>,
}

/// One way a thread can take a scheduling step.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub state: State,
    pub steps: Vec<Step>,
    /// Valuation after each step, parallel to `steps`.
    pub vals: Vec<Vec<i64>>,
}

pub struct Machine {
    pub vars: Arc<Vec<String>>,
    var_ix: HashMap<String, usize>,
    pub threads: Vec<Vec<Instr>>,
    pub bounds: Bounds,
    nloops: usize,
    /// Label to `(thread, pc)` for leaves and branches.
    pub pcs: HashMap<String, (usize, usize)>,
    init: Vec<i64>,
}

pub(crate) struct VStore<'a> {
    ix: &'a HashMap<String, usize>,
    vals: &'a mut Vec<i64>,
}

impl Store for VStore<'_> {
    fn get(&self, var: &str) -> i64 {
        self.ix.get(var).map_or(0, |&i| self.vals[i])
    }

    fn set(&mut self, var: &str, value: i64) {
        let i = self.ix[var];
        self.vals[i] = value;
    }
}

struct Compiler {
    code: Vec<Instr>,
    nloops: usize,
}

impl Compiler {
    fn seq(&mut self, nodes: &[Node]) {
        for n in nodes {
            self.node(n);
        }
    }

    fn node(&mut self, n: &Node) {
        match n {
            Node::Stmt(s) => self.code.push(Instr::Leaf(s.clone())),
            Node::Group(b) => self.seq(&b.body),
            Node::Atomic(b) => {
                self.code.push(Instr::AtomicBegin);
                self.seq(&b.body);
                self.code.push(Instr::AtomicEnd);
            }
            Node::If {
                label,
                then_branch,
                else_branch,
            } => {
                let at = self.code.len();
                self.code.push(Instr::Jump(0));
                self.seq(then_branch);
                let jump = self.code.len();
                self.code.push(Instr::Jump(0));
                let alt = self.code.len();
                self.seq(else_branch);
                let end = self.code.len();
                self.code[at] = Instr::Branch {
                    label: label.clone(),
                    alt,
                    loop_id: None,
                };
                self.code[jump] = Instr::Jump(end);
            }
            Node::While { label, body } => {
                let at = self.code.len();
                let id = self.nloops;
                self.nloops += 1;
                self.code.push(Instr::Jump(0));
                self.seq(body);
                self.code.push(Instr::Jump(at));
                self.code[at] = Instr::Branch {
                    label: label.clone(),
                    alt: self.code.len(),
                    loop_id: Some(id),
                };
            }
        }
    }
}

impl Machine {
    pub fn new(p: &Program, bounds: Bounds) -> Self {
        Machine::with_vars(p, bounds, &p.variables())
    }

    /// Build a machine over a variable universe that includes `vars`.
    pub fn with_vars(p: &Program, bounds: Bounds, vars: &[String]) -> Self {
        let mut all: Vec<String> = p.variables();
        all.extend(vars.iter().cloned());
        all.sort();
        all.dedup();
        let var_ix: HashMap<String, usize> =
            all.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        let mut c = Compiler {
            code: Vec::new(),
            nloops: 0,
        };
        let mut threads = Vec::new();
        let mut pcs = HashMap::new();
        for (t, th) in p.threads.iter().enumerate() {
            c.code.clear();
            c.seq(&th.body);
            for (pc, ins) in c.code.iter().enumerate() {
                match ins {
                    Instr::Leaf(s) => {
                        pcs.insert(s.label.clone(), (t, pc));
                    }
                    Instr::Branch { label, .. } => {
                        pcs.insert(label.clone(), (t, pc));
                    }
                    _ => {}
                }
            }
            threads.push(std::mem::take(&mut c.code));
        }
        let init = all.iter().map(|v| p.initial_value(v)).collect();
        Machine {
            vars: Arc::new(all),
            var_ix,
            threads,
            bounds,
            nloops: c.nloops,
            pcs,
            init,
        }
    }

    pub fn var_index(&self, v: &str) -> Option<usize> {
        self.var_ix.get(v).copied()
    }

    pub fn err_index(&self) -> usize {
        self.var_ix[ERR_VAR]
    }

    pub fn initial_vals(&self) -> Vec<i64> {
        self.init.clone()
    }

    pub fn initial(&self) -> State {
        let mut s = State {
            pcs: vec![0; self.threads.len()],
            loops: vec![0; self.nloops],
            vals: self.initial_vals(),
        };
        for t in 0..self.threads.len() {
            s.pcs[t] = self.settle(t, 0);
        }
        s
    }

    /// Follow jumps so that a pc always rests on an executable instruction.
    fn settle(&self, t: usize, mut pc: usize) -> usize {
        while let Some(Instr::Jump(target)) = self.threads[t].get(pc) {
            pc = *target;
        }
        pc
    }

    pub fn is_done(&self, s: &State, t: usize) -> bool {
        s.pcs[t] >= self.threads[t].len()
    }

    pub fn all_done(&self, s: &State) -> bool {
        (0..self.threads.len()).all(|t| self.is_done(s, t))
    }

    /// The statement thread `t` executes next, looking into an atomic section.
    pub fn next_stmt(&self, s: &State, t: usize) -> Option<&Stmt> {
        let mut pc = s.pcs[t];
        loop {
            match self.threads[t].get(pc)? {
                Instr::Leaf(st) => return Some(st),
                Instr::AtomicBegin => pc += 1,
                _ => return None,
            }
        }
    }

    /// Whether thread `t` sits at a preemption point (or has finished).
    pub fn at_preemption_point(&self, s: &State, t: usize) -> bool {
        self.is_done(s, t) || self.next_stmt(s, t).is_some_and(Stmt::is_preemption_point)
    }

    pub fn exec_stmt(&self, st: &Stmt, vals: &mut Vec<i64>) -> Result<Exec, Fault> {
        let mut store = VStore {
            ix: &self.var_ix,
            vals,
        };
        exec(st, &mut store, self.bounds.domain_bound)
    }

    /// Value of `var` in `vals`; unknown variables read as 0.
    pub fn value(&self, vals: &[i64], var: &str) -> i64 {
        self.var_ix.get(var).map_or(0, |&i| vals[i])
    }

    /// Branch choices allowed at a branch instruction.
    fn branch_choices(&self, s: &State, loop_id: Option<usize>) -> Vec<u8> {
        match loop_id {
            Some(id) if s.loops[id] >= self.bounds.loop_unroll => vec![1],
            _ => vec![0, 1],
        }
    }

    fn take_branch(&self, s: &mut State, t: usize, choice: u8) {
        let Instr::Branch { alt, loop_id, .. } = &self.threads[t][s.pcs[t]] else {
            unreachable!("not a branch")
        };
        if let Some(id) = loop_id {
            if choice == 0 {
                s.loops[*id] += 1;
            } else {
                s.loops[*id] = 0;
            }
        }
        let next = if choice == 0 { s.pcs[t] + 1 } else { *alt };
        s.pcs[t] = self.settle(t, next);
    }

    /// All ways thread `t` can take its next scheduling step. An empty result
    /// means the thread is finished, blocked, or its path is infeasible.
    pub fn successors(&self, s: &State, t: usize) -> Result<Vec<Outcome>, Fault> {
        if self.is_done(s, t) {
            return Ok(Vec::new());
        }
        match &self.threads[t][s.pcs[t]] {
            Instr::Leaf(st) => {
                let mut next = s.clone();
                match self.exec_stmt(st, &mut next.vals)? {
                    Exec::Continue => {
                        next.pcs[t] = self.settle(t, s.pcs[t] + 1);
                        Ok(vec![Outcome {
                            steps: vec![Step {
                                label: st.label.clone(),
                                choice: None,
                            }],
                            vals: vec![next.vals.clone()],
                            state: next,
                        }])
                    }
                    Exec::Blocked | Exec::Infeasible => Ok(Vec::new()),
                }
            }
            Instr::Branch { label, loop_id, .. } => Ok(self
                .branch_choices(s, *loop_id)
                .into_iter()
                .map(|c| {
                    let mut next = s.clone();
                    self.take_branch(&mut next, t, c);
                    Outcome {
                        steps: vec![Step {
                            label: label.clone(),
                            choice: Some(c),
                        }],
                        vals: vec![next.vals.clone()],
                        state: next,
                    }
                })
                .collect()),
            Instr::AtomicBegin => {
                let mut out = Vec::new();
                let mut start = s.clone();
                start.pcs[t] += 1;
                self.atomic_paths(t, start, 1, Vec::new(), Vec::new(), &mut out)?;
                Ok(out)
            }
            Instr::Jump(_) | Instr::AtomicEnd => unreachable!("pc is settled"),
        }
    }

    /// Depth-first enumeration of the paths through an atomic section.
    fn atomic_paths(
        &self,
        t: usize,
        mut s: State,
        depth: usize,
        steps: Vec<Step>,
        vals: Vec<Vec<i64>>,
        out: &mut Vec<Outcome>,
    ) -> Result<(), Fault> {
        let (mut steps, mut vals) = (steps, vals);
        let mut depth = depth;
        loop {
            match &self.threads[t][s.pcs[t]] {
                Instr::AtomicEnd => {
                    depth -= 1;
                    s.pcs[t] = self.settle(t, s.pcs[t] + 1);
                    if depth == 0 {
                        out.push(Outcome {
                            state: s,
                            steps,
                            vals,
                        });
                        return Ok(());
                    }
                }
                Instr::AtomicBegin => {
                    depth += 1;
                    s.pcs[t] += 1;
                }
                Instr::Jump(target) => s.pcs[t] = *target,
                Instr::Leaf(st) => match self.exec_stmt(st, &mut s.vals)? {
                    Exec::Continue => {
                        s.pcs[t] += 1;
                        steps.push(Step {
                            label: st.label.clone(),
                            choice: None,
                        });
                        vals.push(s.vals.clone());
                    }
                    Exec::Blocked | Exec::Infeasible => return Ok(()),
                },
                Instr::Branch { label, loop_id, .. } => {
                    for c in self.branch_choices(&s, *loop_id) {
                        let mut next = s.clone();
                        self.take_branch(&mut next, t, c);
                        let mut st2 = steps.clone();
                        st2.push(Step {
                            label: label.clone(),
                            choice: Some(c),
                        });
                        let mut v2 = vals.clone();
                        v2.push(next.vals.clone());
                        self.atomic_paths(t, next, depth, st2, v2, out)?;
                    }
                    return Ok(());
                }
            }
        }
    }
}
