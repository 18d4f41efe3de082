//! Schedule enumeration, bad-trace search and verification.

use std::collections::{HashSet, VecDeque};
use std::ops::ControlFlow;

use crate::lang::ast::Program;

use super::machine::{Instr, Machine, Outcome, State};
use super::replay::{replay_with_state, ReplayError};
use super::trace::{Event, Trace};
use super::{Bounds, ExploreError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Policy {
    All,
    /// Switch threads only at preemption points or thread completion.
    PreemptionFreeOnly,
    /// Switch threads only at thread completion.
    SequentialOnly,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EnumStats {
    pub traces: usize,
    /// Some branch was cut by a bound; the enumeration is not exhaustive.
    pub truncated: bool,
}

struct Dfs<'a> {
    m: &'a Machine,
    policy: Policy,
    events: Vec<Event>,
    states: Vec<Vec<i64>>,
    stats: EnumStats,
    visit: &'a mut dyn FnMut(Trace) -> ControlFlow<()>,
}

impl Dfs<'_> {
    fn emit(&mut self, s: &State, truncated: bool) -> ControlFlow<()> {
        self.stats.traces += 1;
        self.stats.truncated |= truncated;
        let trace = Trace {
            vars: self.m.vars.clone(),
            init: self.m.initial_vals(),
            events: self.events.clone(),
            states: self.states.clone(),
            complete: self.m.all_done(s),
            truncated,
        };
        (self.visit)(trace)?;
        if self.stats.traces >= self.m.bounds.max_traces {
            self.stats.truncated = true;
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    }

    fn allowed(&self, s: &State) -> Vec<usize> {
        let all: Vec<usize> = (0..self.m.threads.len()).collect();
        let Some(last) = self.events.last() else {
            return all;
        };
        let keep = match self.policy {
            Policy::All => true,
            Policy::PreemptionFreeOnly => last.switch_ok,
            Policy::SequentialOnly => last.done_after,
        };
        if keep || self.m.is_done(s, last.thread) {
            all
        } else {
            vec![last.thread]
        }
    }

    fn run(&mut self, s: &State) -> Result<ControlFlow<()>, ExploreError> {
        let mut moves: Vec<(usize, Outcome)> = Vec::new();
        for t in self.allowed(s) {
            for o in self.m.successors(s, t)? {
                moves.push((t, o));
            }
        }
        if moves.is_empty() {
            return Ok(self.emit(s, false));
        }
        if self.events.len() >= self.m.bounds.max_steps {
            return Ok(self.emit(s, true));
        }
        for (t, o) in moves {
            let n = self.events.len();
            push_outcome(self.m, &mut self.events, &mut self.states, t, &o);
            let flow = self.run(&o.state)?;
            self.events.truncate(n);
            self.states.truncate(n);
            if flow.is_break() {
                return Ok(flow);
            }
        }
        Ok(ControlFlow::Continue(()))
    }
}

/// Append the events of one scheduling step of thread `t`.
pub(crate) fn push_outcome(
    m: &Machine,
    events: &mut Vec<Event>,
    states: &mut Vec<Vec<i64>>,
    t: usize,
    o: &Outcome,
) {
    let k = o.steps.len();
    let done = m.is_done(&o.state, t);
    let switch_ok = m.at_preemption_point(&o.state, t);
    for (j, (st, vals)) in o.steps.iter().zip(&o.vals).enumerate() {
        events.push(Event {
            id: events.len(),
            thread: t,
            label: st.label.clone(),
            choice: st.choice,
            pending: false,
            done_after: j + 1 == k && done,
            switch_ok: j + 1 == k && switch_ok,
            in_step: j > 0,
        });
        states.push(vals.clone());
    }
}

/// Visit every maximal trace under `policy` in deterministic order (lower
/// thread index first, then branch choice 0 before 1).
pub fn enumerate_traces(
    p: &Program,
    bounds: Bounds,
    policy: Policy,
    visit: &mut dyn FnMut(Trace) -> ControlFlow<()>,
) -> Result<EnumStats, ExploreError> {
    bounds.validate()?;
    let m = Machine::new(p, bounds);
    enumerate_machine(&m, policy, visit)
}

pub fn enumerate_machine(
    m: &Machine,
    policy: Policy,
    visit: &mut dyn FnMut(Trace) -> ControlFlow<()>,
) -> Result<EnumStats, ExploreError> {
    let mut dfs = Dfs {
        m,
        policy,
        events: Vec::new(),
        states: Vec::new(),
        stats: EnumStats::default(),
        visit,
    };
    let _ = dfs.run(&m.initial())?;
    Ok(dfs.stats)
}

/// Collect all traces under `policy`.
pub fn collect_traces(
    p: &Program,
    bounds: Bounds,
    policy: Policy,
) -> Result<(Vec<Trace>, EnumStats), ExploreError> {
    let mut out = Vec::new();
    let stats = enumerate_traces(p, bounds, policy, &mut |t| {
        out.push(t);
        ControlFlow::Continue(())
    })?;
    Ok((out, stats))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Correct,
    Bad(Trace),
    /// A bound was hit before the search could finish.
    Unknown,
}

/// Breadth-first search for a shortest bad trace.
pub fn find_bad_trace(p: &Program, bounds: Bounds) -> Result<Verdict, ExploreError> {
    bounds.validate()?;
    find_bad_machine(&Machine::new(p, bounds))
}

pub fn verify(p: &Program, bounds: Bounds) -> Result<Verdict, ExploreError> {
    find_bad_trace(p, bounds)
}

struct Node {
    parent: usize,
    thread: usize,
    outcome: Outcome,
    len: usize,
}

pub fn find_bad_machine(m: &Machine) -> Result<Verdict, ExploreError> {
    let err = m.err_index();
    let init = m.initial();
    if init.vals[err] != 0 {
        return Ok(Verdict::Correct);
    }
    let mut seen: HashSet<State> = HashSet::new();
    seen.insert(init.clone());
    let mut nodes: Vec<Node> = Vec::new();
    let mut queue: VecDeque<(Option<usize>, State, usize)> = VecDeque::from([(None, init, 0)]);
    let mut truncated = false;
    while let Some((at, s, len)) = queue.pop_front() {
        for t in 0..m.threads.len() {
            for o in m.successors(&s, t)? {
                if seen.contains(&o.state) {
                    continue;
                }
                if len >= m.bounds.max_steps || seen.len() >= m.bounds.max_traces {
                    truncated = true;
                    continue;
                }
                seen.insert(o.state.clone());
                let bad = o.state.vals[err] == 1;
                let next_len = len + o.steps.len();
                nodes.push(Node {
                    parent: at.unwrap_or(usize::MAX),
                    thread: t,
                    outcome: o,
                    len: next_len,
                });
                let id = nodes.len() - 1;
                if bad {
                    return Ok(Verdict::Bad(rebuild(m, &nodes, id)));
                }
                queue.push_back((Some(id), nodes[id].outcome.state.clone(), next_len));
            }
        }
    }
    Ok(if truncated {
        Verdict::Unknown
    } else {
        Verdict::Correct
    })
}

fn rebuild(m: &Machine, nodes: &[Node], mut id: usize) -> Trace {
    let mut path = Vec::new();
    while id != usize::MAX {
        path.push(id);
        id = nodes[id].parent;
    }
    path.reverse();
    let mut events = Vec::with_capacity(nodes[*path.last().expect("nonempty")].len);
    let mut states = Vec::new();
    for &n in &path {
        push_outcome(m, &mut events, &mut states, nodes[n].thread, &nodes[n].outcome);
    }
    let last = &nodes[*path.last().expect("nonempty")].outcome.state;
    Trace {
        vars: m.vars.clone(),
        init: m.initial_vals(),
        events,
        states,
        complete: m.all_done(last),
        truncated: false,
    }
}

/// Continue a trace deterministically (lowest enabled thread first) until no
/// thread can move, then append each unfinished thread's statically pending
/// straight-line statements as pending events.
pub fn extend_trace(m: &Machine, tr: &Trace) -> Result<Trace, ReplayError> {
    let (mut out, mut state) = replay_with_state(m, &tr.events)?;
    let mut events = std::mem::take(&mut out.events);
    let mut states = std::mem::take(&mut out.states);
    'outer: while events.len() < m.bounds.max_steps {
        for t in 0..m.threads.len() {
            if let Some(o) = m.successors(&state, t)?.into_iter().next() {
                push_outcome(m, &mut events, &mut states, t, &o);
                state = o.state;
                continue 'outer;
            }
        }
        break;
    }
    let last = states.last().cloned().unwrap_or_else(|| m.initial_vals());
    for t in 0..m.threads.len() {
        let code = &m.threads[t];
        let mut pc = state.pcs[t];
        while let Some(ins) = code.get(pc) {
            match ins {
                Instr::Leaf(s) => {
                    events.push(Event {
                        id: events.len(),
                        thread: t,
                        label: s.label.clone(),
                        choice: None,
                        pending: true,
                        done_after: false,
                        switch_ok: false,
                        in_step: false,
                    });
                    states.push(last.clone());
                    pc += 1;
                }
                Instr::AtomicBegin | Instr::AtomicEnd => pc += 1,
                Instr::Jump(target) => pc = *target,
                Instr::Branch { .. } => break,
            }
        }
    }
    out.complete = m.all_done(&state);
    out.events = events;
    out.states = states;
    Ok(out)
}
