//! Replaying event sequences, with or without the program's control flow.

use crate::lang::ast::Stmt;
use crate::lang::semantics::{Exec, Fault};

use super::machine::{Instr, Machine, State};
use super::trace::{Event, Trace};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("event {index} (`{label}`) cannot execute: {reason}")]
    Mismatch {
        index: usize,
        label: String,
        reason: String,
    },
    #[error(transparent)]
    Fault(#[from] Fault),
}

impl Machine {
    pub fn stmt(&self, label: &str) -> Option<&Stmt> {
        let &(t, pc) = self.pcs.get(label)?;
        match &self.threads[t][pc] {
            Instr::Leaf(s) => Some(s),
            _ => None,
        }
    }
}

/// Replay `events` in program order, honouring control flow and atomic
/// sections. Event ids are kept; per-event scheduling facts are recomputed.
pub fn replay(m: &Machine, events: &[Event]) -> Result<Trace, ReplayError> {
    replay_with_state(m, events).map(|(t, _)| t)
}

/// Like [`replay`], also returning the machine state reached.
pub fn replay_with_state(m: &Machine, events: &[Event]) -> Result<(Trace, State), ReplayError> {
    let mut state = m.initial();
    let mut out_events = Vec::with_capacity(events.len());
    let mut states = Vec::with_capacity(events.len());
    let mut i = 0;
    while i < events.len() {
        let t = events[i].thread;
        let mismatch = |reason: &str| ReplayError::Mismatch {
            index: i,
            label: events[i].label.clone(),
            reason: reason.to_string(),
        };
        if t >= m.threads.len() {
            return Err(mismatch("no such thread"));
        }
        let outcomes = m.successors(&state, t)?;
        let chosen = outcomes.into_iter().find(|o| {
            o.steps.len() <= events.len() - i
                && o.steps.iter().zip(&events[i..]).all(|(s, e)| {
                    e.thread == t && s.label == e.label && s.choice == e.choice
                })
        });
        let Some(o) = chosen else {
            return Err(mismatch(if m.is_done(&state, t) {
                "thread has finished"
            } else {
                "not the next step of its thread, or not enabled"
            }));
        };
        let k = o.steps.len();
        let done = m.is_done(&o.state, t);
        let switch_ok = m.at_preemption_point(&o.state, t);
        for (j, vals) in o.vals.into_iter().enumerate() {
            let mut e = events[i + j].clone();
            e.pending = false;
            e.done_after = j + 1 == k && done;
            e.switch_ok = j + 1 == k && switch_ok;
            e.in_step = j > 0;
            out_events.push(e);
            states.push(vals);
        }
        state = o.state;
        i += k;
    }
    let trace = Trace {
        vars: m.vars.clone(),
        init: m.initial_vals(),
        events: out_events,
        states,
        complete: m.all_done(&state),
        truncated: false,
    };
    Ok((trace, state))
}

/// Execute the statements of `events` in order from `init`, ignoring control
/// flow. Branch events leave the valuation unchanged. `None` when some
/// statement blocks, is infeasible or faults.
pub fn replay_values(m: &Machine, events: &[Event], init: &[i64]) -> Option<Vec<Vec<i64>>> {
    let mut vals = init.to_vec();
    let mut out = Vec::with_capacity(events.len());
    for e in events {
        if e.choice.is_none() {
            let st = m.stmt(&e.label)?;
            match m.exec_stmt(st, &mut vals) {
                Ok(Exec::Continue) => {}
                _ => return None,
            }
        }
        out.push(vals.clone());
    }
    Some(out)
}

/// Replay a schedule given as statement labels (branch events as `label@choice`).
pub fn replay_labels(m: &Machine, labels: &[&str]) -> Result<Trace, ReplayError> {
    let mut events = Vec::with_capacity(labels.len());
    for (id, l) in labels.iter().enumerate() {
        let (label, choice) = match l.split_once('@') {
            Some((l, c)) => (l, c.parse().ok()),
            None => (*l, None),
        };
        let &(thread, _) = m.pcs.get(label).ok_or_else(|| ReplayError::Mismatch {
            index: id,
            label: label.to_string(),
            reason: "unknown label".into(),
        })?;
        events.push(Event {
            id,
            thread,
            label: label.to_string(),
            choice,
            pending: false,
            done_after: false,
            switch_ok: false,
            in_step: false,
        });
    }
    replay(m, &events)
}
