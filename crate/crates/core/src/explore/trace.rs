//! Traces: executed events with the valuation after each one.

use std::fmt::Write;
use std::sync::Arc;

use crate::lang::ast::ERR_VAR;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    /// Position of the event in the trace it was first recorded in. Trace
    /// transformations permute events but keep their ids.
    pub id: usize,
    pub thread: usize,
    pub label: String,
    /// Branch taken at an `if (*)` / `while (*)` event.
    pub choice: Option<u8>,
    /// Appended to a bad trace as statically pending; never executed.
    pub pending: bool,
    /// The thread has finished after this event.
    pub done_after: bool,
    /// A preemption-free schedule may switch away from the thread here.
    pub switch_ok: bool,
    /// Continues the scheduling step (atomic section) of the thread's
    /// previous event.
    pub in_step: bool,
}

impl Event {
    pub fn key(&self) -> (usize, &str, Option<u8>) {
        (self.thread, &self.label, self.choice)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub vars: Arc<Vec<String>>,
    pub init: Vec<i64>,
    pub events: Vec<Event>,
    /// `states[i]` is the valuation after `events[i]`.
    pub states: Vec<Vec<i64>>,
    pub complete: bool,
    /// Exploration stopped at a bound before the trace could finish.
    pub truncated: bool,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    fn var_ix(&self, var: &str) -> Option<usize> {
        self.vars.binary_search_by(|v| v.as_str().cmp(var)).ok()
    }

    /// Valuation before event `i` (the initial valuation for `i == 0`).
    pub fn before(&self, i: usize) -> &[i64] {
        if i == 0 {
            &self.init
        } else {
            &self.states[i - 1]
        }
    }

    pub fn after(&self, i: usize) -> &[i64] {
        &self.states[i]
    }

    pub fn final_state(&self) -> &[i64] {
        self.states.last().map_or(&self.init, Vec::as_slice)
    }

    pub fn value(&self, vals: &[i64], var: &str) -> i64 {
        self.var_ix(var).map_or(0, |i| vals[i])
    }

    /// Events actually executed (pending ones excluded).
    pub fn executed(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| !e.pending)
    }

    fn err_at_end(&self) -> i64 {
        let last = self
            .events
            .iter()
            .rposition(|e| !e.pending)
            .map_or(self.init.as_slice(), |i| &self.states[i]);
        self.value(last, ERR_VAR)
    }

    /// Error flag is 0 initially and 1 at the end.
    pub fn is_bad(&self) -> bool {
        self.value(&self.init, ERR_VAR) == 0 && self.err_at_end() == 1
    }

    /// Context switches happen only at preemption points or thread completion.
    pub fn is_preemption_free(&self) -> bool {
        let ev: Vec<&Event> = self.executed().collect();
        ev.windows(2)
            .all(|w| w[0].thread == w[1].thread || w[0].switch_ok)
    }

    /// Context switches happen only at thread completion.
    pub fn is_sequential(&self) -> bool {
        let ev: Vec<&Event> = self.executed().collect();
        ev.windows(2)
            .all(|w| w[0].thread == w[1].thread || w[0].done_after)
    }

    /// The events as `(thread, label, choice)` keys.
    pub fn keys(&self) -> Vec<(usize, String, Option<u8>)> {
        self.executed()
            .map(|e| (e.thread, e.label.clone(), e.choice))
            .collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.executed().map(|e| e.label.as_str()).collect()
    }

    /// The dump format: one line per executed event and a classification line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (e, vals) in self.events.iter().zip(&self.states).filter(|(e, _)| !e.pending) {
            let _ = write!(out, "{}:{}", e.thread, e.label);
            if let Some(c) = e.choice {
                let _ = write!(out, "@{c}");
            }
            let vs: Vec<String> = self
                .vars
                .iter()
                .zip(vals)
                .map(|(v, n)| format!("{v}={n}"))
                .collect();
            let _ = writeln!(out, " | {}", vs.join(","));
        }
        let b = |x: bool| u8::from(x);
        let _ = writeln!(
            out,
            "# bad={} complete={} pf={} seq={}",
            b(self.is_bad()),
            b(self.complete),
            b(self.is_preemption_free()),
            b(self.is_sequential())
        );
        out
    }
}

impl std::fmt::Display for Trace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.labels().join(", "))
    }
}

/// A trace read back from the dump format.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DumpedTrace {
    pub events: Vec<(usize, String, Option<u8>)>,
    pub states: Vec<Vec<(String, i64)>>,
    pub bad: bool,
    pub complete: bool,
    pub pf: bool,
    pub seq: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("trace dump line {line}: {msg}")]
pub struct DumpError {
    pub line: usize,
    pub msg: String,
}

/// Parse one or more dumped traces, each ended by its classification line.
pub fn parse_dump(text: &str) -> Result<Vec<DumpedTrace>, DumpError> {
    let mut out = Vec::new();
    let mut cur = DumpedTrace {
        events: Vec::new(),
        states: Vec::new(),
        bad: false,
        complete: false,
        pf: false,
        seq: false,
    };
    for (n, line) in text.lines().enumerate() {
        let err = |msg: &str| DumpError {
            line: n + 1,
            msg: msg.to_string(),
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut flags = [None; 4];
            for part in rest.split_whitespace() {
                let (k, v) = part.split_once('=').ok_or_else(|| err("malformed flag"))?;
                let v = match v {
                    "0" => false,
                    "1" => true,
                    _ => return Err(err("flag value must be 0 or 1")),
                };
                let slot = ["bad", "complete", "pf", "seq"]
                    .iter()
                    .position(|f| *f == k)
                    .ok_or_else(|| err("unknown flag"))?;
                flags[slot] = Some(v);
            }
            let [Some(bad), Some(complete), Some(pf), Some(seq)] = flags else {
                return Err(err("missing flag"));
            };
            cur.bad = bad;
            cur.complete = complete;
            cur.pf = pf;
            cur.seq = seq;
            out.push(std::mem::replace(
                &mut cur,
                DumpedTrace {
                    events: Vec::new(),
                    states: Vec::new(),
                    bad: false,
                    complete: false,
                    pf: false,
                    seq: false,
                },
            ));
            continue;
        }
        let (ev, vals) = line.split_once(" | ").ok_or_else(|| err("missing ` | `"))?;
        let (tid, label) = ev.split_once(':').ok_or_else(|| err("missing `:`"))?;
        let tid: usize = tid.parse().map_err(|_| err("bad thread index"))?;
        let (label, choice) = match label.split_once('@') {
            Some((l, c)) => (l, Some(c.parse().map_err(|_| err("bad branch choice"))?)),
            None => (label, None),
        };
        let mut state = Vec::new();
        for kv in vals.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| err("malformed valuation"))?;
            state.push((k.to_string(), v.parse().map_err(|_| err("bad value"))?));
        }
        cur.events.push((tid, label.to_string(), choice));
        cur.states.push(state);
    }
    if !cur.events.is_empty() {
        return Err(DumpError {
            line: text.lines().count(),
            msg: "trace without classification line".into(),
        });
    }
    Ok(out)
}
