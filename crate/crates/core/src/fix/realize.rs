//! Finding a short transformation sequence whose result satisfies a constraint.

use std::collections::{HashSet, VecDeque};

use crate::constraint::{satisfies, AtomKind, Constraint};
use crate::lang::ast::Program;
use crate::lang::index::ProgramIndex;
use crate::lang::print::print_program;
use crate::lang::transform::{
    acts_across_preemption, apply_transformation, fresh_signal, neighbour_transformations, Transformation,
};

#[derive(Clone, Copy, Debug)]
pub struct Realizer<'a> {
    pub p: &'a Program,
    pub bound: i64,
    /// Reject transformations that act across preemption points.
    pub keep_preemption: bool,
    pub max_depth: usize,
    pub max_programs: usize,
}

pub type Realized = (Vec<Transformation>, Program);

impl Realizer<'_> {
    fn allowed(&self, p: &Program, t: &Transformation) -> bool {
        !self.keep_preemption || !acts_across_preemption(p, t)
    }

    /// Insert the atomic sections and wait/notify pairs that `new` asks for
    /// and `p` lacks.
    fn finish(&self, p: &Program, new: &Constraint) -> Option<Realized> {
        let mut cur = p.clone();
        let mut ts = Vec::new();
        for a in new.atoms() {
            let idx = ProgramIndex::new(&cur);
            if a.holds(&cur, &idx).ok()? {
                continue;
            }
            let (x, y) = (a.first.label.clone(), a.second.label.clone());
            let options = match a.kind {
                AtomKind::Ordering => continue,
                AtomKind::Atomicity => vec![
                    Transformation::Atomic {
                        first: x.clone(),
                        last: y.clone(),
                    },
                    Transformation::Atomic { first: y, last: x },
                ],
                AtomKind::Scheduling => vec![Transformation::WaitNotify {
                    notify_after: x,
                    wait_before: y,
                    signal: fresh_signal(&cur),
                }],
            };
            let (t, next) = options.into_iter().find_map(|t| {
                if !self.allowed(&cur, &t) {
                    return None;
                }
                let next = apply_transformation(&cur, &t, self.bound).ok()?;
                Some((t, next))
            })?;
            ts.push(t);
            cur = next;
        }
        Some((ts, cur))
    }

    /// Breadth-first search over legal swaps of `p`, finishing each candidate
    /// with the insertions `new` needs, for a program satisfying `goal` that
    /// `accept` takes.
    pub fn realize(
        &self,
        goal: &Constraint,
        new: &Constraint,
        accept: &mut dyn FnMut(&Program) -> bool,
    ) -> Option<Realized> {
        let mut seen: HashSet<String> = HashSet::from([print_program(self.p)]);
        let mut queue: VecDeque<(Program, Vec<Transformation>)> = VecDeque::from([(self.p.clone(), Vec::new())]);
        while let Some((cur, ts)) = queue.pop_front() {
            if let Some((extra, done)) = self.finish(&cur, new) {
                if satisfies(&done, goal).unwrap_or(false) && accept(&done) {
                    let mut all = ts.clone();
                    all.extend(extra);
                    return Some((all, done));
                }
            }
            if ts.len() >= self.max_depth {
                continue;
            }
            for t in neighbour_transformations(&cur, self.bound) {
                if !matches!(t, Transformation::Swap { .. }) || !self.allowed(&cur, &t) {
                    continue;
                }
                let Ok(next) = apply_transformation(&cur, &t, self.bound) else {
                    continue;
                };
                if seen.len() >= self.max_programs || !seen.insert(print_program(&next)) {
                    continue;
                }
                let mut ts2 = ts.clone();
                ts2.push(t);
                queue.push_back((next, ts2));
            }
        }
        None
    }
}
