//! Program constraints: boolean combinations of ordering, atomicity and
//! scheduling atoms over program locations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::lang::ast::{Location, Program, StmtKind};
use crate::lang::index::ProgramIndex;
use crate::lang::LangError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomKind {
    /// `x <= y`: x stays before y in one basic block, or both share an atomic section.
    Ordering,
    /// `[x;y]`: x and y are inside one atomic section.
    Atomicity,
    /// `x -> y`: a notify after x signals a wait before y.
    Scheduling,
}

/// Field order gives the canonical sort: by first location, then second, then kind.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub first: Location,
    pub second: Location,
    pub kind: AtomKind,
}

impl Atom {
    pub fn new(kind: AtomKind, first: Location, second: Location) -> Self {
        Atom {
            first,
            second,
            kind,
        }
    }

    pub fn ordering(first: Location, second: Location) -> Self {
        Atom::new(AtomKind::Ordering, first, second)
    }

    pub fn atomicity(first: Location, second: Location) -> Self {
        Atom::new(AtomKind::Atomicity, first, second)
    }

    pub fn scheduling(first: Location, second: Location) -> Self {
        Atom::new(AtomKind::Scheduling, first, second)
    }

    /// Evaluate the atom against `p`.
    pub fn holds(&self, p: &Program, idx: &ProgramIndex) -> Result<bool, LangError> {
        let (x, y) = (&self.first.label, &self.second.label);
        for l in [x, y] {
            if idx.resolve(l).is_none() {
                return Err(LangError::UnknownLocation(l.clone()));
            }
        }
        Ok(match self.kind {
            AtomKind::Ordering => {
                let same_block_before = match (idx.unit_of(x), idx.unit_of(y)) {
                    (Some((bx, _)), Some((by, _))) if bx == by => {
                        let (_, _, last_x) = idx.span(x).expect("indexed");
                        let (_, first_y, _) = idx.span(y).expect("indexed");
                        last_x < first_y
                    }
                    _ => false,
                };
                same_block_before || idx.in_common_atomic(x, y)
            }
            AtomKind::Atomicity => idx.in_common_atomic(x, y),
            AtomKind::Scheduling => scheduling_holds(p, idx, x, y),
        })
    }
}

fn scheduling_holds(p: &Program, idx: &ProgramIndex, x: &str, y: &str) -> bool {
    let (Some((tx, _, last_x)), Some((ty, first_y, _))) = (idx.span(x), idx.span(y)) else {
        return false;
    };
    let signals_after_x: BTreeSet<&String> = p.threads[tx]
        .leaves()
        .into_iter()
        .filter_map(|s| match &s.kind {
            StmtKind::Notify(sig) if idx.leaves[&s.label].order > last_x => Some(sig),
            _ => None,
        })
        .collect();
    p.threads[ty].leaves().into_iter().any(|s| match &s.kind {
        StmtKind::Wait(sig) => idx.leaves[&s.label].order < first_y && signals_after_x.contains(sig),
        _ => false,
    })
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AtomKind::Ordering => write!(f, "{} <= {}", self.first, self.second),
            AtomKind::Atomicity => write!(f, "[{};{}]", self.first, self.second),
            AtomKind::Scheduling => write!(f, "{} -> {}", self.first, self.second),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    True,
    False,
    Atom(Atom),
    And(Vec<Constraint>),
    Or(Vec<Constraint>),
}

impl From<Atom> for Constraint {
    fn from(a: Atom) -> Self {
        Constraint::Atom(a)
    }
}

impl Constraint {
    pub fn and(parts: impl IntoIterator<Item = Constraint>) -> Constraint {
        Constraint::And(parts.into_iter().collect()).normalize()
    }

    pub fn or(parts: impl IntoIterator<Item = Constraint>) -> Constraint {
        Constraint::Or(parts.into_iter().collect()).normalize()
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Constraint::True)
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<Atom>) {
        match self {
            Constraint::Atom(a) => {
                out.insert(a.clone());
            }
            Constraint::And(cs) | Constraint::Or(cs) => cs.iter().for_each(|c| c.collect_atoms(out)),
            _ => {}
        }
    }

    /// Conjuncts of a constraint, viewing a non-conjunction as a single conjunct.
    fn conjuncts(&self) -> BTreeSet<&Constraint> {
        match self {
            Constraint::And(cs) => cs.iter().collect(),
            c => BTreeSet::from([c]),
        }
    }

    /// Flatten, drop identities, deduplicate, sort and apply absorption.
    pub fn normalize(self) -> Constraint {
        match self {
            Constraint::And(cs) => {
                let mut parts = BTreeSet::new();
                for c in cs.into_iter().map(Constraint::normalize) {
                    match c {
                        Constraint::True => {}
                        Constraint::False => return Constraint::False,
                        Constraint::And(inner) => parts.extend(inner),
                        c => {
                            parts.insert(c);
                        }
                    }
                }
                // a & (a | b) = a
                let plain: BTreeSet<Constraint> = parts
                    .iter()
                    .filter(|c| !matches!(c, Constraint::Or(_)))
                    .cloned()
                    .collect();
                parts.retain(|c| match c {
                    Constraint::Or(ds) => !ds
                        .iter()
                        .any(|d| d.conjuncts().iter().all(|x| plain.contains(*x))),
                    _ => true,
                });
                match parts.len() {
                    0 => Constraint::True,
                    1 => parts.into_iter().next().expect("one part"),
                    _ => Constraint::And(parts.into_iter().collect()),
                }
            }
            Constraint::Or(cs) => {
                let mut parts = BTreeSet::new();
                for c in cs.into_iter().map(Constraint::normalize) {
                    match c {
                        Constraint::False => {}
                        Constraint::True => return Constraint::True,
                        Constraint::Or(inner) => parts.extend(inner),
                        c => {
                            parts.insert(c);
                        }
                    }
                }
                // a | (a & b) = a
                let all: Vec<Constraint> = parts.iter().cloned().collect();
                parts.retain(|d| {
                    let dc = d.conjuncts();
                    !all.iter().any(|e| {
                        e != d && {
                            let ec = e.conjuncts();
                            ec.len() < dc.len() && ec.iter().all(|x| dc.contains(x))
                        }
                    })
                });
                match parts.len() {
                    0 => Constraint::False,
                    1 => parts.into_iter().next().expect("one part"),
                    _ => Constraint::Or(parts.into_iter().collect()),
                }
            }
            c => c,
        }
    }

    /// Does `p` satisfy the constraint?
    pub fn satisfied_by(&self, p: &Program) -> Result<bool, LangError> {
        self.eval_with(&ProgramIndex::new(p), p)
    }

    fn eval_with(&self, idx: &ProgramIndex, p: &Program) -> Result<bool, LangError> {
        Ok(match self {
            Constraint::True => true,
            Constraint::False => false,
            Constraint::Atom(a) => a.holds(p, idx)?,
            Constraint::And(cs) => {
                let mut r = true;
                for c in cs {
                    r &= c.eval_with(idx, p)?;
                }
                r
            }
            Constraint::Or(cs) => {
                let mut r = false;
                for c in cs {
                    r |= c.eval_with(idx, p)?;
                }
                r
            }
        })
    }

    /// Evaluate under an assignment of truth values to atoms.
    pub fn eval_assignment(&self, value: &dyn Fn(&Atom) -> bool) -> bool {
        match self {
            Constraint::True => true,
            Constraint::False => false,
            Constraint::Atom(a) => value(a),
            Constraint::And(cs) => cs.iter().all(|c| c.eval_assignment(value)),
            Constraint::Or(cs) => cs.iter().any(|c| c.eval_assignment(value)),
        }
    }

    /// Propositional implication, treating atoms as independent variables.
    /// Returns `None` when there are too many atoms to enumerate.
    pub fn implies(&self, other: &Constraint) -> Option<bool> {
        let atoms: Vec<Atom> = self.atoms().union(&other.atoms()).cloned().collect();
        if atoms.len() > 20 {
            return None;
        }
        let pos: BTreeMap<&Atom, usize> = atoms.iter().enumerate().map(|(i, a)| (a, i)).collect();
        Some((0u32..1 << atoms.len()).all(|bits| {
            let v = |a: &Atom| bits >> pos[a] & 1 == 1;
            !self.eval_assignment(&v) || other.eval_assignment(&v)
        }))
    }

    pub fn equivalent(&self, other: &Constraint) -> Option<bool> {
        Some(self.implies(other)? && other.implies(self)?)
    }

    fn fmt_inner(&self, f: &mut fmt::Formatter<'_>, nested: bool) -> fmt::Result {
        match self {
            Constraint::True => f.write_str("true"),
            Constraint::False => f.write_str("false"),
            Constraint::Atom(a) if nested && a.kind != AtomKind::Atomicity => write!(f, "({a})"),
            Constraint::Atom(a) => write!(f, "{a}"),
            Constraint::And(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" & ")?;
                    }
                    if matches!(c, Constraint::Or(_)) {
                        f.write_str("(")?;
                        c.fmt_inner(f, true)?;
                        f.write_str(")")?;
                    } else {
                        c.fmt_inner(f, true)?;
                    }
                }
                Ok(())
            }
            Constraint::Or(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" | ")?;
                    }
                    c.fmt_inner(f, true)?;
                }
                Ok(())
            }
        }
    }

    /// Parse the canonical text form, resolving labels against `p`.
    pub fn parse(text: &str, p: &Program) -> Result<Constraint, LangError> {
        let idx = ProgramIndex::new(p);
        let toks = tokenize(text)?;
        let mut parser = CParser {
            toks,
            pos: 0,
            idx: &idx,
        };
        let c = parser.or()?;
        if parser.pos != parser.toks.len() {
            return Err(syntax(format!("unexpected `{}`", parser.toks[parser.pos])));
        }
        Ok(c.normalize())
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_inner(f, false)
    }
}

fn syntax(msg: String) -> LangError {
    LangError::Syntax { line: 1, col: 0, msg }
}

fn tokenize(text: &str) -> Result<Vec<String>, LangError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_alphanumeric() || "_.'".contains(c) {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || "_.'".contains(chars[i])) {
                i += 1;
            }
            out.push(chars[s..i].iter().collect());
        } else if i + 1 < chars.len() && matches!((c, chars[i + 1]), ('<', '=') | ('-', '>')) {
            out.push(format!("{c}{}", chars[i + 1]));
            i += 2;
        } else if "[];()&|".contains(c) {
            out.push(c.to_string());
            i += 1;
        } else {
            return Err(syntax(format!("unexpected character `{c}` in constraint")));
        }
    }
    Ok(out)
}

struct CParser<'a> {
    toks: Vec<String>,
    pos: usize,
    idx: &'a ProgramIndex,
}

impl CParser<'_> {
    fn peek(&self) -> Option<&str> {
        self.toks.get(self.pos).map(String::as_str)
    }

    fn next(&mut self) -> Result<String, LangError> {
        let t = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| syntax("unexpected end of constraint".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, s: &str) -> Result<(), LangError> {
        let t = self.next()?;
        if t == s {
            Ok(())
        } else {
            Err(syntax(format!("expected `{s}`, found `{t}`")))
        }
    }

    fn location(&mut self) -> Result<Location, LangError> {
        let l = self.next()?;
        let loc = self
            .idx
            .resolve(&l)
            .ok_or_else(|| LangError::UnknownLocation(l.clone()))?;
        Ok(Location::new(loc.thread, l))
    }

    fn or(&mut self) -> Result<Constraint, LangError> {
        let mut parts = vec![self.and()?];
        while self.peek() == Some("|") {
            self.pos += 1;
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("one")
        } else {
            Constraint::Or(parts)
        })
    }

    fn and(&mut self) -> Result<Constraint, LangError> {
        let mut parts = vec![self.primary()?];
        while self.peek() == Some("&") {
            self.pos += 1;
            parts.push(self.primary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("one")
        } else {
            Constraint::And(parts)
        })
    }

    fn primary(&mut self) -> Result<Constraint, LangError> {
        match self.peek() {
            Some("true") => {
                self.pos += 1;
                Ok(Constraint::True)
            }
            Some("false") => {
                self.pos += 1;
                Ok(Constraint::False)
            }
            Some("(") => {
                self.pos += 1;
                let c = self.or()?;
                self.expect(")")?;
                Ok(c)
            }
            Some("[") => {
                self.pos += 1;
                let a = self.location()?;
                self.expect(";")?;
                let b = self.location()?;
                self.expect("]")?;
                Ok(Atom::atomicity(a, b).into())
            }
            _ => {
                let a = self.location()?;
                let kind = match self.next()?.as_str() {
                    "<=" => AtomKind::Ordering,
                    "->" => AtomKind::Scheduling,
                    t => return Err(syntax(format!("expected `<=` or `->`, found `{t}`"))),
                };
                let b = self.location()?;
                Ok(Atom::new(kind, a, b).into())
            }
        }
    }
}

/// Name of the reordering unit holding `label`, as a location.
pub fn unit_location(idx: &ProgramIndex, label: &str) -> Option<Location> {
    let thread = idx.resolve(label)?.thread;
    let name = idx.unit_name_of(label).unwrap_or(label);
    Some(Location::new(thread, name))
}

/// An ordering atom between the units of `x` and `y`; `None` inside a single unit.
pub fn unit_ordering(idx: &ProgramIndex, x: &str, y: &str) -> Option<Atom> {
    let a = unit_location(idx, x)?;
    let b = unit_location(idx, y)?;
    (a != b).then(|| Atom::ordering(a, b))
}

/// Does `p` satisfy `c`?
pub fn satisfies(p: &Program, c: &Constraint) -> Result<bool, LangError> {
    c.satisfied_by(p)
}
