//! The repair loop: learn from good traces, fix bad ones, repeat until the
//! bounded verifier finds no bad trace.

use std::collections::HashSet;
use std::ops::ControlFlow;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraint::{satisfies, Constraint};
use crate::explore::closure::apply_trace_transformations;
use crate::explore::enumerate::{collect_traces, enumerate_traces};
use crate::explore::{verify, Bounds, Policy, Trace, Verdict};
use crate::fix::{fix_bad, FixConfig, Heuristic};
use crate::lang::ast::Program;
use crate::lang::print::print_program;
use crate::lang::transform::Transformation;
use crate::learn::{check_regression, learn_good, LearnConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Learn from good traces before fixing bad ones.
    #[default]
    Mixed,
    BadOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RepairConfig {
    pub mode: Mode,
    pub heuristic: Heuristic,
    pub bounds: Bounds,
    pub max_good_traces: usize,
    pub max_iterations: usize,
    pub sound_fallback: bool,
    pub allow_wait_notify: bool,
    /// Permutes traces of equal priority.
    pub seed: Option<u64>,
    /// Run the post-hoc preservation audits.
    pub audit: bool,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            mode: Mode::Mixed,
            heuristic: Heuristic::Ce1,
            bounds: Bounds::default(),
            max_good_traces: 10,
            max_iterations: 64,
            sound_fallback: false,
            allow_wait_notify: false,
            seed: None,
            audit: true,
        }
    }
}

impl RepairConfig {
    pub fn fix_config(&self) -> FixConfig {
        FixConfig {
            heuristic: self.heuristic,
            allow_wait_notify: self.allow_wait_notify,
            bounds: self.bounds,
            ..FixConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Fixed,
    InputContractViolation,
    BudgetExhausted,
    Unknown,
    NoFix,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "kebab-case")]
pub enum Step {
    LearnGood {
        trace: String,
        constraint: String,
        uncovered: Vec<String>,
        fallback: bool,
    },
    FixBad {
        trace: String,
        cycle: Option<String>,
        transformations: Vec<Transformation>,
        constraint: String,
        rejected_cycles: usize,
        /// Online check: no trace of T_G regressed.
        regression_free: bool,
        /// Φ ∧ Φ′ implies the previous Φ (`None` when too large to check).
        monotone: Option<bool>,
        good_traces_kept: usize,
    },
    Note {
        message: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditOutcome {
    Passed,
    Failed,
    Unknown,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audit {
    pub name: String,
    pub outcome: AuditOutcome,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timings {
    pub validate_ms: u128,
    pub learn_ms: u128,
    pub fix_ms: u128,
    pub verify_ms: u128,
    pub audit_ms: u128,
}

#[derive(Clone, Debug)]
pub struct RepairResult {
    pub status: Status,
    pub message: Option<String>,
    pub original: Program,
    pub program: Program,
    pub transformations: Vec<Transformation>,
    pub constraint: Constraint,
    pub history: Vec<Step>,
    /// FixBad invocations.
    pub iterations: usize,
    pub good_traces_analyzed: usize,
    pub audits: Vec<Audit>,
    pub timings: Timings,
    /// Good traces learned from, then bad traces fixed, in order.
    pub traces: Vec<Trace>,
}

impl RepairResult {
    /// The runtime contracts held in every iteration.
    pub fn contracts_held(&self) -> bool {
        self.history.iter().all(|s| match s {
            Step::FixBad {
                regression_free,
                monotone,
                ..
            } => *regression_free && *monotone != Some(false),
            _ => true,
        })
    }
}

/// Traces visited when looking for preemptive good traces.
const GOOD_SCAN_LIMIT: usize = 20_000;

fn is_good_complete(t: &Trace) -> bool {
    t.complete && !t.truncated && !t.is_bad()
}

/// Good traces to learn from: complete preemption-free ones first, then the
/// shortest preemptive ones, at most `cfg.max_good_traces`.
pub fn choose_good_traces(p: &Program, cfg: &RepairConfig) -> Vec<Trace> {
    let mut ranked: Vec<((usize, usize), Trace)> = Vec::new();
    let mut seen: HashSet<Vec<(usize, String, Option<u8>)>> = HashSet::new();
    let _ = enumerate_traces(p, cfg.bounds, Policy::PreemptionFreeOnly, &mut |t| {
        if is_good_complete(&t) && seen.insert(t.keys()) {
            ranked.push(((0, 0), t));
        }
        ControlFlow::Continue(())
    });
    if ranked.len() < cfg.max_good_traces {
        let mut visited = 0;
        let _ = enumerate_traces(p, cfg.bounds, Policy::All, &mut |t| {
            visited += 1;
            if is_good_complete(&t) && seen.insert(t.keys()) {
                ranked.push(((1, t.len()), t));
            }
            if visited >= GOOD_SCAN_LIMIT {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
    }
    ranked.sort_by_key(|(k, _)| *k);
    if let Some(seed) = cfg.seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for group in ranked.chunk_by_mut(|a, b| a.0 == b.0) {
            group.shuffle(&mut rng);
        }
    }
    ranked.into_iter().take(cfg.max_good_traces).map(|(_, t)| t).collect()
}

fn trace_text(t: &Trace) -> String {
    t.labels().join(",")
}

/// Run the repair loop on `p`.
pub fn repair(p: &Program, cfg: &RepairConfig) -> RepairResult {
    let mut r = RepairResult {
        status: Status::Unknown,
        message: None,
        original: p.clone(),
        program: p.clone(),
        transformations: Vec::new(),
        constraint: Constraint::True,
        history: Vec::new(),
        iterations: 0,
        good_traces_analyzed: 0,
        audits: Vec::new(),
        timings: Timings::default(),
        traces: Vec::new(),
    };
    let clock = Instant::now();
    if let Err(msg) = validate_sequential(p, cfg) {
        r.status = Status::InputContractViolation;
        r.message = Some(msg);
        return r;
    }
    r.timings.validate_ms = clock.elapsed().as_millis();

    let mut good: Vec<Trace> = Vec::new();
    if cfg.mode == Mode::Mixed {
        let clock = Instant::now();
        let lcfg = LearnConfig {
            sound_fallback: cfg.sound_fallback,
            ..LearnConfig::default()
        };
        for t in choose_good_traces(p, cfg) {
            match learn_good(p, &t, lcfg) {
                Ok(l) => {
                    r.constraint = Constraint::and([r.constraint.clone(), l.constraint.clone()]);
                    r.history.push(Step::LearnGood {
                        trace: trace_text(&t),
                        constraint: l.constraint.to_string(),
                        uncovered: l.uncovered.iter().map(|(a, b)| format!("{a} -> {b}")).collect(),
                        fallback: l.fallback_used,
                    });
                    r.traces.push(t.clone());
                    good.push(t);
                }
                Err(e) => r.history.push(Step::Note {
                    message: format!("skipped good trace {}: {e}", trace_text(&t)),
                }),
            }
        }
        r.good_traces_analyzed = good.len();
        r.timings.learn_ms = clock.elapsed().as_millis();
    }

    let fcfg = cfg.fix_config();
    loop {
        let clock = Instant::now();
        let verdict = verify(&r.program, cfg.bounds);
        r.timings.verify_ms += clock.elapsed().as_millis();
        let tr = match verdict {
            Ok(Verdict::Correct) => {
                r.status = Status::Fixed;
                break;
            }
            Ok(Verdict::Unknown) => {
                r.status = Status::Unknown;
                r.message = Some("verification hit the exploration bounds".into());
                break;
            }
            Err(e) => {
                r.status = Status::Unknown;
                r.message = Some(e.to_string());
                break;
            }
            Ok(Verdict::Bad(tr)) => tr,
        };
        if r.iterations >= cfg.max_iterations {
            r.status = Status::BudgetExhausted;
            r.message = Some(format!("no fix within {} iterations", cfg.max_iterations));
            break;
        }
        let clock = Instant::now();
        let fix = fix_bad(&r.program, &r.constraint, &tr, &fcfg);
        r.timings.fix_ms += clock.elapsed().as_millis();
        let fix = match fix {
            Ok(f) => f,
            Err(e) => {
                r.status = Status::NoFix;
                r.message = Some(format!("bad trace {}: {e}", trace_text(&tr)));
                break;
            }
        };
        r.iterations += 1;
        r.traces.push(tr.clone());
        let before = r.program.clone();
        let old_phi = r.constraint.clone();
        let new_phi = Constraint::and([old_phi.clone(), fix.constraint.clone()]);

        let clock = Instant::now();
        let mut regression_free = true;
        let mut kept = Vec::new();
        for g in &good {
            match check_regression(&before, &fix.transformations, &fix.program, g, cfg.bounds) {
                Ok(Some(w)) => {
                    regression_free = false;
                    r.history.push(Step::Note {
                        message: format!("regression on good trace {}: {}", trace_text(g), trace_text(&w.trace)),
                    });
                }
                Ok(None) => {}
                Err(e) => r.history.push(Step::Note {
                    message: format!("regression check on {} gave up: {e}", trace_text(g)),
                }),
            }
            let image = apply_trace_transformations(&before, g, &fix.transformations, &fix.program, cfg.bounds);
            match image.map(|ts| ts.into_iter().find(is_good_complete)) {
                Ok(Some(t)) => kept.push(t),
                Ok(None) => r.history.push(Step::Note {
                    message: format!("dropped good trace {}: no good image", trace_text(g)),
                }),
                Err(e) => r.history.push(Step::Note {
                    message: format!("dropped good trace {}: {e}", trace_text(g)),
                }),
            }
        }
        r.timings.learn_ms += clock.elapsed().as_millis();
        good = kept;

        if !satisfies(&fix.program, &new_phi).unwrap_or(false) {
            r.history.push(Step::Note {
                message: "fixed program does not satisfy the accumulated constraint".into(),
            });
        }
        r.history.push(Step::FixBad {
            trace: trace_text(&tr),
            cycle: fix.cycle.clone(),
            transformations: fix.transformations.clone(),
            constraint: fix.constraint.to_string(),
            rejected_cycles: fix.rejected,
            regression_free,
            monotone: new_phi.implies(&old_phi),
            good_traces_kept: good.len(),
        });
        r.constraint = new_phi;
        r.transformations.extend(fix.transformations);
        r.program = fix.program;
    }

    if cfg.audit && r.status == Status::Fixed {
        let clock = Instant::now();
        r.audits = audit(p, &r.program, &r.transformations, cfg);
        r.timings.audit_ms = clock.elapsed().as_millis();
    }
    r
}

/// Every complete sequential trace must be good, unless wait/notify is allowed.
fn validate_sequential(p: &Program, cfg: &RepairConfig) -> Result<(), String> {
    if cfg.allow_wait_notify {
        return Ok(());
    }
    let (traces, _) = collect_traces(p, cfg.bounds, Policy::SequentialOnly).map_err(|e| e.to_string())?;
    match traces.iter().find(|t| t.complete && t.is_bad()) {
        Some(t) => Err(format!(
            "sequential trace {} is bad; only wait/notify can fix this (--allow-wait-notify)",
            trace_text(t)
        )),
        None => Ok(()),
    }
}

/// Traces audited per policy.
const AUDIT_LIMIT: usize = 200;

/// Check that sequential behaviour, and correct preemption-free behaviour,
/// survive the transformations.
pub fn audit(p: &Program, fixed: &Program, ts: &[Transformation], cfg: &RepairConfig) -> Vec<Audit> {
    let mut out = Vec::new();
    for (name, policy) in [
        ("sequential-preserved", Policy::SequentialOnly),
        ("preemption-free-preserved", Policy::PreemptionFreeOnly),
    ] {
        let (traces, stats) = match collect_traces(p, cfg.bounds, policy) {
            Ok(x) => x,
            Err(e) => {
                out.push(Audit {
                    name: name.into(),
                    outcome: AuditOutcome::Unknown,
                    detail: e.to_string(),
                });
                continue;
            }
        };
        let complete: Vec<&Trace> = traces.iter().filter(|t| t.complete).collect();
        if policy == Policy::PreemptionFreeOnly && complete.iter().any(|t| t.is_bad()) {
            out.push(Audit {
                name: name.into(),
                outcome: AuditOutcome::Skipped,
                detail: "some preemption-free trace of the input is bad".into(),
            });
            continue;
        }
        let mut unknown = stats.truncated || complete.len() > AUDIT_LIMIT;
        let mut failed = None;
        for t in complete.iter().filter(|t| !t.is_bad()).take(AUDIT_LIMIT) {
            match apply_trace_transformations(p, t, ts, fixed, cfg.bounds) {
                Ok(images) if images.is_empty() => {
                    failed = Some(trace_text(t));
                    break;
                }
                Ok(_) => {}
                Err(_) => unknown = true,
            }
        }
        let (outcome, detail) = match (failed, unknown) {
            (Some(t), _) => (AuditOutcome::Failed, format!("no image for {t}")),
            (None, true) => (AuditOutcome::Unknown, "bounded: not every trace was checked".into()),
            (None, false) => (AuditOutcome::Passed, format!("{} traces", complete.len())),
        };
        out.push(Audit {
            name: name.into(),
            outcome,
            detail,
        });
    }
    out
}

/// Printed form of the program, for reports.
pub fn program_text(p: &Program) -> String {
    print_program(p)
}
