use std::fmt::Write as _;

use conrepair::engine::{Audit, Mode, RepairConfig, RepairResult, Status, Step, Timings};
use conrepair::fix::Heuristic;
use conrepair::lang::print_program;
use serde::Serialize;
use similar::TextDiff;

pub const SCHEMA_VERSION: u32 = 1;

/// Everything a run reports. Only `timings` varies between identical runs.
#[derive(Debug, Serialize)]
pub struct RepairReport {
    pub schema_version: u32,
    pub input: String,
    pub mode: Mode,
    pub heuristic: Heuristic,
    pub sound_fallback: bool,
    pub status: Status,
    pub message: Option<String>,
    pub iterations: usize,
    pub good_traces_analyzed: usize,
    pub transformations: Vec<String>,
    pub final_constraint: String,
    pub contracts_held: bool,
    pub audits: Vec<Audit>,
    pub history: Vec<Step>,
    pub diff: String,
    pub fixed_program: String,
    pub timings: Timings,
}

impl RepairReport {
    pub fn new(input: &str, cfg: &RepairConfig, r: &RepairResult) -> Self {
        let before = print_program(&r.original);
        let after = print_program(&r.program);
        let diff = TextDiff::from_lines(&before, &after)
            .unified_diff()
            .header(input, &format!("{input} (fixed)"))
            .to_string();
        RepairReport {
            schema_version: SCHEMA_VERSION,
            input: input.to_string(),
            mode: cfg.mode,
            heuristic: cfg.heuristic,
            sound_fallback: cfg.sound_fallback,
            status: r.status,
            message: r.message.clone(),
            iterations: r.iterations,
            good_traces_analyzed: r.good_traces_analyzed,
            transformations: r.transformations.iter().map(|t| t.to_string()).collect(),
            final_constraint: r.constraint.to_string(),
            contracts_held: r.contracts_held(),
            audits: r.audits.clone(),
            history: r.history.clone(),
            diff,
            fixed_program: after,
            timings: r.timings.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let status = serde_json::to_value(self.status).expect("status serializes");
        let _ = writeln!(s, "input: {}", self.input);
        let _ = writeln!(s, "status: {}", status.as_str().unwrap_or_default());
        if let Some(m) = &self.message {
            let _ = writeln!(s, "message: {m}");
        }
        let _ = writeln!(s, "iterations: {}", self.iterations);
        let _ = writeln!(s, "good traces analyzed: {}", self.good_traces_analyzed);
        let _ = writeln!(s, "constraint: {}", self.final_constraint);
        let _ = writeln!(s, "contracts held: {}", self.contracts_held);
        if !self.transformations.is_empty() {
            let _ = writeln!(s, "transformations:");
            for t in &self.transformations {
                let _ = writeln!(s, "  {t}");
            }
        }
        for a in &self.audits {
            let _ = writeln!(s, "audit {}: {:?} ({})", a.name, a.outcome, a.detail);
        }
        let t = &self.timings;
        let _ = writeln!(
            s,
            "timings (ms): validate {} learn {} fix {} verify {} audit {}",
            t.validate_ms, t.learn_ms, t.fix_ms, t.verify_ms, t.audit_ms
        );
        if !self.diff.is_empty() {
            let _ = write!(s, "\n{}", self.diff);
        }
        s
    }
}
