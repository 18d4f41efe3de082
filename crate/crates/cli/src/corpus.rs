use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use conrepair::engine::{repair, Mode, RepairConfig, Status, Step};
use conrepair::lang::parse;
use serde::{Deserialize, Serialize};

/// The `<name>.expect.toml` sidecar of a corpus program.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Expectation {
    /// The program was built to expose regressions of the unsound learner.
    #[serde(default)]
    pub expect_unsound: bool,
    #[serde(default)]
    pub allow_wait_notify: bool,
    pub mixed: Option<Expected>,
    pub bad_only: Option<Expected>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Expected {
    pub status: Status,
    pub iterations: Option<usize>,
    pub max_iterations: Option<usize>,
}

impl Expected {
    fn accepts(&self, status: Status, iterations: usize) -> bool {
        status == self.status
            && self.iterations.is_none_or(|n| n == iterations)
            && self.max_iterations.is_none_or(|n| iterations <= n)
    }
}

#[derive(Debug, Serialize)]
pub struct Row {
    pub fixture: String,
    pub mode: Mode,
    pub status: Status,
    pub iterations: usize,
    pub pass: bool,
    pub expect_unsound: bool,
    /// Iterations whose online check found a regression.
    pub regressions: usize,
}

#[derive(Debug, Default, Serialize)]
pub struct Summary {
    pub rows: Vec<Row>,
    pub skipped: Vec<String>,
}

impl Summary {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:<14} {:<9} {:<25} {:>5}  result\n", "fixture", "mode", "status", "iter");
        for r in &self.rows {
            let status = serde_json::to_value(r.status).expect("status serializes");
            let mode = serde_json::to_value(r.mode).expect("mode serializes");
            let mut result = if r.pass { "ok".to_string() } else { "MISMATCH".to_string() };
            if r.expect_unsound {
                let _ = write!(result, " (expected-unsound, {} regressions observed)", r.regressions);
            }
            let _ = writeln!(
                s,
                "{:<14} {:<9} {:<25} {:>5}  {result}",
                r.fixture,
                mode.as_str().unwrap_or_default(),
                status.as_str().unwrap_or_default(),
                r.iterations
            );
        }
        for f in &self.skipped {
            let _ = writeln!(s, "skipped {f}: no expectation sidecar");
        }
        s
    }
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("expect.toml")
}

/// Repair every `.cw` program in `dir` and compare with its sidecar. With
/// `only`, just that mode is run.
pub fn run_corpus(dir: &Path, base: &RepairConfig, only: Option<Mode>) -> Result<Summary, String> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cw"))
        .collect();
    files.sort();
    let mut out = Summary::default();
    for path in files {
        let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let Ok(expect) = std::fs::read_to_string(sidecar(&path)) else {
            eprintln!("warning: {name} has no expectation sidecar, skipped");
            out.skipped.push(name);
            continue;
        };
        let expect: Expectation = toml::from_str(&expect).map_err(|e| format!("{name}: {e}"))?;
        let src = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let p = parse(&src).map_err(|e| format!("{name}: {e}"))?;
        for (mode, want) in [(Mode::Mixed, &expect.mixed), (Mode::BadOnly, &expect.bad_only)] {
            let Some(want) = want else { continue };
            if only.is_some_and(|m| m != mode) {
                continue;
            }
            let cfg = RepairConfig {
                mode,
                allow_wait_notify: base.allow_wait_notify || expect.allow_wait_notify,
                ..*base
            };
            let r = repair(&p, &cfg);
            let regressions = r
                .history
                .iter()
                .filter(|s| matches!(s, Step::FixBad { regression_free: false, .. }))
                .count();
            out.rows.push(Row {
                fixture: name.clone(),
                mode,
                status: r.status,
                iterations: r.iterations,
                pass: want.accepts(r.status, r.iterations),
                expect_unsound: expect.expect_unsound,
                regressions,
            });
        }
    }
    Ok(out)
}
