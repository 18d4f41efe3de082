mod corpus;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use conrepair::engine::{repair, Mode, RepairConfig, Status};
use conrepair::explore::Bounds;
use conrepair::fix::Heuristic;
use conrepair::lang::parse;

use crate::report::RepairReport;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Mixed,
    BadOnly,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HeuristicArg {
    Ce1,
    Ce2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ReportArg {
    Text,
    Json,
}

/// Repair concurrency bugs in CWhile programs by reordering statements and
/// adding atomic sections, without breaking traces that already work.
#[derive(Debug, Parser)]
#[command(name = "conrepair", version)]
struct Cli {
    /// Program to repair.
    #[arg(required_unless_present = "corpus")]
    input: Option<PathBuf>,
    /// Repair every program in DIR and compare against its .expect.toml sidecar.
    #[arg(long, value_name = "DIR", conflicts_with = "input")]
    corpus: Option<PathBuf>,
    /// `mixed` learns from good traces first. In corpus runs, restricts the modes run.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum, default_value = "ce1")]
    heuristic: HeuristicArg,
    /// Iterations allowed per activation of a loop.
    #[arg(long, value_name = "N")]
    loop_bound: Option<u32>,
    /// Maximum events per trace.
    #[arg(long, value_name = "N")]
    max_steps: Option<usize>,
    /// Variables range over [-N, N].
    #[arg(long, value_name = "N")]
    domain_bound: Option<i64>,
    /// Good traces analysed in mixed mode.
    #[arg(long, value_name = "K", default_value_t = 10)]
    max_good: usize,
    /// Maximum repair iterations.
    #[arg(long, value_name = "N", default_value_t = 64)]
    max_iter: usize,
    /// Fall back to freezing whole traces when a good trace has uncovered edges.
    #[arg(long)]
    sound_fallback: bool,
    /// Allow wait/notify insertion for bugs present in sequential runs.
    #[arg(long)]
    allow_wait_notify: bool,
    /// Shuffle good traces of equal priority.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Write the repaired program to PATH.
    #[arg(long, value_name = "PATH")]
    emit_fixed: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    report: ReportArg,
    /// Write the analysed good and bad traces to PATH in the trace dump format.
    #[arg(long, value_name = "PATH")]
    dump_traces: Option<PathBuf>,
}

impl Cli {
    fn config(&self) -> RepairConfig {
        let d = Bounds::default();
        RepairConfig {
            mode: match self.mode {
                Some(ModeArg::BadOnly) => Mode::BadOnly,
                _ => Mode::Mixed,
            },
            heuristic: match self.heuristic {
                HeuristicArg::Ce1 => Heuristic::Ce1,
                HeuristicArg::Ce2 => Heuristic::Ce2,
            },
            bounds: Bounds {
                loop_unroll: self.loop_bound.unwrap_or(d.loop_unroll),
                max_steps: self.max_steps.unwrap_or(d.max_steps),
                domain_bound: self.domain_bound.unwrap_or(d.domain_bound),
                ..d
            },
            max_good_traces: self.max_good,
            max_iterations: self.max_iter,
            sound_fallback: self.sound_fallback,
            allow_wait_notify: self.allow_wait_notify,
            seed: self.seed,
            audit: true,
        }
    }
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("conrepair: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = cli.config();

    if let Some(dir) = &cli.corpus {
        let only = cli.mode.map(|_| cfg.mode);
        return match corpus::run_corpus(dir, &cfg, only) {
            Ok(s) => {
                if cli.report == ReportArg::Json {
                    println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
                } else {
                    print!("{}", s.to_text());
                }
                ExitCode::from(if s.all_passed() { 0 } else { 1 })
            }
            Err(e) => fail(e),
        };
    }

    let path = cli.input.as_ref().expect("clap requires an input");
    let name = path.display().to_string();
    let src = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => return fail(format!("{name}: {e}")),
    };
    let p = match parse(&src) {
        Ok(p) => p,
        Err(e) => return fail(format!("{name}: {e}")),
    };
    let r = repair(&p, &cfg);
    let rep = RepairReport::new(&name, &cfg, &r);
    match cli.report {
        ReportArg::Text => print!("{}", rep.to_text()),
        ReportArg::Json => println!("{}", rep.to_json()),
    }
    if let Some(out) = &cli.emit_fixed {
        if let Err(e) = std::fs::write(out, &rep.fixed_program) {
            return fail(format!("{}: {e}", out.display()));
        }
    }
    if let Some(out) = &cli.dump_traces {
        let dump: String = r.traces.iter().map(|t| t.dump()).collect();
        if let Err(e) = std::fs::write(out, dump) {
            return fail(format!("{}: {e}", out.display()));
        }
    }
    match r.status {
        Status::Fixed => ExitCode::SUCCESS,
        Status::InputContractViolation => {
            eprintln!("conrepair: input contract violated: {}", r.message.unwrap_or_default());
            ExitCode::from(2)
        }
        _ => ExitCode::from(1),
    }
}
