//! Acceptance checks. Prints one PASS/FAIL line per criterion.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use conrepair::constraint::{satisfies, Constraint};
use conrepair::engine::{repair, Mode, RepairConfig, Status};
use conrepair::explore::closure::CLOSURE_BUDGET;
use conrepair::explore::{
    enumerate_traces, find_bad_trace, free_closure, replay, replay_labels, Bounds, Machine, Policy, Trace, Verdict,
};
use conrepair::fix::{fix_bad, FixConfig, Heuristic};
use conrepair::fixtures::{fixture, FIXTURES};
use conrepair::graph::{DataEdge, Edge, Pos, TraceGraph, TraceInfo};
use conrepair::lang::{parse, Program, Transformation, ERR_VAR};
use conrepair::learn::oracle::neighbourhood;
use conrepair::learn::{check_regression, learn_good, sound_complete_oracle, LearnConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, u64);

fn program(name: &str) -> Program {
    fixture(name).unwrap().program().unwrap()
}

fn trace(p: &Program, labels: &str) -> Result<Trace, String> {
    let m = Machine::new(p, Bounds::default());
    let labels: Vec<&str> = labels.split(',').collect();
    replay_labels(&m, &labels).map_err(|e| e.to_string())
}

fn units(p: &Program, t: usize) -> Vec<String> {
    p.threads[t].body.iter().filter_map(|n| n.unit_name().map(String::from)).collect()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn with_mode(mode: Mode) -> RepairConfig {
    RepairConfig {
        mode,
        ..RepairConfig::default()
    }
}

fn paper1_example() -> Outcome {
    let p = program("paper1");
    let r = repair(&p, &with_mode(Mode::Mixed));
    ensure(r.status == Status::Fixed && r.iterations == 1, || {
        format!("mixed: {:?} after {} iterations", r.status, r.iterations)
    })?;
    let t2 = units(&r.program, 1);
    ensure(t2 == ["B", "C", "A"], || format!("thread2 = {}", t2.join(";")))?;
    let b = repair(&p, &with_mode(Mode::BadOnly));
    ensure(b.status == Status::Fixed && b.iterations <= 3, || {
        format!("badOnly: {:?} after {} iterations", b.status, b.iterations)
    })?;
    Ok(format!("mixed 1 iteration, thread2 = B;C;A; badOnly {} iterations", b.iterations))
}

fn iwl3945() -> Outcome {
    let p = program("iwl3945");
    let r = repair(&p, &with_mode(Mode::Mixed));
    ensure(r.status == Status::Fixed && r.iterations == 1, || {
        format!("mixed: {:?} after {} iterations", r.status, r.iterations)
    })?;
    let alive = units(&r.program, 1);
    ensure(alive == ["1", "2", "6", "g"], || format!("alive = {}", alive.join(";")))?;
    ensure(r.contracts_held(), || "a contract failed in mixed mode".into())?;
    let b = repair(&p, &with_mode(Mode::BadOnly));
    ensure(b.status == Status::Fixed && b.iterations <= 2, || {
        format!("badOnly: {:?} after {} iterations", b.status, b.iterations)
    })?;
    Ok(format!("mixed 1 iteration with the unlock moved; badOnly {} iterations", b.iterations))
}

/// `a` and `b` agree on every program in the two-step neighbourhood of `p`.
fn agree(p: &Program, a: &Constraint, b: &Constraint, k: usize) -> Result<usize, String> {
    let family = neighbourhood(p, k, Bounds::default().domain_bound).map_err(|e| e.to_string())?;
    for (q, ts) in &family {
        let (x, y) = (satisfies(q, a).unwrap(), satisfies(q, b).unwrap());
        ensure(x == y, || format!("{a} and {b} differ after {ts:?}"))?;
    }
    Ok(family.len())
}

fn fig3a_exact() -> Outcome {
    let p = program("fig3a");
    let tr = trace(&p, "1,2,A,B")?;
    let l = learn_good(&p, &tr, LearnConfig::default()).map_err(|e| e.to_string())?;
    let want = Constraint::parse("(1 <= 2) & (A <= B)", &p).unwrap();
    ensure(l.constraint == want, || format!("learned {}", l.constraint))?;
    let n = agree(&p, &l.constraint, &want, 2)?;
    let oracle = sound_complete_oracle(&p, &tr, 1, Bounds::default()).map_err(|e| e.to_string())?;
    let m = agree(&p, &l.constraint, &oracle, 1)?;
    Ok(format!("{}; equal on {n} programs, oracle agrees on {m}", l.constraint))
}

fn fig3b_interference() -> Outcome {
    let p = program("fig3b");
    let tr = trace(&p, "1,2,A,B,C,3,4")?;
    let l = learn_good(&p, &tr, LearnConfig::default()).map_err(|e| e.to_string())?;
    let want = Constraint::parse("(B <= C) & (3 <= 4)", &p).unwrap();
    ensure(l.constraint.implies(&want) == Some(true), || format!("learned {}", l.constraint))?;
    let bad = ["1", "2", "A", "C", "3", "4", "B"];
    let mut violating = 0;
    for (q, ts) in neighbourhood(&p, 1, Bounds::default().domain_bound).unwrap() {
        if !matches!(ts[..], [Transformation::Swap { .. }]) || satisfies(&q, &want).unwrap() {
            continue;
        }
        violating += 1;
        let m = Machine::new(&q, Bounds::default());
        if let Ok(t) = replay_labels(&m, &bad) {
            ensure(t.is_bad(), || format!("{ts:?}: the trace replays but is good"))?;
        }
        let v = find_bad_trace(&q, Bounds::default()).unwrap();
        ensure(matches!(v, Verdict::Bad(_)), || format!("{ts:?} admits no bad trace"))?;
    }
    ensure(violating >= 2, || format!("only {violating} violating swaps"))?;
    Ok(format!("{}; {violating} violating swaps all admit the bad trace", l.constraint))
}

fn fig4_goldens() -> Outcome {
    let run = |name: &str, wait_notify: bool| {
        let p = program(name);
        let Verdict::Bad(tr) = find_bad_trace(&p, Bounds::default()).unwrap() else {
            return Err(format!("{name} has no bad trace"));
        };
        let cfg = FixConfig {
            allow_wait_notify: wait_notify,
            ..FixConfig::default()
        };
        fix_bad(&p, &Constraint::True, &tr, &cfg).map_err(|e| format!("{name}: {e}"))
    };
    let left = run("fig4-left", false)?;
    ensure(left.constraint.to_string() == "(C <= A) & (1 <= 2)", || format!("left: {}", left.constraint))?;
    let center = run("fig4-center", false)?;
    ensure(center.constraint.to_string() == "[A;B]", || format!("center: {}", center.constraint))?;
    let right = run("fig4-right", true)?;
    ensure(right.constraint.to_string() == "B -> 1", || format!("right: {}", right.constraint))?;
    let inserted = matches!(
        &right.transformations[..],
        [Transformation::WaitNotify { notify_after, wait_before, .. }] if notify_after == "B" && wait_before == "1"
    );
    ensure(inserted, || format!("right: {:?}", right.transformations))?;
    Ok("(C <= A) & (1 <= 2), [A;B], B -> 1 with notify after B and wait before 1".into())
}

fn good_traces(p: &Program, max_events: usize) -> Vec<Trace> {
    let mut out = Vec::new();
    let _ = enumerate_traces(p, Bounds::default(), Policy::All, &mut |t| {
        if t.complete && !t.truncated && !t.is_bad() && t.executed().count() <= max_events {
            out.push(t);
        }
        ControlFlow::Continue(())
    });
    out
}

fn soundness_suite() -> Outcome {
    let cfg = LearnConfig {
        sound_fallback: true,
        ..LearnConfig::default()
    };
    let b = Bounds::default();
    let (mut traces, mut checks, mut skipped) = (0, 0, 0);
    for f in FIXTURES {
        let p = f.program().unwrap();
        let family = neighbourhood(&p, 2, b.domain_bound).map_err(|e| format!("{}: {e}", f.name))?;
        for tr in good_traces(&p, 10) {
            traces += 1;
            let l = learn_good(&p, &tr, cfg).map_err(|e| format!("{}: {e}", f.name))?;
            for (q, ts) in family.iter().skip(1) {
                if !satisfies(q, &l.constraint).unwrap() {
                    continue;
                }
                checks += 1;
                match check_regression(&p, ts, q, &tr, b) {
                    Ok(None) => {}
                    Ok(Some(w)) => {
                        return Err(format!("{}: {ts:?} regresses {} via {}", f.name, tr, w.trace));
                    }
                    Err(_) => skipped += 1,
                }
            }
        }
    }
    ensure(skipped == 0, || format!("{skipped} checks gave up"))?;
    Ok(format!("{traces} traces, {checks} programs checked, 0 regressions"))
}

fn runtime_contracts() -> Outcome {
    let mut runs = 0;
    for f in FIXTURES {
        let p = f.program().unwrap();
        for mode in [Mode::Mixed, Mode::BadOnly] {
            for heuristic in [Heuristic::Ce1, Heuristic::Ce2] {
                let cfg = RepairConfig {
                    mode,
                    heuristic,
                    allow_wait_notify: f.name == "fig4-right",
                    ..RepairConfig::default()
                };
                let r = repair(&p, &cfg);
                runs += 1;
                let tag = format!("{} {mode:?} {heuristic:?}", f.name);
                ensure(r.status == Status::Fixed, || format!("{tag}: {:?} {:?}", r.status, r.message))?;
                ensure(r.iterations <= 64, || format!("{tag}: {} iterations", r.iterations))?;
                ensure(r.contracts_held(), || format!("{tag}: contract failed"))?;
                let v = find_bad_trace(&r.program, cfg.bounds).unwrap();
                ensure(matches!(v, Verdict::Correct), || format!("{tag}: final program not correct"))?;
            }
        }
    }
    Ok(format!("{runs} runs fixed, regression-free and monotone"))
}

fn random_program(rng: &mut ChaCha8Rng) -> String {
    let vars = ["x", "y"];
    let mut src = String::new();
    for t in 0..rng.gen_range(1..=3) {
        src += &format!("thread t{t}:\n");
        for _ in 0..rng.gen_range(1..=4) {
            let v = vars[rng.gen_range(0..2)];
            let w = vars[rng.gen_range(0..2)];
            let c = rng.gen_range(0..=2);
            let s = match rng.gen_range(0..6) {
                0 => format!("{v} := {c}"),
                1 => format!("{v} := {w} + 1"),
                2 => format!("await({v} == {c})"),
                3 => format!("assert(!({v} == {c}))"),
                4 => format!("assume({c} >= {v})"),
                _ => format!("atomic {{ {v} := {w}; {w} := {c}; }}"),
            };
            src += &format!("  {s};\n");
        }
    }
    src
}

fn last_writer(info: &TraceInfo, x: usize, v: &str) -> Pos {
    (0..x).filter(|&j| info.writes[j].contains(v)).max().map_or(Pos::Bot, Pos::At)
}

fn reads_from(info: &TraceInfo, x: usize) -> Vec<DataEdge> {
    let mut by: BTreeMap<Pos, BTreeSet<String>> = BTreeMap::new();
    for v in &info.reads[x] {
        by.entry(last_writer(info, x, v)).or_default().insert(v.clone());
    }
    by.into_iter().map(|(from, vars)| DataEdge { from, to: x, vars }).collect()
}

fn depends(info: &TraceInfo, i: usize) -> BTreeSet<DataEdge> {
    let mut reach = BTreeSet::from([i]);
    loop {
        let next: BTreeSet<usize> = reach
            .iter()
            .flat_map(|&x| reads_from(info, x))
            .filter_map(|e| e.from.index())
            .collect();
        let n = reach.len();
        reach.extend(next);
        if reach.len() == n {
            break;
        }
    }
    reach.iter().flat_map(|&x| reads_from(info, x)).collect()
}

fn interfere(info: &TraceInfo, e: &DataEdge) -> BTreeSet<Edge> {
    let r = e.to;
    let rel: BTreeSet<&String> = match e.from {
        Pos::Bot => info.reads[r].iter().collect(),
        Pos::At(w) => info.writes[w].intersection(&info.reads[r]).collect(),
    };
    let clash = |j: usize| info.writes[j].iter().any(|v| rel.contains(v));
    let n = info.len();
    let later = (r + 1..n).filter(|&j| clash(j)).map(|j| (Pos::At(r), Pos::At(j)));
    let earlier = match e.from {
        Pos::At(w) => (0..w).filter(|&j| clash(j)).map(|j| (Pos::At(j), Pos::At(w))).collect(),
        Pos::Bot => Vec::new(),
    };
    later.chain(earlier).map(|(from, to)| Edge { from, to }).collect()
}

fn check_trace(p: &Program, m: &Machine, t: &Trace, close: bool) -> Result<usize, String> {
    let g = TraceGraph::build(p, t).map_err(|e| e.to_string())?;
    for i in 0..g.len() {
        ensure(g.info.depends(i) == depends(&g.info, i), || format!("depends({i}) on {t}"))?;
        for e in reads_from(&g.info, i) {
            ensure(g.interfere(&e) == interfere(&g.info, &e), || format!("interfere({e:?}) on {t}"))?;
        }
    }
    if !close {
        return Ok(0);
    }
    let Ok(members) = free_closure(m, t, CLOSURE_BUDGET) else {
        return Ok(0);
    };
    let err = t.vars.iter().position(|v| v == ERR_VAR);
    let strip = |s: &[i64]| -> Vec<i64> {
        s.iter().enumerate().filter(|(k, _)| Some(*k) != err).map(|(_, v)| *v).collect()
    };
    for ev in &members {
        let t2 = replay(m, ev).map_err(|e| format!("closure member of {t} does not replay: {e}"))?;
        ensure(strip(t2.final_state()) == strip(t.final_state()), || format!("closure member of {t} ends elsewhere"))?;
    }
    Ok(members.len())
}

fn explorer_oracle() -> Outcome {
    let bounds = Bounds {
        domain_bound: 2,
        ..Bounds::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut programs, mut traces, mut members) = (0, 0, 0);
    while programs < 2000 {
        let src = random_program(&mut rng);
        let p = parse(&src).map_err(|e| format!("{e}\n{src}"))?;
        programs += 1;
        let m = Machine::new(&p, bounds);
        let mut seen = Vec::new();
        let _ = enumerate_traces(&p, bounds, Policy::All, &mut |t| {
            seen.push(t);
            if seen.len() >= 40 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        for (k, t) in seen.iter().enumerate() {
            traces += 1;
            members += check_trace(&p, &m, t, k < 10).map_err(|e| format!("{e}\n{src}"))?;
        }
    }
    Ok(format!("{programs} programs, {traces} traces, {members} closure members"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 intro example: mixed and badOnly", paper1_example, 5),
        ("2 iwl3945 deadlock model", iwl3945, 30),
        ("3 exact learning on the first trace", fig3a_exact, 5),
        ("4 interference learning", fig3b_interference, 10),
        ("5 bad-trace fix goldens", fig4_goldens, 60),
        ("6 learned constraints are regression-free", soundness_suite, 300),
        ("7 per-iteration contracts on every fixture", runtime_contracts, 600),
        ("8 explorer agrees with set oracles", explorer_oracle, 120),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(d) if took > Duration::from_secs(limit) => Err(format!("{d}; over the {limit}s budget")),
            o => o,
        };
        match outcome {
            Ok(d) => println!("PASS criterion {name}: {d} ({:.1}s)", took.as_secs_f64()),
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {name}: {e} ({:.1}s)", took.as_secs_f64());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
