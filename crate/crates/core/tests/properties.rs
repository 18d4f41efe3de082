use std::ops::ControlFlow;

use conrepair::constraint::satisfies;
use conrepair::engine::{repair, Mode, RepairConfig, Status};
use conrepair::explore::{enumerate_traces, find_bad_trace, Bounds, Policy, Trace, Verdict};
use conrepair::lang::{parse, print_program, Program};
use conrepair::learn::oracle::neighbourhood;
use conrepair::learn::{check_regression, learn_good, LearnConfig};
use proptest::prelude::*;

fn stmt() -> impl Strategy<Value = String> {
    let var = prop_oneof![Just("x"), Just("y"), Just("z")];
    (0..6u8, var.clone(), var, 0..=2i64).prop_map(|(k, v, w, c)| match k {
        0 => format!("{v} := {c}"),
        1 => format!("{v} := {w} + 1"),
        2 => format!("await({v} == {c})"),
        3 => format!("assert(!({v} == {c}))"),
        4 => format!("if (*) {{ {v} := {c}; }} else {{ {w} := {c}; }}"),
        _ => format!("atomic {{ {v} := {w}; {w} := {c}; }}"),
    })
}

fn source() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::collection::vec(stmt(), 1..=3), 1..=3).prop_map(|threads| {
        let mut s = String::new();
        for (t, body) in threads.iter().enumerate() {
            s += &format!("thread t{t}:\n");
            for st in body {
                s += &format!("  {st};\n");
            }
        }
        s
    })
}

fn bounds() -> Bounds {
    Bounds {
        domain_bound: 2,
        ..Bounds::default()
    }
}

fn traces(p: &Program, limit: usize) -> Vec<Trace> {
    let mut out = Vec::new();
    let _ = enumerate_traces(p, bounds(), Policy::All, &mut |t| {
        out.push(t);
        if out.len() >= limit {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn print_round_trips(src in source()) {
        let p = parse(&src).unwrap();
        prop_assert_eq!(parse(&print_program(&p)).unwrap(), p);
    }

    #[test]
    fn enumeration_is_deterministic(src in source()) {
        let p = parse(&src).unwrap();
        let a: Vec<_> = traces(&p, 200).iter().map(|t| t.dump()).collect();
        let b: Vec<_> = traces(&p, 200).iter().map(|t| t.dump()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn learned_constraints_are_sound(src in source()) {
        let p = parse(&src).unwrap();
        let cfg = LearnConfig { sound_fallback: true, ..LearnConfig::default() };
        let family = neighbourhood(&p, 1, 2).unwrap();
        for tr in traces(&p, 30).into_iter().filter(|t| t.complete && !t.is_bad()).take(4) {
            let l = learn_good(&p, &tr, cfg).unwrap();
            prop_assert!(satisfies(&p, &l.constraint).unwrap());
            for (q, ts) in family.iter().skip(1) {
                if satisfies(q, &l.constraint).unwrap() {
                    if let Ok(w) = check_regression(&p, ts, q, &tr, bounds()) {
                        prop_assert!(w.is_none(), "{:?} regresses {}", ts, tr);
                    }
                }
            }
        }
    }

    #[test]
    fn repair_keeps_its_contracts(src in source(), bad_only in any::<bool>()) {
        let p = parse(&src).unwrap();
        let cfg = RepairConfig {
            mode: if bad_only { Mode::BadOnly } else { Mode::Mixed },
            bounds: bounds(),
            max_iterations: 8,
            ..RepairConfig::default()
        };
        let r = repair(&p, &cfg);
        prop_assert!(r.contracts_held());
        prop_assert!(r.iterations <= 8);
        if r.status == Status::Fixed {
            prop_assert!(matches!(find_bad_trace(&r.program, bounds()).unwrap(), Verdict::Correct));
        }
    }
}
