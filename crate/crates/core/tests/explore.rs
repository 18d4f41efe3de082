use std::ops::ControlFlow;

use conrepair::explore::enumerate::collect_traces;
use conrepair::explore::trace::parse_dump;
use conrepair::explore::{self, Bounds, Machine, Policy, Verdict};
use conrepair::lang::{parse, Transformation};

fn fixture(name: &str) -> conrepair::lang::Program {
    let path = format!("{}/../../fixtures/{name}.cw", env!("CARGO_MANIFEST_DIR"));
    parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn labels(t: &explore::Trace) -> String {
    t.labels().join(",")
}

#[test]
fn single_steps() {
    let p = fixture("paper1");
    let m = Machine::new(&p, Bounds::default());
    let s = m.initial();
    assert!(m.successors(&s, 0).unwrap().is_empty());
    let o = &m.successors(&s, 1).unwrap()[0];
    assert_eq!(m.value(&o.state.vals, "x"), 1);
}

#[test]
fn failed_assert_continues() {
    let p = fixture("fig4-center");
    let m = Machine::new(&p, Bounds::default());
    let s = m.initial();
    let s = m.successors(&s, 0).unwrap().remove(0).state;
    let s = m.successors(&s, 1).unwrap().remove(0).state;
    assert_eq!(m.value(&s.vals, "err"), 1);
    let s = m.successors(&s, 0).unwrap().remove(0).state;
    assert_eq!(m.value(&s.vals, "x"), 1);
    assert!(m.all_done(&s));
}

#[test]
fn paper1_sequential_and_all() {
    let p = fixture("paper1");
    let (seq, stats) = collect_traces(&p, Bounds::default(), Policy::SequentialOnly).unwrap();
    assert!(!stats.truncated);
    let t = seq
        .iter()
        .find(|t| labels(t) == "A,B,C,1,2,3,n,p")
        .expect("sequential 2,1,3 order");
    assert!(!t.is_bad() && t.complete && t.is_sequential());
    assert!(seq.iter().filter(|t| t.complete).all(|t| !t.is_bad()));

    let (all, stats) = collect_traces(&p, Bounds::default(), Policy::All).unwrap();
    assert!(!stats.truncated);
    assert!(all.iter().any(|t| labels(t).starts_with("A,B,1,2,3") && t.is_bad()));
}

#[test]
fn preemption_free_policy_is_checked_independently() {
    for name in ["paper1", "fig3b", "iwl3945"] {
        let p = fixture(name);
        let (pf, _) = collect_traces(&p, Bounds::default(), Policy::PreemptionFreeOnly).unwrap();
        assert!(!pf.is_empty());
        for t in &pf {
            assert!(t.is_preemption_free(), "{name}: {}", labels(t));
        }
    }
}

#[test]
fn single_thread_has_one_trace() {
    let p = parse("thread t: x := 1; y := 2; assert(x == 1);").unwrap();
    let (all, _) = collect_traces(&p, Bounds::default(), Policy::All).unwrap();
    assert_eq!(all.len(), 1);
    assert!(all[0].complete);
}

#[test]
fn bad_trace_search() {
    let b = Bounds::default();
    let Verdict::Bad(t) = explore::find_bad_trace(&fixture("paper1"), b).unwrap() else {
        panic!()
    };
    assert!(t.is_bad());
    let Verdict::Bad(t) = explore::verify(&fixture("fig4-center"), b).unwrap() else {
        panic!()
    };
    assert_eq!(labels(&t), "A,1");

    let p1 = conrepair::lang::apply_transformation(
        &fixture("paper1"),
        &Transformation::Swap {
            first: "B".into(),
            second: "C".into(),
        },
        4,
    )
    .unwrap();
    let Verdict::Bad(t) = explore::verify(&p1, b).unwrap() else {
        panic!()
    };
    assert_eq!(labels(&t), "A,C,n,p");

    let fixed = parse(
        "init: x = 0; y = 0; z = 0
         thread thread1: 1: await(x == 1); 2: await(y == 1); 3: assert(z == 1);
         thread thread2: B: y := 1; C: z := 1; A: x := 1;
         thread thread3: n: await(z == 1); p: assert(y == 1);",
    )
    .unwrap();
    assert_eq!(explore::verify(&fixed, b).unwrap(), Verdict::Correct);
}

#[test]
fn truncation_is_unknown() {
    let p = fixture("paper1");
    let b = Bounds {
        max_steps: 2,
        ..Bounds::default()
    };
    assert_eq!(explore::verify(&p, b).unwrap(), Verdict::Unknown);
    let mut n = 0;
    let stats = explore::enumerate_traces(&p, b, Policy::All, &mut |_| {
        n += 1;
        ControlFlow::Continue(())
    })
    .unwrap();
    assert!(stats.truncated);
}

#[test]
fn loops_and_branches() {
    let p = parse("thread t: while (*) { x := x + 1; } if (*) { y := 1; } else { y := 2; }").unwrap();
    let (all, stats) = collect_traces(&p, Bounds::default(), Policy::All).unwrap();
    assert!(!stats.truncated);
    // 0, 1 or 2 iterations, times two branches.
    assert_eq!(all.len(), 6);
}

#[test]
fn dump_round_trip() {
    let p = fixture("fig4-center");
    let Verdict::Bad(t) = explore::verify(&p, Bounds::default()).unwrap() else {
        panic!()
    };
    let text = t.dump();
    assert_eq!(text, "0:A | err=0,x=0\n1:1 | err=1,x=0\n# bad=1 complete=0 pf=0 seq=0\n");
    let d = parse_dump(&text).unwrap();
    assert_eq!(d.len(), 1);
    assert!(d[0].bad && !d[0].complete);
    assert_eq!(d[0].events[1], (1, "1".to_string(), None));
}

#[test]
fn example_trace_transformation() {
    // Threads 2 and 3 of paper1, with the good trace A;B;C;n;p.
    let q = parse(
        "init: x = 0; y = 0; z = 0
         thread thread2: A: x := 1; B: y := 1; C: z := 1;
         thread thread3: n: await(z == 1); p: assert(y == 1);",
    )
    .unwrap();
    let (seq, _) = collect_traces(&q, Bounds::default(), Policy::SequentialOnly).unwrap();
    let tau = seq.iter().find(|t| labels(t) == "A,B,C,n,p").unwrap();
    let swap = Transformation::Swap {
        first: "B".into(),
        second: "C".into(),
    };
    let q1 = conrepair::lang::apply_transformation(&q, &swap, 4).unwrap();
    let images = explore::apply_trace_transformations(&q, tau, &[swap], &q1, Bounds::default()).unwrap();
    let got: Vec<String> = images.iter().map(labels).collect();
    assert!(got.contains(&"A,C,B,n,p".to_string()), "{got:?}");
    assert!(got.contains(&"A,C,n,p,B".to_string()), "{got:?}");
    assert!(images.iter().any(|t| t.is_bad()));
}

#[test]
fn free_closure_and_preemption_free() {
    let p = fixture("paper1");
    let m = Machine::new(&p, Bounds::default());
    let (seq, _) = collect_traces(&p, Bounds::default(), Policy::SequentialOnly).unwrap();
    for t in &seq {
        assert!(explore::freely_transforms_to_preemption_free(&m, t));
    }
}

#[test]
fn extension_appends_pending_statements() {
    let p = fixture("iwl3945");
    let b = Bounds::default();
    let Verdict::Bad(t) = explore::verify(&p, b).unwrap() else {
        panic!()
    };
    let m = Machine::new(&p, b);
    let ext = explore::extend_trace(&m, &t).unwrap();
    assert!(ext.len() > t.len());
    let pending: Vec<&str> = ext.events.iter().filter(|e| e.pending).map(|e| e.label.as_str()).collect();
    assert_eq!(labels(&t), "A.0,A.1,1.0,1.1,2,w,c1");
    assert!(pending.contains(&"6"), "{pending:?}");
    assert!(pending.contains(&"p"), "{pending:?}");
}

#[test]
fn bad_schedules_are_data_independent() {
    // Replaying a bad schedule from other initial values stays bad, unless
    // the perturbed variable is one the failing assertion reads.
    for name in ["paper1", "fig4-left", "fig4-center", "iwl3945", "ex1", "ex2", "ex4", "ex5"] {
        let p = fixture(name);
        let Verdict::Bad(tr) = explore::find_bad_trace(&p, Bounds::default()).unwrap() else {
            panic!("{name} has no bad trace");
        };
        let m = Machine::new(&p, Bounds::default());
        let failing = conrepair::learn::failing_asserts(&m, &tr);
        let info = conrepair::graph::TraceInfo::new(&p, &tr).unwrap();
        let asserted: Vec<&String> = (0..info.len())
            .filter(|&i| failing.contains(&info.labels[i]))
            .flat_map(|i| &info.reads[i])
            .collect();
        let schedule = tr.labels();
        let mut replayed = 0;
        for v in p.variables().iter().filter(|v| *v != conrepair::lang::ERR_VAR) {
            for value in -1..=2 {
                let mut q = p.clone();
                q.init.insert(v.clone(), value);
                let m = Machine::new(&q, Bounds::default());
                if let Ok(t) = explore::replay_labels(&m, &schedule) {
                    replayed += 1;
                    assert!(t.is_bad() || asserted.contains(&v), "{name}: {v} = {value}");
                }
            }
        }
        assert!(replayed > 0, "{name}");
    }
}
