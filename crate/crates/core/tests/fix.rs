use std::collections::BTreeSet;

use conrepair::constraint::{satisfies, Constraint};
use conrepair::explore::{extend_trace, find_bad_trace, replay_labels, Bounds, Machine, Trace, Verdict};
use conrepair::fix::{
    find_elimination_cycles, fix_bad, generalize_bad_trace, Fix, FixConfig, FixError, Heuristic, Role,
};
use conrepair::lang::transform::acts_across_preemption;
use conrepair::lang::{parse, Program, Transformation};

fn fixture(name: &str) -> Program {
    let path = format!("{}/../../fixtures/{name}.cw", env!("CARGO_MANIFEST_DIR"));
    parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn bad(p: &Program) -> Trace {
    match find_bad_trace(p, Bounds::default()).unwrap() {
        Verdict::Bad(t) => t,
        v => panic!("expected a bad trace, got {v:?}"),
    }
}

fn fix(p: &Program, phi: &str, cfg: FixConfig) -> Fix {
    let phi = if phi.is_empty() {
        Constraint::True
    } else {
        Constraint::parse(phi, p).unwrap()
    };
    let f = fix_bad(p, &phi, &bad(p), &cfg).unwrap();
    assert!(satisfies(&f.program, &Constraint::and([phi, f.constraint.clone()])).unwrap());
    f
}

fn thread_labels(p: &Program, t: usize) -> Vec<String> {
    p.threads[t].body.iter().filter_map(|n| n.unit_name().map(String::from)).collect()
}

#[test]
fn paper1_necessary_edges() {
    let p = fixture("paper1");
    let m = Machine::new(&p, Bounds::default());
    let tr = replay_labels(&m, &["A", "B", "1", "2", "3"]).unwrap();
    let ext = extend_trace(&m, &tr).unwrap();
    let g = generalize_bad_trace(&p, &ext).unwrap();
    let edges: BTreeSet<(String, String)> = g
        .edges
        .iter()
        .map(|e| (g.nodes[e.from].label.clone(), g.nodes[e.to].label.clone()))
        .collect();
    for (a, b) in [("A", "1"), ("B", "2"), ("1", "2"), ("2", "3"), ("3", "C")] {
        assert!(edges.contains(&(a.to_string(), b.to_string())), "{a} -> {b}");
    }
    assert!(g.edges.iter().all(|e| !matches!(e.role, Role::Candidate(_))));
}

#[test]
fn good_trace_is_rejected() {
    let p = fixture("paper1");
    let m = Machine::new(&p, Bounds::default());
    let tr = replay_labels(&m, &["A", "B", "C", "1", "2", "3"]).unwrap();
    let r = fix_bad(&p, &Constraint::True, &tr, &FixConfig::default());
    assert_eq!(r.unwrap_err(), FixError::NotBad);
}

#[test]
fn fig4_left_reorders() {
    let p = fixture("fig4-left");
    let f = fix(&p, "", FixConfig::default());
    assert_eq!(f.constraint.to_string(), "(C <= A) & (1 <= 2)");
    assert_eq!(f.cycle.as_deref(), Some("C -> A -> 1 -> 2 -> C"));
}

#[test]
fn fig4_center_needs_atomicity() {
    let p = fixture("fig4-center");
    let f = fix(&p, "", FixConfig::default());
    assert_eq!(f.constraint.to_string(), "[A;B]");
    assert_eq!(
        f.transformations,
        vec![Transformation::Atomic {
            first: "A".into(),
            last: "B".into()
        }]
    );
}

#[test]
fn fig4_right_needs_wait_notify() {
    let p = fixture("fig4-right");
    let cfg = FixConfig {
        allow_wait_notify: true,
        ..FixConfig::default()
    };
    let f = fix(&p, "", cfg);
    assert_eq!(f.constraint.to_string(), "B -> 1");
    assert!(matches!(f.transformations[..], [Transformation::WaitNotify { .. }]));
    assert!(matches!(verify(&f.program), Verdict::Correct));
}

fn verify(p: &Program) -> Verdict {
    find_bad_trace(p, Bounds::default()).unwrap()
}

#[test]
fn paper1_respects_learned_orders() {
    let p = fixture("paper1");
    let f = fix(&p, "(B <= C) & (n <= p)", FixConfig::default());
    assert_eq!(thread_labels(&f.program, 1), ["B", "C", "A"]);
    assert!(matches!(verify(&f.program), Verdict::Correct));

    let f = fix(&p, "", FixConfig::default());
    assert_eq!(thread_labels(&f.program, 1), ["A", "C", "B"]);
}

#[test]
fn iwl3945_moves_the_unlock() {
    let p = fixture("iwl3945");
    let f = fix(&p, "", FixConfig::default());
    assert_eq!(thread_labels(&f.program, 1), ["1", "2", "6", "g"]);
    assert_eq!(f.constraint.to_string(), "6 <= g");
    assert!(matches!(verify(&f.program), Verdict::Correct));
}

#[test]
fn cycles_are_ranked() {
    let p = fixture("paper1");
    let m = Machine::new(&p, Bounds::default());
    let tr = bad(&p);
    let mut g = generalize_bad_trace(&p, &extend_trace(&m, &tr).unwrap()).unwrap();
    assert!(find_elimination_cycles(&g, &p, 16).is_empty());
    g.add_candidates(&p, false, &mut |_| true);
    let cycles = find_elimination_cycles(&g, &p, 16);
    assert!(!cycles.is_empty());
    assert!(cycles.windows(2).all(|w| w[0].rank() <= w[1].rank()));
    let first_atomic = cycles.iter().position(|c| !c.only_orderings()).unwrap();
    assert!(cycles[..first_atomic].iter().all(|c| c.only_orderings()));
}

#[test]
fn atomic_sections_when_reorderings_are_blocked() {
    let p = fixture("paper1");
    for h in [Heuristic::Ce1, Heuristic::Ce2] {
        let cfg = FixConfig {
            heuristic: h,
            ce2_patience: 0,
            ..FixConfig::default()
        };
        let f = fix(&p, "(A <= B) & (B <= C) & (1 <= 2) & (2 <= 3) & (n <= p)", cfg);
        // Every reordering breaks the constraint, so an atomic section is needed.
        assert!(
            f.transformations.iter().any(|t| matches!(t, Transformation::Atomic { .. })),
            "{h:?}"
        );
    }
}

#[test]
fn no_transformation_crosses_preemption_needlessly() {
    for name in ["paper1", "fig4-left", "fig4-center", "iwl3945"] {
        let p = fixture(name);
        let f = fix(&p, "", FixConfig::default());
        let mut cur = p.clone();
        for t in &f.transformations {
            if matches!(t, Transformation::Swap { .. }) {
                let m = Machine::new(&p, Bounds::default());
                if !conrepair::explore::freely_transforms_to_preemption_free(&m, &bad(&p)) {
                    assert!(!acts_across_preemption(&cur, t), "{name}: {t}");
                }
            }
            cur = conrepair::lang::transform::apply_structural(&cur, t).unwrap();
        }
    }
}
