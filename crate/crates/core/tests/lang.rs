use conrepair::lang::{self, parse, print_program, LangError, Transformation};

fn fixture(name: &str) -> String {
    let path = format!("{}/../../fixtures/{name}.cw", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap()
}

const FIXTURES: &[&str] = &[
    "paper1",
    "fig3a",
    "fig3b",
    "fig3c",
    "fig4-left",
    "fig4-center",
    "fig4-right",
    "iwl3945",
];

#[test]
fn fixtures_round_trip() {
    for name in FIXTURES {
        let p = parse(&fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let printed = print_program(&p);
        let q = parse(&printed).unwrap();
        assert_eq!(p, q, "{name}\n{printed}");
        assert_eq!(printed, print_program(&q));
    }
}

#[test]
fn paper1_shape() {
    let p = parse(&fixture("paper1")).unwrap();
    let labels: Vec<Vec<String>> = p
        .threads
        .iter()
        .map(|t| t.leaves().iter().map(|s| s.label.clone()).collect())
        .collect();
    assert_eq!(labels, [vec!["1", "2", "3"], vec!["A", "B", "C"], vec!["n", "p"]]);
}

#[test]
fn empty_thread_body() {
    let p = parse("thread t:").unwrap();
    assert_eq!(p.threads.len(), 1);
    assert!(p.threads[0].body.is_empty());
}

#[test]
fn separator_syntax_and_auto_labels() {
    let p = parse("x := 1; y := 2 ||| assert(x == 1)").unwrap();
    assert_eq!(p.threads.len(), 2);
    assert_eq!(p.threads[0].leaves()[1].label, "t0.1");
    assert_eq!(p.threads[1].leaves()[0].label, "t1.0");
}

#[test]
fn iwl_groups_and_blocks() {
    let p = parse(&fixture("iwl3945")).unwrap();
    assert!(p.threads[0].fixed);
    let blocks = lang::basic_blocks(&p);
    let alive: Vec<_> = blocks.iter().filter(|b| b.thread == 1).collect();
    assert_eq!(alive.len(), 1);
    assert_eq!(alive[0].unit_names, ["1", "2", "g", "6"]);
    assert_eq!(alive[0].units[2], ["w", "3.0", "3.1", "3.2", "4", "5"]);
}

#[test]
fn loops_split_blocks() {
    let p = parse("thread t: x := 1; while (*) { y := 1; } z := 1;").unwrap();
    assert_eq!(lang::basic_blocks(&p).len(), 3);
}

#[test]
fn errors() {
    assert!(matches!(
        parse("thread t: A: x := 1; A: y := 1;"),
        Err(LangError::DuplicateLabel(l)) if l == "A"
    ));
    match parse("thread t:\n  x := ;") {
        Err(LangError::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 8)),
        other => panic!("{other:?}"),
    }
    assert!(parse("init: err = 1\nthread t: skip;").is_err());
}

#[test]
fn sequential_equivalence() {
    let p = parse("thread t: a: x := 1; b: y := 1; c: x := 2; d: await(y == 1); e: z := 1;").unwrap();
    assert!(lang::sequentially_equivalent(&p, "a", "b", 4).unwrap());
    assert!(lang::sequentially_equivalent(&p, "b", "c", 4).unwrap());
    assert!(!lang::sequentially_equivalent(&p, "a", "c", 4).unwrap());
    assert!(lang::sequentially_equivalent(&p, "d", "e", 2).unwrap());
    assert!(lang::sequentially_equivalent(&p, "e", "d", 2).unwrap());
}

#[test]
fn transformations() {
    let p = parse(&fixture("paper1")).unwrap();
    let swap = Transformation::Swap {
        first: "B".into(),
        second: "C".into(),
    };
    let p1 = lang::apply_transformation(&p, &swap, 4).unwrap();
    let t2: Vec<_> = p1.threads[1].leaves().iter().map(|s| s.label.clone()).collect();
    assert_eq!(t2, ["A", "C", "B"]);
    assert_eq!(p.leaf_labels(), p1.leaf_labels());
    let bad = Transformation::Swap {
        first: "A".into(),
        second: "C".into(),
    };
    assert!(lang::apply_transformation(&p, &bad, 4).is_err());

    let c = parse(&fixture("fig4-center")).unwrap();
    let at = Transformation::Atomic {
        first: "A".into(),
        last: "B".into(),
    };
    let c1 = lang::apply_transformation(&c, &at, 4).unwrap();
    assert!(print_program(&c1).contains("atomic {\n    A: x := 0;\n    B: x := 1;\n  }"));

    let r = parse(&fixture("fig4-right")).unwrap();
    let wn = Transformation::WaitNotify {
        notify_after: "B".into(),
        wait_before: "1".into(),
        signal: lang::transform::fresh_signal(&r),
    };
    let r1 = lang::apply_transformation(&r, &wn, 4).unwrap();
    assert_eq!(r1.leaf_labels().len(), r.leaf_labels().len() + 2);
    let text = print_program(&r1);
    assert!(text.contains("B: y := 1;\n  notify_sig0: notify(sig0);"));
    assert!(text.contains("wait_sig0: wait(sig0);\n  1: assert(y == 1);"));
}
