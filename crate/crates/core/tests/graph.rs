use std::collections::BTreeSet;

use conrepair::explore::{replay_labels, Bounds, Machine, Trace};
use conrepair::graph::{DataEdge, Edge, EdgeKind, Pos, TraceGraph};
use conrepair::lang::{parse, Program};

fn fixture(name: &str) -> Program {
    let path = format!("{}/../../fixtures/{name}.cw", env!("CARGO_MANIFEST_DIR"));
    parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn trace(p: &Program, labels: &str) -> Trace {
    let m = Machine::new(p, Bounds::default());
    let labels: Vec<&str> = labels.split(',').collect();
    replay_labels(&m, &labels).unwrap()
}

fn pos(g: &TraceGraph, label: &str) -> usize {
    g.info.labels.iter().position(|l| l == label).unwrap()
}

fn edges(g: &TraceGraph, set: &BTreeSet<DataEdge>) -> BTreeSet<(String, String)> {
    set.iter()
        .map(|e| {
            let from = match e.from {
                Pos::Bot => "bot".to_string(),
                Pos::At(i) => g.info.labels[i].clone(),
            };
            (from, g.info.labels[e.to].clone())
        })
        .collect()
}

fn pairs(v: &[(&str, &str)]) -> BTreeSet<(String, String)> {
    v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

#[test]
fn tau3_edges() {
    let p = fixture("paper1");
    let g = TraceGraph::build(&p, &trace(&p, "A,B,C,1,2,n,3,p")).unwrap();
    assert_eq!(edges(&g, &g.df_asserts), pairs(&[("C", "3"), ("B", "p")]));
    assert_eq!(edges(&g, &g.df_conds), pairs(&[("A", "1"), ("B", "2"), ("C", "n")]));
    assert_eq!(g.info.last(pos(&g, "p"), "y").unwrap(), Pos::At(pos(&g, "B")));
    let d = g.info.depends(pos(&g, "p"));
    assert_eq!(edges(&g, &d), pairs(&[("B", "p")]));

    let covers = g.find_covers(Pos::At(pos(&g, "B")), Pos::At(pos(&g, "p")), 64);
    let first: Vec<&str> = covers[0]
        .path
        .iter()
        .map(|p| g.info.labels[p.index().unwrap()].as_str())
        .collect();
    assert_eq!(first, ["B", "C", "n", "p"]);
    assert_eq!(
        covers[0].hops,
        [EdgeKind::IntraThreadOrder, EdgeKind::DfConds, EdgeKind::IntraThreadOrder]
    );
    // The assert at 3 reads z from C in another thread: no cover.
    assert!(g.find_covers(Pos::At(pos(&g, "C")), Pos::At(pos(&g, "3")), 64).is_empty());
}

#[test]
fn fig3_edges() {
    let p = fixture("fig3a");
    let g = TraceGraph::build(&p, &trace(&p, "1,2,A,B")).unwrap();
    assert_eq!(edges(&g, &g.info.depends(pos(&g, "B"))), pairs(&[("1", "B")]));
    assert_eq!(edges(&g, &g.info.depends(pos(&g, "A"))), pairs(&[("2", "A")]));
    let c = g.find_covers(Pos::At(0), Pos::At(3), 64);
    assert_eq!(c[0].path, [Pos::At(0), Pos::At(1), Pos::At(2), Pos::At(3)]);

    let p = fixture("fig3b");
    let g = TraceGraph::build(&p, &trace(&p, "1,2,A,B,C,3,4")).unwrap();
    assert_eq!(g.info.last(pos(&g, "B"), "x").unwrap(), Pos::At(0));
    let e = g.df_asserts.iter().next().unwrap().clone();
    let inter = g.interfere(&e);
    assert_eq!(
        inter,
        BTreeSet::from([Edge {
            from: Pos::At(pos(&g, "B")),
            to: Pos::At(pos(&g, "4"))
        }])
    );

    let p = fixture("fig3c");
    let g = TraceGraph::build(&p, &trace(&p, "1,2',2,A,B")).unwrap();
    assert_eq!(edges(&g, &g.df_conds), pairs(&[("2", "A")]));
    assert_eq!(edges(&g, &g.df_asserts), pairs(&[("1", "B")]));
    assert_eq!(
        g.non_free,
        BTreeSet::from([Edge {
            from: Pos::At(1),
            to: Pos::At(2)
        }])
    );
}

#[test]
fn bottom_interference() {
    let p = parse("thread a: r: assert(x == 0); thread b: w: x := 1;").unwrap();
    let g = TraceGraph::build(&p, &trace(&p, "r,w")).unwrap();
    let e = g.df_asserts.iter().next().unwrap().clone();
    assert_eq!(e.from, Pos::Bot);
    assert_eq!(
        g.interfere(&e),
        BTreeSet::from([Edge {
            from: Pos::At(0),
            to: Pos::At(1)
        }])
    );
}

#[test]
fn single_statement_graph_and_dot() {
    let p = parse("thread t: a: x := 1;").unwrap();
    let g = TraceGraph::build(&p, &trace(&p, "a")).unwrap();
    assert!(g.df_conds.is_empty() && g.df_asserts.is_empty() && g.non_free.is_empty());
    assert!(g.intra(Pos::Bot, Pos::At(0)));
    assert!(g.to_dot().contains("bot -> n0 [kind=IntraThreadOrder];"));
}
