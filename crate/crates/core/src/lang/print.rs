//! Canonical pretty-printer. Every label is printed, so the output parses
//! back to an identical program.

use std::fmt::Write;

use super::ast::{Node, Program, Stmt, StmtKind};

pub fn stmt_text(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Assign { var, value } => format!("{var} := {value}"),
        StmtKind::Assume(e) => format!("assume({e})"),
        StmtKind::Assert(e) => format!("assert({e})"),
        StmtKind::Await(e) => format!("await({e})"),
        StmtKind::Skip => "skip".into(),
        StmtKind::Wait(v) => format!("wait({v})"),
        StmtKind::Notify(v) => format!("notify({v})"),
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn print_seq(out: &mut String, seq: &[Node], depth: usize) {
    for n in seq {
        print_node(out, n, depth);
    }
}

fn print_node(out: &mut String, n: &Node, depth: usize) {
    indent(out, depth);
    match n {
        Node::Stmt(s) => {
            let _ = writeln!(out, "{}: {};", s.label, stmt_text(s));
        }
        Node::Atomic(b) | Node::Group(b) => {
            let kw = if matches!(n, Node::Atomic(_)) {
                "atomic"
            } else {
                "group"
            };
            match &b.name {
                Some(name) => {
                    let _ = writeln!(out, "{name}: {kw} {{");
                }
                None => {
                    let _ = writeln!(out, "{kw} {{");
                }
            }
            print_seq(out, &b.body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        Node::If {
            label,
            then_branch,
            else_branch,
        } => {
            let _ = writeln!(out, "{label}: if (*) {{");
            print_seq(out, then_branch, depth + 1);
            indent(out, depth);
            if else_branch.is_empty() {
                out.push_str("}\n");
            } else {
                out.push_str("} else {\n");
                print_seq(out, else_branch, depth + 1);
                indent(out, depth);
                out.push_str("}\n");
            }
        }
        Node::While { label, body } => {
            let _ = writeln!(out, "{label}: while (*) {{");
            print_seq(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
    }
}

/// Render a program in canonical concrete syntax.
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    if !p.init.is_empty() {
        let parts: Vec<String> = p.init.iter().map(|(k, v)| format!("{k} = {v}")).collect();
        let _ = writeln!(out, "init: {}", parts.join("; "));
    }
    for t in &p.threads {
        let fixed = if t.fixed { " fixed" } else { "" };
        let _ = writeln!(out, "thread {}{}:", t.name, fixed);
        print_seq(&mut out, &t.body, 1);
    }
    out
}

impl std::fmt::Display for Program {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print_program(self))
    }
}
