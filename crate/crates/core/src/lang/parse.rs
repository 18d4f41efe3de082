//! Recursive-descent parser for the `.cw` concrete syntax.

use std::collections::{BTreeMap, HashSet};

use super::ast::{BinOp, Block, Expr, Node, Program, Stmt, StmtKind, Thread, ERR_VAR};
use super::LangError;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Word(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: &[&str] = &[
    "|||", ":=", ">=", "==", "&&", ":", ";", ",", "(", ")", "{", "}", "*", "+", "/", "=", "!", "-",
];

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '\''
}

fn tokenize(src: &str) -> Result<Vec<Token>, LangError> {
    let mut out = Vec::new();
    for (lno, line) in src.lines().enumerate() {
        let line = match line.find("//") {
            Some(i) => &line[..i],
            None => line,
        };
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let (line, col) = (lno + 1, i + 1);
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if is_word_char(c) {
                let start = i;
                while i < chars.len() && is_word_char(chars[i]) {
                    i += 1;
                }
                let w: String = chars[start..i].iter().collect();
                let tok = if w.chars().all(|c| c.is_ascii_digit()) {
                    Tok::Int(w.parse().map_err(|_| LangError::Syntax {
                        line,
                        col,
                        msg: format!("integer literal `{w}` out of range"),
                    })?)
                } else {
                    Tok::Word(w)
                };
                out.push(Token { tok, line, col });
                continue;
            }
            let rest: String = chars[i..].iter().take(3).collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(s) => {
                    out.push(Token {
                        tok: Tok::Sym(s),
                        line,
                        col,
                    });
                    i += s.len();
                }
                None => {
                    return Err(LangError::Syntax {
                        line,
                        col,
                        msg: format!("unexpected character `{c}`"),
                    })
                }
            }
        }
    }
    let (line, col) = out.last().map_or((1, 1), |t| (t.line, t.col + 1));
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

/// Integer literals above this are treated as labels when a `:` follows.
fn describe(t: &Tok) -> String {
    match t {
        Tok::Word(w) => format!("`{w}`"),
        Tok::Int(i) => format!("`{i}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, LangError> {
        let t = &self.toks[self.pos];
        Err(LangError::Syntax {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Word(x) if x == w)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), LangError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", describe(self.peek())))
        }
    }

    /// A label token: any word or integer literal.
    fn label_token(&self, k: usize) -> Option<String> {
        match self.peek_at(k) {
            Tok::Word(w) => Some(w.clone()),
            Tok::Int(i) => Some(i.to_string()),
            _ => None,
        }
    }

    fn ident(&mut self) -> Result<String, LangError> {
        match self.peek().clone() {
            Tok::Word(w) => {
                self.bump();
                Ok(w)
            }
            t => self.err(format!("expected identifier, found {}", describe(&t))),
        }
    }

    fn program(&mut self) -> Result<(Vec<Thread>, BTreeMap<String, i64>), LangError> {
        let mut init = BTreeMap::new();
        if self.is_word("init") && matches!(self.peek_at(1), Tok::Sym(":")) {
            self.bump();
            self.bump();
            while matches!(self.peek(), Tok::Word(_)) && matches!(self.peek_at(1), Tok::Sym("="))
            {
                let v = self.ident()?;
                self.bump();
                let val = self.int_literal()?;
                if init.insert(v.clone(), val).is_some() {
                    return self.err(format!("variable `{v}` initialised twice"));
                }
                if !self.eat_sym(";") {
                    self.eat_sym(",");
                }
            }
        }
        let mut threads = Vec::new();
        if self.is_thread_header() {
            while self.is_thread_header() {
                self.bump();
                let name = self
                    .label_token(0)
                    .ok_or(())
                    .or_else(|_| self.err("expected thread name"))?;
                self.bump();
                let fixed = if self.is_word("fixed") {
                    self.bump();
                    true
                } else {
                    false
                };
                self.expect_sym(":")?;
                let body = self.stmts(&|p| p.is_thread_header() || matches!(p.peek(), Tok::Eof))?;
                threads.push(Thread { name, fixed, body });
            }
        } else {
            loop {
                let body = self.stmts(&|p| p.is_sym("|||") || matches!(p.peek(), Tok::Eof))?;
                threads.push(Thread {
                    name: format!("t{}", threads.len()),
                    fixed: false,
                    body,
                });
                if !self.eat_sym("|||") {
                    break;
                }
            }
        }
        if !matches!(self.peek(), Tok::Eof) {
            return self.err(format!("unexpected {}", describe(self.peek())));
        }
        Ok((threads, init))
    }

    fn is_thread_header(&self) -> bool {
        self.is_word("thread")
            && self.label_token(1).is_some()
            && (matches!(self.peek_at(2), Tok::Sym(":"))
                || (matches!(self.peek_at(2), Tok::Word(w) if w == "fixed")
                    && matches!(self.peek_at(3), Tok::Sym(":"))))
    }

    fn int_literal(&mut self) -> Result<i64, LangError> {
        let neg = self.eat_sym("-");
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(if neg { -i } else { i })
            }
            t => self.err(format!("expected integer, found {}", describe(&t))),
        }
    }

    fn stmts(&mut self, stop: &dyn Fn(&Parser) -> bool) -> Result<Vec<Node>, LangError> {
        let mut out = Vec::new();
        while !stop(self) {
            if self.eat_sym(";") {
                continue;
            }
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn block_body(&mut self) -> Result<Vec<Node>, LangError> {
        self.expect_sym("{")?;
        let body = self.stmts(&|p| p.is_sym("}") || matches!(p.peek(), Tok::Eof))?;
        self.expect_sym("}")?;
        Ok(body)
    }

    fn stmt(&mut self) -> Result<Node, LangError> {
        let label = match (self.label_token(0), self.peek_at(1)) {
            (Some(l), Tok::Sym(":")) => {
                self.bump();
                self.bump();
                Some(l)
            }
            _ => None,
        };
        let head = match self.peek().clone() {
            Tok::Word(w) => w,
            t => return self.err(format!("expected statement, found {}", describe(&t))),
        };
        let next = self.peek_at(1).clone();
        let label_or_empty = label.clone().unwrap_or_default();
        let simple = |kind| Ok(Node::Stmt(Stmt::new(label_or_empty.clone(), kind)));
        match (head.as_str(), &next) {
            ("atomic", Tok::Sym("{")) | ("group", Tok::Sym("{")) => {
                self.bump();
                let body = self.block_body()?;
                let block = Block { name: label, body };
                Ok(if head == "atomic" {
                    Node::Atomic(block)
                } else {
                    Node::Group(block)
                })
            }
            ("if", Tok::Sym("(")) => {
                self.bump();
                self.star_guard()?;
                let then_branch = self.block_body()?;
                let else_branch = if self.is_word("else") {
                    self.bump();
                    self.block_body()?
                } else {
                    Vec::new()
                };
                Ok(Node::If {
                    label: label_or_empty,
                    then_branch,
                    else_branch,
                })
            }
            ("while", Tok::Sym("(")) => {
                self.bump();
                self.star_guard()?;
                let body = self.block_body()?;
                Ok(Node::While {
                    label: label_or_empty,
                    body,
                })
            }
            ("assume" | "assert" | "await", Tok::Sym("(")) => {
                self.bump();
                self.expect_sym("(")?;
                let e = self.expr()?;
                self.expect_sym(")")?;
                self.eat_sym(";");
                simple(match head.as_str() {
                    "assume" => StmtKind::Assume(e),
                    "assert" => StmtKind::Assert(e),
                    _ => StmtKind::Await(e),
                })
            }
            ("wait" | "notify", Tok::Sym("(")) => {
                self.bump();
                self.expect_sym("(")?;
                let s = self.ident()?;
                self.expect_sym(")")?;
                self.eat_sym(";");
                simple(if head == "wait" {
                    StmtKind::Wait(s)
                } else {
                    StmtKind::Notify(s)
                })
            }
            ("skip", _) => {
                self.bump();
                self.eat_sym(";");
                simple(StmtKind::Skip)
            }
            (_, Tok::Sym(":=")) => {
                self.bump();
                self.bump();
                let value = self.expr()?;
                self.eat_sym(";");
                simple(StmtKind::Assign { var: head, value })
            }
            _ => self.err(format!("expected statement, found `{head}`")),
        }
    }

    fn star_guard(&mut self) -> Result<(), LangError> {
        self.expect_sym("(")?;
        self.expect_sym("*")?;
        self.expect_sym(")")
    }

    fn expr(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.cmp()?;
        while self.eat_sym("&&") {
            lhs = Expr::bin(BinOp::And, lhs, self.cmp()?);
        }
        Ok(lhs)
    }

    fn cmp(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.add()?;
        loop {
            let op = if self.eat_sym(">=") {
                BinOp::Ge
            } else if self.eat_sym("==") {
                BinOp::Eq
            } else {
                return Ok(lhs);
            };
            lhs = Expr::bin(op, lhs, self.add()?);
        }
    }

    fn add(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.mul()?;
        while self.eat_sym("+") {
            lhs = Expr::bin(BinOp::Add, lhs, self.mul()?);
        }
        Ok(lhs)
    }

    fn mul(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                BinOp::Mul
            } else if self.eat_sym("/") {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            lhs = Expr::bin(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, LangError> {
        if self.eat_sym("!") {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::Const(i))
            }
            Tok::Sym("-") => Ok(Expr::Const(self.int_literal()?)),
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Word(w) if w == "true" => {
                self.bump();
                Ok(Expr::Const(1))
            }
            Tok::Word(w) if w == "false" => {
                self.bump();
                Ok(Expr::Const(0))
            }
            Tok::Word(w) => {
                self.bump();
                Ok(Expr::Var(w))
            }
            t => self.err(format!("expected expression, found {}", describe(&t))),
        }
    }
}

/// Parse a CWhile program; unlabelled statements receive generated labels.
pub fn parse(src: &str) -> Result<Program, LangError> {
    let mut parser = Parser {
        toks: tokenize(src)?,
        pos: 0,
    };
    let (mut threads, init) = parser.program()?;

    let mut used = HashSet::new();
    for t in &threads {
        for n in &t.body {
            collect_labels(n, &mut used)?;
        }
    }
    for t in &mut threads {
        let prefix = t.name.clone();
        let mut counter = 0usize;
        for n in &mut t.body {
            fill_labels(n, &prefix, &mut counter, &mut used);
        }
    }

    let program = Program { threads, init };
    validate(&program)?;
    Ok(program)
}

fn claim(label: &str, used: &mut HashSet<String>) -> Result<(), LangError> {
    if !used.insert(label.to_string()) {
        return Err(LangError::DuplicateLabel(label.to_string()));
    }
    Ok(())
}

fn collect_labels(n: &Node, used: &mut HashSet<String>) -> Result<(), LangError> {
    match n {
        Node::Stmt(s) if !s.label.is_empty() => claim(&s.label, used)?,
        Node::Stmt(_) => {}
        Node::Atomic(b) | Node::Group(b) => {
            if let Some(name) = &b.name {
                claim(name, used)?;
            }
        }
        Node::If { label, .. } | Node::While { label, .. } if !label.is_empty() => {
            claim(label, used)?
        }
        _ => {}
    }
    for seq in n.children() {
        for c in seq {
            collect_labels(c, used)?;
        }
    }
    Ok(())
}

fn fresh(prefix: &str, counter: &mut usize, used: &mut HashSet<String>) -> String {
    loop {
        let l = format!("{prefix}.{counter}");
        *counter += 1;
        if used.insert(l.clone()) {
            return l;
        }
    }
}

fn fill_labels(n: &mut Node, prefix: &str, counter: &mut usize, used: &mut HashSet<String>) {
    match n {
        Node::Stmt(s) => {
            if s.label.is_empty() {
                s.label = fresh(prefix, counter, used);
            }
        }
        Node::Atomic(b) | Node::Group(b) => {
            // Statements inside a named container are numbered after it.
            if let Some(name) = b.name.clone() {
                let mut inner = 0usize;
                for c in &mut b.body {
                    fill_labels(c, &name, &mut inner, used);
                }
                return;
            }
        }
        Node::If { label, .. } | Node::While { label, .. } => {
            if label.is_empty() {
                *label = fresh(prefix, counter, used);
            }
        }
    }
    for seq in n.children_mut() {
        for c in seq {
            fill_labels(c, prefix, counter, used);
        }
    }
}

fn validate(p: &Program) -> Result<(), LangError> {
    if p.threads.is_empty() {
        return Err(LangError::Invalid("program has no threads".into()));
    }
    if p.initial_value(ERR_VAR) != 0 {
        return Err(LangError::Invalid("`err` must start at 0".into()));
    }
    for t in &p.threads {
        for s in t.leaves() {
            if s.writes().contains(ERR_VAR) {
                return Err(LangError::Invalid(format!(
                    "statement `{}` assigns the reserved variable `err`",
                    s.label
                )));
            }
        }
    }
    Ok(())
}
