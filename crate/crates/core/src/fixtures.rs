//! The bundled example programs and their expected outcomes.

use crate::lang::{parse, LangError, Program};

pub struct Fixture {
    pub name: &'static str,
    pub source: &'static str,
    /// Expected outcomes in TOML, as read by the corpus runner.
    pub expect: &'static str,
}

macro_rules! fixture {
    ($name:literal) => {
        Fixture {
            name: $name,
            source: include_str!(concat!("../../../fixtures/", $name, ".cw")),
            expect: include_str!(concat!("../../../fixtures/", $name, ".expect.toml")),
        }
    };
}

pub const FIXTURES: &[Fixture] = &[
    fixture!("paper1"),
    fixture!("fig3a"),
    fixture!("fig3b"),
    fixture!("fig3c"),
    fixture!("fig4-left"),
    fixture!("fig4-center"),
    fixture!("fig4-right"),
    fixture!("iwl3945"),
    fixture!("ex1"),
    fixture!("ex2"),
    fixture!("ex3"),
    fixture!("ex4"),
    fixture!("ex5"),
    fixture!("ex-regr"),
];

impl Fixture {
    pub fn program(&self) -> Result<Program, LangError> {
        parse(self.source)
    }
}

pub fn fixture(name: &str) -> Option<&'static Fixture> {
    FIXTURES.iter().find(|f| f.name == name)
}
