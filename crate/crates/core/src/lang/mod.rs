//! The CWhile language: syntax tree, parser, printer, program index and
//! program transformations.

pub mod ast;
pub mod equiv;
pub mod index;
pub mod parse;
pub mod print;
pub mod semantics;
pub mod transform;

pub use ast::{BinOp, Block, Expr, Location, Node, Program, Stmt, StmtKind, Thread, ERR_VAR};
pub use equiv::sequentially_equivalent;
pub use index::{BasicBlock, ProgramIndex};
pub use parse::parse;
pub use print::print_program;
pub use transform::{apply_transformation, Transformation};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LangError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("invalid program: {0}")]
    Invalid(String),
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("illegal transformation {transformation}: {reason}")]
    IllegalTransformation {
        transformation: String,
        reason: String,
    },
}

/// Basic blocks of `p`, ordered by thread and position.
pub fn basic_blocks(p: &Program) -> Vec<BasicBlock> {
    ProgramIndex::new(p).blocks
}
