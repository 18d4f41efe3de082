//! Regression-free repair of concurrency bugs in CWhile programs.
//!
//! The pipeline: [`lang`] parses and transforms programs, [`explore`]
//! enumerates interleavings, [`graph`] analyses single traces, [`learn`]
//! derives constraints from good traces, [`fix`] eliminates bad traces and
//! [`engine`] ties them together in the repair loop.

pub mod constraint;
pub mod engine;
pub mod explore;
pub mod fix;
pub mod fixtures;
pub mod graph;
pub mod lang;
pub mod learn;
