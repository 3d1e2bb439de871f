//! Loop invariant inference from execution traces.
//!
//! A program is parsed, executed on sampled initial states, and the recorded
//! loop-head states are used to train continuous relaxations of candidate
//! formula templates. Trained parameters are turned back into exact rational
//! formulas and checked with an external SMT solver.

#![allow(clippy::needless_range_loop, clippy::should_implement_trait, clippy::neg_cmp_op_on_partial_ord)]

pub mod ast;
pub mod checker;
pub mod cli;
pub mod clogic;
pub mod frontend;
pub mod linalg;
pub mod templates;
pub mod tracer;
pub mod trainer;
