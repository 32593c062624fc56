//! Synthesizes and validates operations-research training examples.
//!
//! The pipeline evolves seed problems through pluggable completion backends,
//! verifies every candidate with a stepwise validation state machine
//! (description, variables, constraints, program), and scores solutions with
//! a relative-error equivalence metric. A built-in desk-scale MILP solver
//! (simplex relaxation plus branch-and-bound) serves as the deterministic
//! execution oracle.
//!
//! Module map:
//! - [`model`]: the optimization-model IR, its `.optir` text grammar, and
//!   structural validation
//! - [`solver`]: exact LP/MILP solving and assignment evaluation
//! - [`corpus`]: the append-only JSON Lines dataset store
//! - [`backend`]: completion backends and budget accounting
//! - [`generation`]: evolution operators, prompts, and the campaign loop
//! - [`validation`]: the four checkers, big-M/K-way structural checks, and
//!   feedback-driven regeneration
//! - [`evaluation`]: answer equivalence and benchmark aggregation

pub mod backend;
pub mod corpus;
pub mod evaluation;
pub mod generation;
pub mod model;
pub mod report;
pub mod solver;
pub mod validation;

pub use report::{CheckMode, CheckReport, CheckStage, Verdict};
