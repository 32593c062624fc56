//! Check reports shared by the structural validator, the stepwise checkers,
//! and the corpus records they are stored on.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Which validation stage produced a report.
///
/// `Structure` covers model well-formedness (parse-level invariants); the
/// remaining stages are the pipeline checkers in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStage {
    Description,
    Structure,
    Variables,
    Constraints,
    Program,
}

impl fmt::Display for CheckStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CheckStage::Description => "description",
            CheckStage::Structure => "structure",
            CheckStage::Variables => "variables",
            CheckStage::Constraints => "constraints",
            CheckStage::Program => "program",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Whether a verdict came from a deterministic check or an LLM-prompted one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    Deterministic,
    Llm,
}

/// Outcome of one checker stage. A failing report carries error text suitable
/// for embedding in a regeneration prompt; a passing one has empty text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub stage: CheckStage,
    pub verdict: Verdict,
    pub error_text: String,
    pub mode: CheckMode,
}

impl CheckReport {
    pub fn pass(stage: CheckStage, mode: CheckMode) -> Self {
        CheckReport {
            stage,
            verdict: Verdict::Pass,
            error_text: String::new(),
            mode,
        }
    }

    pub fn fail(stage: CheckStage, mode: CheckMode, error_text: impl Into<String>) -> Self {
        CheckReport {
            stage,
            verdict: Verdict::Fail,
            error_text: error_text.into(),
            mode,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}
