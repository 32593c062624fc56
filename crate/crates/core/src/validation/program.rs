//! Program checking: execute the model (built-in solver or an external
//! command) and reconcile the outcome with any declared answer.

use super::Solution;
use crate::evaluation::{answers_equivalent, ComparatorConfig};
use crate::model::render_model;
use crate::report::{CheckMode, CheckReport, CheckStage};
use crate::solver::{solve, SolveStatus, SolverConfig};
use std::io::Write;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

/// How the program checker executes a model.
#[derive(Debug, Clone, Default)]
pub enum ProgramMode {
    /// Solve with the built-in solver.
    #[default]
    Builtin,
    /// Run `command... <model-file>`; the command must print
    /// `OBJECTIVE <number>` and exit 0 on success.
    Subprocess {
        command: Vec<String>,
        timeout: Duration,
    },
}

/// Default wall-clock budget for subprocess executions.
pub const DEFAULT_SUBPROCESS_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Default)]
pub struct ValidationConfig {
    pub solver: SolverConfig,
    pub comparator: ComparatorConfig,
    pub program: ProgramMode,
}

/// Outcome of the program stage: the report plus the solved objective when
/// execution succeeded.
#[derive(Debug, Clone)]
pub struct ProgramCheck {
    pub report: CheckReport,
    pub objective: Option<f64>,
}

fn reconcile_declared(
    solved: f64,
    declared: Option<f64>,
    comparator: &ComparatorConfig,
) -> Result<(), String> {
    match declared {
        Some(declared) if !answers_equivalent(declared, solved, comparator) => Err(format!(
            "answer mismatch: declared {declared}, solved {solved}"
        )),
        _ => Ok(()),
    }
}

/// Executes the model per the configured mode. Fails on non-optimal solver
/// statuses, subprocess faults (timeout, nonzero exit, missing objective
/// line), and declared-answer mismatches under the equivalence comparator.
pub fn check_program(solution: &Solution, cfg: &ValidationConfig) -> ProgramCheck {
    let stage = CheckStage::Program;
    match &cfg.program {
        ProgramMode::Builtin => {
            let result = solve(&solution.model, &cfg.solver);
            if result.status != SolveStatus::Optimal {
                return ProgramCheck {
                    report: CheckReport::fail(
                        stage,
                        CheckMode::Deterministic,
                        format!("solver status: {}", result.status),
                    ),
                    objective: None,
                };
            }
            let objective = result.objective.expect("optimal result has objective");
            match reconcile_declared(objective, solution.declared_answer, &cfg.comparator) {
                Ok(()) => ProgramCheck {
                    report: CheckReport::pass(stage, CheckMode::Deterministic),
                    objective: Some(objective),
                },
                Err(message) => ProgramCheck {
                    report: CheckReport::fail(stage, CheckMode::Deterministic, message),
                    objective: Some(objective),
                },
            }
        }
        ProgramMode::Subprocess { command, timeout } => {
            match run_subprocess(&solution.model, command, *timeout) {
                Ok(objective) => {
                    match reconcile_declared(objective, solution.declared_answer, &cfg.comparator)
                    {
                        Ok(()) => ProgramCheck {
                            report: CheckReport::pass(stage, CheckMode::Deterministic),
                            objective: Some(objective),
                        },
                        Err(message) => ProgramCheck {
                            report: CheckReport::fail(stage, CheckMode::Deterministic, message),
                            objective: Some(objective),
                        },
                    }
                }
                Err(message) => ProgramCheck {
                    report: CheckReport::fail(stage, CheckMode::Deterministic, message),
                    objective: None,
                },
            }
        }
    }
}

/// Writes the model to a temp file, runs `command... path`, enforces the
/// timeout, and parses the final `OBJECTIVE <number>` stdout line.
fn run_subprocess(
    model: &crate::model::OptModel,
    command: &[String],
    timeout: Duration,
) -> Result<f64, String> {
    let (program, args) = command
        .split_first()
        .ok_or_else(|| "subprocess mode configured with an empty command".to_string())?;

    let mut file = tempfile::Builder::new()
        .prefix("orforge-model-")
        .suffix(".optir")
        .tempfile()
        .map_err(|e| format!("cannot create temp model file: {e}"))?;
    file.write_all(render_model(model).as_bytes())
        .map_err(|e| format!("cannot write temp model file: {e}"))?;
    file.flush().ok();

    let mut child = Command::new(program)
        .args(args)
        .arg(file.path())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| format!("cannot spawn {program}: {e}"))?;

    let deadline = Instant::now() + timeout;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(format!("timeout after {:.1}s", timeout.as_secs_f64()));
                }
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(format!("wait failed: {e}")),
        }
    };

    let output = child
        .wait_with_output()
        .map_err(|e| format!("cannot collect output: {e}"))?;
    let stdout = String::from_utf8_lossy(&output.stdout);
    if !status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        let detail = if stdout.trim().is_empty() {
            stderr.trim().to_string()
        } else {
            stdout.trim().to_string()
        };
        return Err(format!(
            "nonzero exit {}: {detail}",
            status.code().map_or("signal".to_string(), |c| c.to_string())
        ));
    }

    let objective_line = stdout
        .lines()
        .rev()
        .find_map(|line| line.trim().strip_prefix("OBJECTIVE"))
        .ok_or_else(|| "no OBJECTIVE line in subprocess output".to_string())?;
    objective_line
        .trim()
        .parse::<f64>()
        .map_err(|_| format!("malformed OBJECTIVE line: {}", objective_line.trim()))
}
