//! Stepwise validation: description, variables, constraints, and program
//! checkers, with deterministic big-M/K-way structural checks, an optional
//! LLM-prompted mode, and feedback-driven regeneration.
//!
//! Stage ordering is strict: later checkers never run on candidates that
//! failed an earlier stage, and a deterministic failure always dominates an
//! LLM pass.

mod program;
mod requirements;

pub use program::{check_program, ProgramCheck, ProgramMode, ValidationConfig, DEFAULT_SUBPROCESS_TIMEOUT};
pub use requirements::{check_bigm_requirement, check_kway_requirement};

use crate::backend::{complete, Backend, BackendError, BudgetLedger, CompletionRequest, Phase};
use crate::model::{parse_model, validate_structure, OptModel, Requirement, VarKind};
use crate::report::{CheckMode, CheckReport, CheckStage, Verdict};

const DESCRIPTION_CHECKER_TEMPLATE: &str =
    include_str!("../../templates/checkers/description_checker.txt");
const CONSTRAINT_CHECKER_TEMPLATE: &str =
    include_str!("../../templates/checkers/constraint_checker.txt");
const DESCRIPTION_REGEN_TEMPLATE: &str =
    include_str!("../../templates/regeneration/description.txt");
const SOLUTION_REGEN_TEMPLATE: &str = include_str!("../../templates/regeneration/solution.txt");

/// Reply sentence that counts as a clean checker pass.
pub const NO_ERRORS_REPLY: &str = "There are no errors found";
/// Marker introducing checker-reported errors.
pub const ERROR_MARKER: &str = "ERROR:";

fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (slot, value) in slots {
        out = out.replace(&format!("{{{{{slot}}}}}"), value);
    }
    out
}

/// Parses an LLM checker reply. A reply passes iff its trimmed text begins
/// with the no-errors sentence; it fails with the text after the first
/// `ERROR:` marker when present, and with the raw reply otherwise.
pub fn parse_checker_reply(reply: &str) -> (Verdict, String) {
    let trimmed = reply.trim();
    if trimmed.starts_with(NO_ERRORS_REPLY) {
        return (Verdict::Pass, String::new());
    }
    if let Some(at) = trimmed.find(ERROR_MARKER) {
        let text = trimmed[at + ERROR_MARKER.len()..].trim();
        let text = if text.is_empty() { trimmed } else { text };
        return (Verdict::Fail, text.to_string());
    }
    (Verdict::Fail, trimmed.to_string())
}

fn report_from_reply(stage: CheckStage, reply: &str) -> CheckReport {
    match parse_checker_reply(reply) {
        (Verdict::Pass, _) => CheckReport::pass(stage, CheckMode::Llm),
        (Verdict::Fail, text) => CheckReport::fail(stage, CheckMode::Llm, text),
    }
}

/// Deterministic description completeness check: the description must be
/// non-empty and must carry at least one numeric parameter value.
pub fn check_description(description: &str) -> CheckReport {
    let stage = CheckStage::Description;
    if description.trim().is_empty() {
        return CheckReport::fail(stage, CheckMode::Deterministic, "empty problem description");
    }
    if !description.chars().any(|c| c.is_ascii_digit()) {
        return CheckReport::fail(
            stage,
            CheckMode::Deterministic,
            "no numerical parameter values found in the problem description",
        );
    }
    CheckReport::pass(stage, CheckMode::Deterministic)
}

/// Description check with the LLM checker layered on top of the
/// deterministic one. A deterministic failure short-circuits.
pub fn check_description_with_backend(
    description: &str,
    backend: &dyn Backend,
    ledger: &BudgetLedger,
) -> Result<CheckReport, BackendError> {
    let deterministic = check_description(description);
    if !deterministic.passed() {
        return Ok(deterministic);
    }
    let prompt = fill(DESCRIPTION_CHECKER_TEMPLATE, &[("problem", description)]);
    let reply = complete(
        backend,
        &CompletionRequest::new(prompt),
        ledger,
        Phase::Description,
    )?;
    Ok(report_from_reply(CheckStage::Description, &reply))
}

/// A parsed, structurally valid candidate solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub narrative: String,
    pub model: OptModel,
    pub declared_answer: Option<f64>,
}

/// Raw pieces extracted from a solution completion before parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSolution {
    pub narrative: String,
    pub model_source: String,
    pub declared_answer: Option<f64>,
}

/// Splits a solution completion into narrative, fenced model source, and an
/// optional `ANSWER:` declaration. Without a fence the whole text is treated
/// as model source.
pub fn parse_solution_text(text: &str) -> CandidateSolution {
    let mut narrative = String::new();
    let mut model_source = String::new();
    let mut declared_answer = None;
    let mut in_fence = false;
    let mut saw_fence = false;

    for line in text.lines() {
        let trimmed = line.trim();
        if !in_fence && (trimmed == "```optir" || trimmed.starts_with("```optir")) {
            in_fence = true;
            saw_fence = true;
            continue;
        }
        if in_fence && trimmed == "```" {
            in_fence = false;
            continue;
        }
        if in_fence {
            model_source.push_str(line);
            model_source.push('\n');
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("ANSWER:") {
            if let Ok(value) = rest.trim().parse::<f64>() {
                declared_answer = Some(value);
                continue;
            }
        }
        if !saw_fence || !trimmed.is_empty() {
            narrative.push_str(line);
            narrative.push('\n');
        }
    }

    if !saw_fence {
        CandidateSolution {
            narrative: String::new(),
            model_source: narrative,
            declared_answer,
        }
    } else {
        CandidateSolution {
            narrative: narrative.trim().to_string(),
            model_source,
            declared_answer,
        }
    }
}

/// Variable-definition checker: every declared variable must be used by at
/// least one constraint or objective, and requirement references must have
/// the right kind.
pub fn check_variables(solution: &Solution) -> CheckReport {
    let stage = CheckStage::Variables;
    let model = &solution.model;
    let mut errors = Vec::new();

    for v in &model.variables {
        let used_in_constraints = model
            .constraints
            .iter()
            .any(|c| c.expr.coeff(&v.name) != 0.0);
        let used_in_objectives = model
            .objectives
            .iter()
            .any(|o| o.expr.coeff(&v.name) != 0.0);
        if !used_in_constraints && !used_in_objectives {
            errors.push(format!("unused variable {}", v.name));
        }
    }

    for req in &model.requirements {
        if let Requirement::KWay { selectors, .. } = req {
            for s in selectors {
                match model.variable(s) {
                    Some(decl) if decl.kind != VarKind::Binary => {
                        errors.push(format!(
                            "kway selector {s} must be binary, found {}",
                            decl.kind
                        ));
                    }
                    None => errors.push(format!("kway selector {s} is not declared")),
                    _ => {}
                }
            }
        }
    }

    if errors.is_empty() {
        CheckReport::pass(stage, CheckMode::Deterministic)
    } else {
        CheckReport::fail(stage, CheckMode::Deterministic, errors.join("; "))
    }
}

/// Deterministic constraint checking: every requirement annotation is
/// verified structurally; failures aggregate.
pub fn check_constraints(solution: &Solution) -> CheckReport {
    let stage = CheckStage::Constraints;
    let model = &solution.model;
    let mut errors = Vec::new();
    for req in &model.requirements {
        let report = match req {
            Requirement::AbsGe { xi, xj, threshold } => {
                check_bigm_requirement(model, xi, xj, *threshold)
            }
            Requirement::KWay {
                k,
                selectors,
                linked,
            } => check_kway_requirement(model, *k, selectors, linked),
        };
        if !report.passed() {
            errors.push(report.error_text);
        }
    }
    if errors.is_empty() {
        CheckReport::pass(stage, CheckMode::Deterministic)
    } else {
        CheckReport::fail(stage, CheckMode::Deterministic, errors.join("; "))
    }
}

/// Constraint checking with the LLM checker prompt layered on. The
/// deterministic verdict dominates: an LLM pass never overrides a
/// deterministic failure.
pub fn check_constraints_with_backend(
    solution: &Solution,
    problem: &str,
    backend: &dyn Backend,
    ledger: &BudgetLedger,
) -> Result<CheckReport, BackendError> {
    let deterministic = check_constraints(solution);
    if !deterministic.passed() {
        return Ok(deterministic);
    }
    let model_source = crate::model::render_model(&solution.model);
    let prompt = fill(
        CONSTRAINT_CHECKER_TEMPLATE,
        &[
            ("problem", problem),
            ("narrative", solution.narrative.as_str()),
            ("model", model_source.as_str()),
        ],
    );
    let reply = complete(
        backend,
        &CompletionRequest::new(prompt),
        ledger,
        Phase::Solution,
    )?;
    Ok(report_from_reply(CheckStage::Constraints, &reply))
}

/// Builds the problem-regeneration prompt, embedding the checker error
/// verbatim.
pub fn build_description_regen_prompt(problem: &str, error: &str) -> String {
    fill(
        DESCRIPTION_REGEN_TEMPLATE,
        &[("problem", problem), ("error", error)],
    )
}

/// Builds the solution-regeneration prompt, embedding the failing solution
/// and the checker error verbatim.
pub fn build_solution_regen_prompt(problem: &str, solution_text: &str, error: &str) -> String {
    fill(
        SOLUTION_REGEN_TEMPLATE,
        &[
            ("problem", problem),
            ("solution", solution_text),
            ("error", error),
        ],
    )
}

/// Optional LLM checking context: the backend plus the ledger it bills to.
#[derive(Clone, Copy)]
pub struct LlmChecks<'a> {
    pub backend: &'a dyn Backend,
    pub ledger: &'a BudgetLedger,
}

/// Outcome of running the full solution stage sequence once.
#[derive(Debug)]
pub struct StageOutcome {
    pub reports: Vec<CheckReport>,
    pub solution: Option<Solution>,
    pub objective: Option<f64>,
}

impl StageOutcome {
    pub fn passed(&self) -> bool {
        !self.reports.is_empty() && self.reports.iter().all(CheckReport::passed)
    }
}

/// Runs structure -> variables -> constraints -> program on one candidate,
/// stopping at the first failing stage.
pub fn run_solution_stages(
    candidate: &CandidateSolution,
    problem: &str,
    cfg: &ValidationConfig,
    llm: Option<LlmChecks<'_>>,
) -> StageOutcome {
    let mut reports = Vec::new();

    let model = match parse_model(&candidate.model_source) {
        Ok(model) => {
            let structure = validate_structure(&model);
            let ok = structure.passed();
            reports.push(structure);
            if !ok {
                return StageOutcome {
                    reports,
                    solution: None,
                    objective: None,
                };
            }
            model
        }
        Err(e) => {
            reports.push(CheckReport::fail(
                CheckStage::Structure,
                CheckMode::Deterministic,
                e.to_string(),
            ));
            return StageOutcome {
                reports,
                solution: None,
                objective: None,
            };
        }
    };

    let solution = Solution {
        narrative: candidate.narrative.clone(),
        model,
        declared_answer: candidate.declared_answer,
    };

    let variables = check_variables(&solution);
    let ok = variables.passed();
    reports.push(variables);
    if !ok {
        return StageOutcome {
            reports,
            solution: Some(solution),
            objective: None,
        };
    }

    let constraints = match llm {
        Some(ctx) => check_constraints_with_backend(&solution, problem, ctx.backend, ctx.ledger)
            .unwrap_or_else(|e| {
                CheckReport::fail(
                    CheckStage::Constraints,
                    CheckMode::Llm,
                    format!("backend error: {e}"),
                )
            }),
        None => check_constraints(&solution),
    };
    let ok = constraints.passed();
    reports.push(constraints);
    if !ok {
        return StageOutcome {
            reports,
            solution: Some(solution),
            objective: None,
        };
    }

    let program = check_program(&solution, cfg);
    reports.push(program.report);
    StageOutcome {
        reports,
        solution: Some(solution),
        objective: program.objective,
    }
}

/// Result of a regeneration loop.
#[derive(Debug)]
pub struct DescriptionValidation {
    pub passed: bool,
    pub attempts: u32,
    pub reports: Vec<CheckReport>,
    /// The accepted description on pass, the last candidate on discard.
    pub description: String,
}

/// Validates a description, regenerating on failure (error text embedded in
/// the prompt verbatim) up to `limit` times. Backend errors consume an
/// attempt. Attempts never exceed `limit + 1`.
pub fn validate_description_with_regeneration(
    initial: &str,
    backend: &dyn Backend,
    limit: u32,
    ledger: &BudgetLedger,
    llm_checks: bool,
) -> DescriptionValidation {
    let mut candidate = initial.to_string();
    let mut reports = Vec::new();
    let mut attempts = 1u32;

    let check = |text: &str, reports: &mut Vec<CheckReport>| -> CheckReport {
        let report = if llm_checks {
            check_description_with_backend(text, backend, ledger).unwrap_or_else(|e| {
                CheckReport::fail(
                    CheckStage::Description,
                    CheckMode::Llm,
                    format!("backend error: {e}"),
                )
            })
        } else {
            check_description(text)
        };
        reports.push(report.clone());
        report
    };

    let mut last = check(&candidate, &mut reports);
    while !last.passed() && attempts <= limit {
        let prompt = build_description_regen_prompt(&candidate, &last.error_text);
        match complete(
            backend,
            &CompletionRequest::new(prompt),
            ledger,
            Phase::Description,
        ) {
            Ok(regenerated) => {
                candidate = regenerated;
                attempts += 1;
                last = check(&candidate, &mut reports);
            }
            Err(e) => {
                attempts += 1;
                let report = CheckReport::fail(
                    CheckStage::Description,
                    CheckMode::Llm,
                    format!("backend error: {e}"),
                );
                reports.push(report.clone());
                last = report;
            }
        }
    }

    DescriptionValidation {
        passed: last.passed(),
        attempts,
        reports,
        description: candidate,
    }
}

#[derive(Debug)]
pub struct SolutionValidation {
    pub passed: bool,
    pub attempts: u32,
    pub reports: Vec<CheckReport>,
    /// Raw pieces of the final candidate (model source survives even when
    /// unparseable, for discard records).
    pub candidate: CandidateSolution,
    pub solution: Option<Solution>,
    pub objective: Option<f64>,
}

/// Validates a solution completion through the full stage sequence,
/// regenerating on failure up to `limit` times.
pub fn validate_solution_with_regeneration(
    problem: &str,
    initial_text: &str,
    backend: &dyn Backend,
    limit: u32,
    ledger: &BudgetLedger,
    cfg: &ValidationConfig,
    llm_checks: bool,
) -> SolutionValidation {
    let mut text = initial_text.to_string();
    let mut candidate = parse_solution_text(&text);
    let mut reports = Vec::new();
    let mut attempts = 1u32;
    let llm_ctx = llm_checks.then_some(LlmChecks { backend, ledger });

    let mut outcome = run_solution_stages(&candidate, problem, cfg, llm_ctx);
    reports.append(&mut outcome.reports);

    while !reports_tail_passed(&reports) && attempts <= limit {
        let error_text = reports
            .iter()
            .rev()
            .find(|r| !r.passed())
            .map(|r| r.error_text.clone())
            .unwrap_or_default();
        let prompt = build_solution_regen_prompt(problem, &text, &error_text);
        match complete(
            backend,
            &CompletionRequest::new(prompt),
            ledger,
            Phase::Solution,
        ) {
            Ok(regenerated) => {
                text = regenerated;
                candidate = parse_solution_text(&text);
                attempts += 1;
                outcome = run_solution_stages(&candidate, problem, cfg, llm_ctx);
                reports.append(&mut outcome.reports);
            }
            Err(e) => {
                attempts += 1;
                reports.push(CheckReport::fail(
                    CheckStage::Program,
                    CheckMode::Llm,
                    format!("backend error: {e}"),
                ));
            }
        }
    }

    SolutionValidation {
        passed: reports_tail_passed(&reports),
        attempts,
        reports,
        candidate,
        solution: outcome.solution,
        objective: outcome.objective,
    }
}

/// True when the most recent stage run ended in a program-stage pass.
fn reports_tail_passed(reports: &[CheckReport]) -> bool {
    matches!(
        reports.last(),
        Some(r) if r.stage == CheckStage::Program && r.passed()
    )
}
