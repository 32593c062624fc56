//! The five evolution operators as prompt builders, the solution generator,
//! and the campaign controller that drives full generation runs.

mod campaign;

pub use campaign::{run_campaign, CampaignConfig, CampaignError, CampaignReport, OperatorTally};

use crate::backend::{complete, Backend, BackendError, BudgetLedger, CompletionRequest, Phase};
use crate::corpus::SeedExample;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::OnceLock;
use thiserror::Error;

/// Application domains offered to the domain-transformation operator.
pub const REFERENCE_DOMAINS: [&str; 16] = [
    "Education",
    "Manufacturing",
    "Logistics",
    "Retail",
    "Agriculture",
    "IT Services",
    "Healthcare",
    "Event Planning",
    "Construction",
    "Entertainment",
    "Research and Development",
    "Hospitality",
    "Defense",
    "Energy Sector",
    "Transportation",
    "Telecommunications",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionOperator {
    ConstraintModification,
    ObjectiveAlteration,
    ParameterAdjustment,
    DomainTransformation,
    Combination,
}

impl EvolutionOperator {
    pub const ALL: [EvolutionOperator; 5] = [
        EvolutionOperator::ConstraintModification,
        EvolutionOperator::ObjectiveAlteration,
        EvolutionOperator::ParameterAdjustment,
        EvolutionOperator::DomainTransformation,
        EvolutionOperator::Combination,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EvolutionOperator::ConstraintModification => "constraint_modification",
            EvolutionOperator::ObjectiveAlteration => "objective_alteration",
            EvolutionOperator::ParameterAdjustment => "parameter_adjustment",
            EvolutionOperator::DomainTransformation => "domain_transformation",
            EvolutionOperator::Combination => "combination",
        }
    }

    /// How many seed problems the operator consumes.
    pub fn arity(self) -> usize {
        match self {
            EvolutionOperator::Combination => 2,
            _ => 1,
        }
    }

    fn template(self) -> &'static str {
        match self {
            EvolutionOperator::ConstraintModification => {
                include_str!("../../templates/evolution/constraint_modification.txt")
            }
            EvolutionOperator::ObjectiveAlteration => {
                include_str!("../../templates/evolution/objective_alteration.txt")
            }
            EvolutionOperator::ParameterAdjustment => {
                include_str!("../../templates/evolution/parameter_adjustment.txt")
            }
            EvolutionOperator::DomainTransformation => {
                include_str!("../../templates/evolution/domain_transformation.txt")
            }
            EvolutionOperator::Combination => {
                include_str!("../../templates/evolution/combination.txt")
            }
        }
    }
}

impl std::fmt::Display for EvolutionOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("no shot fixtures for operator {0}")]
    MissingShotFixture(EvolutionOperator),
    #[error("operator {operator} takes {expected} seed(s), got {got}")]
    WrongArity {
        operator: EvolutionOperator,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

fn shot_fixtures() -> &'static HashMap<String, Vec<String>> {
    static SHOTS: OnceLock<HashMap<String, Vec<String>>> = OnceLock::new();
    SHOTS.get_or_init(|| {
        serde_json::from_str(include_str!("../../templates/shots.json"))
            .expect("bundled shot fixtures parse")
    })
}

/// The two curated shot examples for an operator.
pub fn shots_for(operator: EvolutionOperator) -> Result<[&'static str; 2], GenError> {
    let all = shot_fixtures();
    let entries = all
        .get(operator.name())
        .ok_or(GenError::MissingShotFixture(operator))?;
    if entries.len() < 2 {
        return Err(GenError::MissingShotFixture(operator));
    }
    Ok([entries[0].as_str(), entries[1].as_str()])
}

fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (slot, value) in slots {
        out = out.replace(&format!("{{{{{slot}}}}}"), value);
    }
    out
}

/// Everything needed to build one evolution prompt: the operator, its
/// seed problem(s), and the two shot examples.
#[derive(Debug, Clone)]
pub struct PromptContext<'a> {
    pub operator: EvolutionOperator,
    pub seeds: Vec<&'a SeedExample>,
    pub shots: [&'a str; 2],
}

impl<'a> PromptContext<'a> {
    /// Builds a context with the bundled shot fixtures, checking seed arity.
    pub fn new(
        operator: EvolutionOperator,
        seeds: Vec<&'a SeedExample>,
    ) -> Result<Self, GenError> {
        if seeds.len() != operator.arity() {
            return Err(GenError::WrongArity {
                operator,
                expected: operator.arity(),
                got: seeds.len(),
            });
        }
        Ok(PromptContext {
            operator,
            seeds,
            shots: shots_for(operator)?,
        })
    }
}

/// Instantiates the operator's template with the seed description(s) and
/// the two shots.
pub fn build_evolution_prompt(ctx: &PromptContext<'_>) -> Result<String, GenError> {
    if ctx.seeds.len() != ctx.operator.arity() {
        return Err(GenError::WrongArity {
            operator: ctx.operator,
            expected: ctx.operator.arity(),
            got: ctx.seeds.len(),
        });
    }
    let template = ctx.operator.template();
    let prompt = match ctx.operator {
        EvolutionOperator::Combination => fill(
            template,
            &[
                ("shot_1", ctx.shots[0]),
                ("shot_2", ctx.shots[1]),
                ("problem_1", &ctx.seeds[0].description),
                ("problem_2", &ctx.seeds[1].description),
            ],
        ),
        _ => fill(
            template,
            &[
                ("shot_1", ctx.shots[0]),
                ("shot_2", ctx.shots[1]),
                ("seed_description", &ctx.seeds[0].description),
            ],
        ),
    };
    Ok(prompt)
}

/// Runs one evolution step: returns the backend completion verbatim as the
/// candidate description. Recorded under the description phase.
pub fn evolve(
    backend: &dyn Backend,
    ctx: &PromptContext<'_>,
    ledger: &BudgetLedger,
) -> Result<String, GenError> {
    let prompt = build_evolution_prompt(ctx)?;
    Ok(complete(
        backend,
        &CompletionRequest::new(prompt),
        ledger,
        Phase::Description,
    )?)
}

/// Builds the solution-generation prompt: embeds the new problem, the seed
/// description and model verbatim, the operator name, and the
/// format-consistency instruction.
pub fn build_solution_prompt(
    problem: &str,
    seed: &SeedExample,
    operator: EvolutionOperator,
) -> String {
    let mut seed_model = String::new();
    if let Some(narrative) = &seed.narrative {
        seed_model.push_str(narrative);
        if !narrative.ends_with('\n') {
            seed_model.push('\n');
        }
    }
    seed_model.push_str(&seed.model);
    fill(
        include_str!("../../templates/solution_generation.txt"),
        &[
            ("problem", problem),
            ("seed_description", &seed.description),
            ("seed_model", &seed_model),
            ("operator", operator.name()),
        ],
    )
}

/// Asks the backend for a candidate solution, returned verbatim. Recorded
/// under the solution phase.
pub fn generate_solution(
    backend: &dyn Backend,
    problem: &str,
    seed: &SeedExample,
    operator: EvolutionOperator,
    ledger: &BudgetLedger,
) -> Result<String, GenError> {
    let prompt = build_solution_prompt(problem, seed, operator);
    Ok(complete(
        backend,
        &CompletionRequest::new(prompt),
        ledger,
        Phase::Solution,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{FixtureEntry, ScriptedBackend};
    use crate::corpus::{Lineage, RecordStatus};

    fn seed(id: &str, description: &str) -> SeedExample {
        SeedExample {
            id: id.to_string(),
            description: description.to_string(),
            model: "var x integer\nmin x\nst c: x >= 2\n".to_string(),
            narrative: Some("Minimize x with x at least 2.".to_string()),
            program_output: Some(2.0),
            lineage: Lineage::seed(),
            status: RecordStatus::Active,
            checks: vec![],
        }
    }

    #[test]
    fn constraint_prompt_contains_complexity_limit() {
        let s = seed("a", "A mill blends 2 ores under a 50 ton cap.");
        let ctx = PromptContext::new(EvolutionOperator::ConstraintModification, vec![&s]).unwrap();
        let prompt = build_evolution_prompt(&ctx).unwrap();
        assert!(prompt.contains("limited to a maximum of one"));
        assert!(prompt.contains("A mill blends 2 ores"));
    }

    #[test]
    fn parameter_prompt_limits_new_entities() {
        let s = seed("a", "A depot routes 12 vans.");
        let ctx = PromptContext::new(EvolutionOperator::ParameterAdjustment, vec![&s]).unwrap();
        let prompt = build_evolution_prompt(&ctx).unwrap();
        assert!(prompt.contains("at most one new entity"));
    }

    #[test]
    fn objective_prompt_forbids_coefficient_only_changes() {
        let s = seed("a", "A shop prices 3 items.");
        let ctx = PromptContext::new(EvolutionOperator::ObjectiveAlteration, vec![&s]).unwrap();
        let prompt = build_evolution_prompt(&ctx).unwrap();
        assert!(prompt.contains("not merely changes to coefficients"));
    }

    #[test]
    fn combination_prompt_requires_similar_length() {
        let a = seed("a", "First problem with 5 machines.");
        let b = seed("b", "Second problem with 7 trucks.");
        let ctx = PromptContext::new(EvolutionOperator::Combination, vec![&a, &b]).unwrap();
        let prompt = build_evolution_prompt(&ctx).unwrap();
        assert!(prompt.contains("similar in length to one"));
        assert!(prompt.contains("First problem with 5 machines."));
        assert!(prompt.contains("Second problem with 7 trucks."));
    }

    #[test]
    fn combination_with_one_seed_is_an_arity_error() {
        let a = seed("a", "Only problem.");
        let err = PromptContext::new(EvolutionOperator::Combination, vec![&a]).unwrap_err();
        assert!(matches!(err, GenError::WrongArity { got: 1, .. }));
    }

    #[test]
    fn domain_prompt_lists_all_reference_domains() {
        let s = seed("a", "A factory with 9 lines.");
        let ctx = PromptContext::new(EvolutionOperator::DomainTransformation, vec![&s]).unwrap();
        let prompt = build_evolution_prompt(&ctx).unwrap();
        for domain in REFERENCE_DOMAINS {
            assert!(prompt.contains(domain), "missing domain {domain}");
        }
    }

    #[test]
    fn every_operator_has_two_shots() {
        for op in EvolutionOperator::ALL {
            let shots = shots_for(op).unwrap();
            assert!(!shots[0].is_empty() && !shots[1].is_empty());
        }
    }

    #[test]
    fn evolve_returns_completion_verbatim_and_books_description_phase() {
        let s = seed("a", "A plant with 4 boilers.");
        let ctx = PromptContext::new(EvolutionOperator::ConstraintModification, vec![&s]).unwrap();
        let backend =
            ScriptedBackend::from_entries([FixtureEntry::response("  evolved text 42 \n")]);
        let ledger = BudgetLedger::new();
        let out = evolve(&backend, &ctx, &ledger).unwrap();
        assert_eq!(out, "  evolved text 42 \n");
        assert_eq!(ledger.phase_queries(Phase::Description), 1);
        assert_eq!(ledger.phase_queries(Phase::Solution), 0);
    }

    #[test]
    fn solution_prompt_embeds_seed_model_and_consistency_clause() {
        let s = seed("a", "A plant with 4 boilers.");
        let prompt =
            build_solution_prompt("New problem 7", &s, EvolutionOperator::ParameterAdjustment);
        assert!(prompt.contains("var x integer\nmin x\nst c: x >= 2\n"));
        assert!(prompt.contains("as consistent as possible"));
        assert!(prompt.contains("parameter_adjustment"));
        assert!(prompt.contains("New problem 7"));
    }

    #[test]
    fn generate_solution_returns_fixture_verbatim() {
        let s = seed("a", "A plant with 4 boilers.");
        let backend = ScriptedBackend::from_entries([FixtureEntry::response("the solution")]);
        let ledger = BudgetLedger::new();
        let out = generate_solution(
            &backend,
            "New problem",
            &s,
            EvolutionOperator::DomainTransformation,
            &ledger,
        )
        .unwrap();
        assert_eq!(out, "the solution");
        assert_eq!(ledger.phase_queries(Phase::Solution), 1);
    }
}
