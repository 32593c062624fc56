//! The iteration controller: sample seeds, pick an operator, evolve a
//! description, validate with regeneration, generate and validate a
//! solution, and append the surviving (or discarded) record back into the
//! same store so later iterations can seed on earlier survivors.

use super::{evolve, generate_solution, EvolutionOperator, PromptContext};
use crate::backend::{Backend, BudgetLedger, LedgerSnapshot};
use crate::corpus::{CorpusError, CorpusStore, Lineage, RecordStatus, SeedExample};
use crate::model::render_model;
use crate::report::{CheckMode, CheckReport, CheckStage};
use crate::validation::{
    validate_description_with_regeneration, validate_solution_with_regeneration, ValidationConfig,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub iterations: u64,
    /// Selection weights for the five operators, in
    /// [`EvolutionOperator::ALL`] order. Not all zero.
    pub operator_weights: [f64; 5],
    pub desc_retry_limit: u32,
    pub sol_retry_limit: u32,
    pub rng_seed: u64,
    pub workers: usize,
    /// Run the LLM-prompted description/constraint checkers in addition to
    /// the deterministic ones.
    pub llm_checkers: bool,
    pub validation: ValidationConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            iterations: 0,
            operator_weights: [1.0; 5],
            desc_retry_limit: 3,
            sol_retry_limit: 3,
            rng_seed: 0,
            workers: 1,
            llm_checkers: true,
            validation: ValidationConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("campaign config error: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorTally {
    pub attempted: u64,
    pub survived: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignReport {
    pub iterations: u64,
    pub survived: u64,
    pub discarded: u64,
    /// Iterations lost to backend faults (counted in `discarded` too).
    pub backend_errors: u64,
    pub per_operator: BTreeMap<String, OperatorTally>,
    pub ledger: LedgerSnapshot,
}

impl CampaignReport {
    pub fn discard_rate(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.discarded as f64 / self.iterations as f64
        }
    }
}

/// Weighted operator draw; exposed so selection statistics are testable.
pub fn pick_operator<R: Rng + ?Sized>(weights: &[f64; 5], rng: &mut R) -> EvolutionOperator {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0);
    let mut draw = rng.random_range(0.0..total);
    for (operator, &w) in EvolutionOperator::ALL.iter().zip(weights) {
        if draw < w {
            return *operator;
        }
        draw -= w;
    }
    // float edge: fall back to the last positively weighted operator
    *EvolutionOperator::ALL
        .iter()
        .zip(weights)
        .rev()
        .find(|(_, &w)| w > 0.0)
        .map(|(op, _)| op)
        .expect("weights not all zero")
}

/// Deterministic per-iteration RNG stream.
fn iteration_rng(seed: u64, iteration: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ iteration.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

struct IterationOutcome {
    operator: EvolutionOperator,
    survived: bool,
    backend_error: bool,
}

#[allow(clippy::too_many_arguments)]
fn append_discard(
    store: &Mutex<&mut CorpusStore>,
    id: &str,
    lineage: &Lineage,
    operator: EvolutionOperator,
    description: String,
    model: String,
    narrative: Option<String>,
    checks: Vec<CheckReport>,
    backend_error: bool,
) -> Result<IterationOutcome, CampaignError> {
    let record = SeedExample {
        id: id.to_string(),
        description,
        model,
        narrative,
        program_output: None,
        lineage: lineage.clone(),
        status: RecordStatus::Discarded,
        checks,
    };
    store.lock().unwrap().append(record)?;
    Ok(IterationOutcome {
        operator,
        survived: false,
        backend_error,
    })
}

fn run_iteration(
    iteration: u64,
    id_base: u64,
    store: &Mutex<&mut CorpusStore>,
    backend: &dyn Backend,
    cfg: &CampaignConfig,
    ledger: &BudgetLedger,
) -> Result<IterationOutcome, CampaignError> {
    let mut rng = iteration_rng(cfg.rng_seed, iteration);
    let operator = pick_operator(&cfg.operator_weights, &mut rng);

    let seeds: Vec<SeedExample> = {
        let store = store.lock().unwrap();
        if operator.arity() == 2 {
            let (a, b) = store.sample_pair(&mut rng)?;
            vec![a.clone(), b.clone()]
        } else {
            vec![store.sample_seed(&mut rng)?.clone()]
        }
    };
    let lineage = Lineage {
        parent_ids: seeds.iter().map(|s| s.id.clone()).collect(),
        operator: operator.name().to_string(),
        iteration,
    };
    let id = format!("gen-{:06}", id_base + iteration);

    let ctx = match PromptContext::new(operator, seeds.iter().collect()) {
        Ok(ctx) => ctx,
        Err(e) => return Err(CampaignError::Config(e.to_string())),
    };
    let candidate_description = match evolve(backend, &ctx, ledger) {
        Ok(text) => text,
        Err(e) => {
            let report = CheckReport::fail(
                CheckStage::Description,
                CheckMode::Llm,
                format!("backend error: {e}"),
            );
            return append_discard(
                store,
                &id,
                &lineage,
                operator,
                String::new(),
                String::new(),
                None,
                vec![report],
                true,
            );
        }
    };

    let desc = validate_description_with_regeneration(
        &candidate_description,
        backend,
        cfg.desc_retry_limit,
        ledger,
        cfg.llm_checkers,
    );
    if !desc.passed {
        return append_discard(
            store,
            &id,
            &lineage,
            operator,
            desc.description,
            String::new(),
            None,
            desc.reports,
            false,
        );
    }

    let solution_text = match generate_solution(backend, &desc.description, &seeds[0], operator, ledger)
    {
        Ok(text) => text,
        Err(e) => {
            let mut checks = desc.reports;
            checks.push(CheckReport::fail(
                CheckStage::Program,
                CheckMode::Llm,
                format!("backend error: {e}"),
            ));
            return append_discard(
                store,
                &id,
                &lineage,
                operator,
                desc.description,
                String::new(),
                None,
                checks,
                true,
            );
        }
    };

    let sol = validate_solution_with_regeneration(
        &desc.description,
        &solution_text,
        backend,
        cfg.sol_retry_limit,
        ledger,
        &cfg.validation,
        cfg.llm_checkers,
    );
    let mut checks = desc.reports;
    checks.extend(sol.reports);

    if let (true, Some(solution)) = (sol.passed, &sol.solution) {
        let record = SeedExample {
            id,
            description: desc.description,
            model: render_model(&solution.model),
            narrative: (!solution.narrative.trim().is_empty())
                .then(|| solution.narrative.clone()),
            program_output: sol.objective,
            lineage,
            status: RecordStatus::Active,
            checks,
        };
        store.lock().unwrap().append(record)?;
        Ok(IterationOutcome {
            operator,
            survived: true,
            backend_error: false,
        })
    } else {
        let narrative = (!sol.candidate.narrative.trim().is_empty())
            .then(|| sol.candidate.narrative.clone());
        append_discard(
            store,
            &id,
            &lineage,
            operator,
            desc.description,
            sol.candidate.model_source,
            narrative,
            checks,
            false,
        )
    }
}

/// Runs a full generation campaign. Iterations sample from the same store
/// they append to; only store IO failures abort. Single-worker runs are
/// deterministic under a fixed seed.
pub fn run_campaign(
    store: &mut CorpusStore,
    backend: &dyn Backend,
    cfg: &CampaignConfig,
) -> Result<CampaignReport, CampaignError> {
    if cfg.iterations == 0 {
        let mut per_operator = BTreeMap::new();
        for operator in EvolutionOperator::ALL {
            per_operator.insert(operator.name().to_string(), OperatorTally::default());
        }
        return Ok(CampaignReport {
            iterations: 0,
            survived: 0,
            discarded: 0,
            backend_errors: 0,
            per_operator,
            ledger: BudgetLedger::new().snapshot(),
        });
    }
    if !cfg.operator_weights.iter().any(|&w| w > 0.0) {
        return Err(CampaignError::Config(
            "operator weights must not all be zero".to_string(),
        ));
    }
    if cfg.operator_weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(CampaignError::Config(
            "operator weights must be finite and nonnegative".to_string(),
        ));
    }
    let combination_weight = cfg.operator_weights[4];
    let needed = if combination_weight > 0.0 { 2 } else { 1 };
    if store.active_count() < needed {
        return Err(CampaignError::Config(format!(
            "campaign needs at least {needed} active seed record(s), found {}",
            store.active_count()
        )));
    }

    let id_base = store
        .records()
        .filter(|r| r.id.starts_with("gen-"))
        .count() as u64;
    let ledger = BudgetLedger::new();
    let mut per_operator: BTreeMap<String, OperatorTally> = BTreeMap::new();
    for operator in EvolutionOperator::ALL {
        per_operator.insert(operator.name().to_string(), OperatorTally::default());
    }
    let mut survived = 0u64;
    let mut discarded = 0u64;
    let mut backend_errors = 0u64;

    let store_mutex = Mutex::new(store);
    let workers = cfg.workers.max(1);

    let outcomes: Vec<IterationOutcome> = if workers == 1 {
        let mut outcomes = Vec::with_capacity(cfg.iterations as usize);
        for iteration in 1..=cfg.iterations {
            outcomes.push(run_iteration(
                iteration,
                id_base,
                &store_mutex,
                backend,
                cfg,
                &ledger,
            )?);
        }
        outcomes
    } else {
        let counter = AtomicU64::new(1);
        let results: Mutex<Vec<Result<IterationOutcome, CampaignError>>> =
            Mutex::new(Vec::with_capacity(cfg.iterations as usize));
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let iteration = counter.fetch_add(1, Ordering::SeqCst);
                    if iteration > cfg.iterations {
                        break;
                    }
                    let outcome =
                        run_iteration(iteration, id_base, &store_mutex, backend, cfg, &ledger);
                    let abort = outcome.is_err();
                    results.lock().unwrap().push(outcome);
                    if abort {
                        break;
                    }
                });
            }
        });
        let mut collected = Vec::with_capacity(cfg.iterations as usize);
        for result in results.into_inner().unwrap() {
            collected.push(result?);
        }
        collected
    };

    for outcome in outcomes {
        let tally = per_operator
            .entry(outcome.operator.name().to_string())
            .or_default();
        tally.attempted += 1;
        if outcome.survived {
            tally.survived += 1;
            survived += 1;
        } else {
            discarded += 1;
        }
        if outcome.backend_error {
            backend_errors += 1;
        }
    }

    Ok(CampaignReport {
        iterations: cfg.iterations,
        survived,
        discarded,
        backend_errors,
        per_operator,
        ledger: ledger.snapshot(),
    })
}
