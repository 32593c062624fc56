//! Command-line entry point binding the pipeline together: generation
//! campaigns, validation, benchmark evaluation, corpus statistics, training
//! export, and model solving.
//!
//! Exit codes: 0 success, 2 configuration/usage error, 3 unreadable input,
//! 4 solve finished without an optimum (infeasible/unbounded/node limit).

use clap::{Args, Parser, Subcommand};
use orforge::backend::BackendConfig;
use orforge::corpus::CorpusStore;
use orforge::evaluation::{
    aggregate, display_percent, evaluate_dataset, load_benchmark, load_submissions,
    ComparatorConfig,
};
use orforge::generation::{run_campaign, CampaignConfig, CampaignError};
use orforge::model::parse_model;
use orforge::solver::{solve, SolveStatus, SolverConfig};
use orforge::validation::{
    parse_solution_text, run_solution_stages, ProgramMode, ValidationConfig,
    DEFAULT_SUBPROCESS_TIMEOUT,
};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

const EXIT_OK: u8 = 0;
const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_NOT_OPTIMAL: u8 = 4;

#[derive(Parser)]
#[command(name = "orforge", version, about = "Synthesize, validate, and score optimization training data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a generation campaign against a completion backend
    Generate(GenerateArgs),
    /// Re-run the deterministic checkers on a model file or corpus
    Validate(ValidateArgs),
    /// Score submissions against a benchmark and print micro/macro averages
    Evaluate(EvaluateArgs),
    /// Print corpus statistics (never contacts a backend)
    Stats(StatsArgs),
    /// Export active records as instruction-tuning data
    Export(ExportArgs),
    /// Solve a model file and print `OBJECTIVE <number>`
    Solve(SolveArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Seed corpus (JSON Lines)
    #[arg(long)]
    seeds: PathBuf,
    /// Output corpus path (created; pass the seeds path to append in place)
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    iterations: u64,
    /// Backend config file (`key = value`: kind, fixtures, endpoint, model,
    /// credential_env, retries)
    #[arg(long)]
    backend: PathBuf,
    /// Five comma-separated operator weights (constraint modification,
    /// objective alteration, parameter adjustment, domain transformation,
    /// combination)
    #[arg(long)]
    weights: Option<String>,
    #[arg(long, default_value_t = 3)]
    desc_retries: u32,
    #[arg(long, default_value_t = 3)]
    sol_retries: u32,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Skip the LLM-prompted checkers (deterministic checks always run)
    #[arg(long)]
    no_llm_checkers: bool,
    /// Where to write the JSON campaign report (default: <out>.report.json)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Single model file to check
    #[arg(long, conflicts_with = "corpus")]
    model: Option<PathBuf>,
    /// Corpus whose active records are checked
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Check programs through an external command instead of the built-in
    /// solver; the model path is appended as the last argument
    #[arg(long, num_args = 1..)]
    subprocess: Option<Vec<String>>,
    /// Subprocess timeout in seconds
    #[arg(long, default_value_t = DEFAULT_SUBPROCESS_TIMEOUT.as_secs())]
    timeout: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Benchmark instances (JSON Lines: id, dataset, description,
    /// ground_truth)
    #[arg(long)]
    bench: PathBuf,
    /// Submissions (JSON Lines: id plus model source or declared answer)
    #[arg(long)]
    solutions: PathBuf,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Also write the aggregate report as JSON
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Model file
    #[arg(long, conflicts_with = "positional")]
    model: Option<PathBuf>,
    /// Model file as a bare argument (the subprocess-mode calling
    /// convention appends the path after the command)
    #[arg(value_name = "MODEL")]
    positional: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Validate(args) => validate(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Stats(args) => stats(args),
        Command::Export(args) => export(args),
        Command::Solve(args) => solve_file(args),
    };
    ExitCode::from(code)
}

fn fail(code: u8, message: impl std::fmt::Display) -> u8 {
    eprintln!("error: {message}");
    code
}

fn parse_weights(raw: &str) -> Result<[f64; 5], String> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 5 {
        return Err(format!(
            "--weights needs 5 comma-separated values, got {}",
            parts.len()
        ));
    }
    let mut weights = [0.0; 5];
    for (slot, part) in weights.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("bad weight `{part}`"))?;
        if *slot < 0.0 || !slot.is_finite() {
            return Err(format!("weight `{part}` must be finite and nonnegative"));
        }
    }
    Ok(weights)
}

fn generate(args: GenerateArgs) -> u8 {
    let backend_cfg = match BackendConfig::from_file(&args.backend) {
        Ok(cfg) => cfg,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let backend = match backend_cfg.build() {
        Ok(b) => b,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let weights = match args.weights.as_deref().map(parse_weights).transpose() {
        Ok(w) => w.unwrap_or([1.0; 5]),
        Err(e) => return fail(EXIT_CONFIG, e),
    };

    let seeds = match CorpusStore::load(&args.seeds) {
        Ok(store) => store,
        Err(e) => return fail(EXIT_INPUT, format!("cannot load seeds: {e}")),
    };
    if seeds.active_count() == 0 {
        return fail(EXIT_INPUT, "seed corpus has no active records");
    }

    let in_place = same_file(&args.seeds, &args.out);
    let mut store = if in_place {
        seeds
    } else {
        if args.out.exists()
            && std::fs::metadata(&args.out).map(|m| m.len() > 0).unwrap_or(false)
        {
            return fail(
                EXIT_CONFIG,
                format!("output corpus {} already exists", args.out.display()),
            );
        }
        let mut out = CorpusStore::create(&args.out);
        for record in seeds.records() {
            if let Err(e) = out.append(record.clone()) {
                return fail(EXIT_INPUT, format!("cannot copy seed records: {e}"));
            }
        }
        out
    };

    let cfg = CampaignConfig {
        iterations: args.iterations,
        operator_weights: weights,
        desc_retry_limit: args.desc_retries,
        sol_retry_limit: args.sol_retries,
        rng_seed: args.rng_seed,
        workers: args.workers,
        llm_checkers: !args.no_llm_checkers,
        validation: ValidationConfig::default(),
    };
    let report = match run_campaign(&mut store, backend.as_ref(), &cfg) {
        Ok(report) => report,
        Err(CampaignError::Config(message)) => return fail(EXIT_CONFIG, message),
        Err(CampaignError::Corpus(e)) => return fail(EXIT_INPUT, e),
    };

    println!(
        "campaign finished: {} iterations, {} survived, {} discarded ({} backend errors), discard rate {}%",
        report.iterations,
        report.survived,
        report.discarded,
        report.backend_errors,
        display_percent(report.discard_rate()),
    );
    println!("{:<28} {:>9} {:>9}", "operator", "attempted", "survived");
    for (operator, tally) in &report.per_operator {
        println!("{operator:<28} {:>9} {:>9}", tally.attempted, tally.survived);
    }
    println!(
        "queries: {} total ({} description, {} solution); tokens: {} prompt, {} completion",
        report.ledger.queries,
        report.ledger.per_phase["description"].queries,
        report.ledger.per_phase["solution"].queries,
        report.ledger.prompt_tokens,
        report.ledger.completion_tokens,
    );

    let report_path = args
        .report
        .unwrap_or_else(|| args.out.with_extension("report.json"));
    match serde_json::to_string_pretty(&report) {
        Ok(json) => {
            if let Err(e) = std::fs::write(&report_path, json) {
                return fail(EXIT_INPUT, format!("cannot write report: {e}"));
            }
        }
        Err(e) => return fail(EXIT_INPUT, e),
    }
    EXIT_OK
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(ca), Ok(cb)) => ca == cb,
        _ => a == b,
    }
}

fn validation_config(subprocess: Option<Vec<String>>, timeout: u64) -> ValidationConfig {
    ValidationConfig {
        program: match subprocess {
            Some(command) => ProgramMode::Subprocess {
                command,
                timeout: Duration::from_secs(timeout),
            },
            None => ProgramMode::Builtin,
        },
        ..ValidationConfig::default()
    }
}

fn validate(args: ValidateArgs) -> u8 {
    let cfg = validation_config(args.subprocess.clone(), args.timeout);
    match (&args.model, &args.corpus) {
        (Some(path), None) => {
            let text = match std::fs::read_to_string(path) {
                Ok(text) => text,
                Err(e) => return fail(EXIT_INPUT, format!("{}: {e}", path.display())),
            };
            let candidate = parse_solution_text(&text);
            let outcome = run_solution_stages(&candidate, "", &cfg, None);
            for report in &outcome.reports {
                print_report(&path.display().to_string(), report);
            }
            if outcome.passed() {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        (None, Some(path)) => {
            let store = match CorpusStore::load(path) {
                Ok(store) => store,
                Err(e) => return fail(EXIT_INPUT, e),
            };
            let mut failures = 0usize;
            let mut checked = 0usize;
            for record in store.active() {
                checked += 1;
                let candidate = parse_solution_text(&record.model);
                let outcome = run_solution_stages(&candidate, &record.description, &cfg, None);
                if !outcome.passed() {
                    failures += 1;
                    for report in outcome.reports.iter().filter(|r| !r.passed()) {
                        print_report(&record.id, report);
                    }
                }
            }
            println!("checked {checked} active records, {failures} failing");
            if failures == 0 {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        _ => fail(EXIT_CONFIG, "pass exactly one of --model or --corpus"),
    }
}

fn print_report(subject: &str, report: &orforge::CheckReport) {
    if report.passed() {
        println!("{subject}: {} pass", report.stage);
    } else {
        println!("{subject}: {} FAIL - {}", report.stage, report.error_text);
    }
}

fn evaluate(args: EvaluateArgs) -> u8 {
    let instances = match load_benchmark(&args.bench) {
        Ok(instances) => instances,
        Err(e) => return fail(EXIT_INPUT, format!("cannot load benchmark: {e}")),
    };
    let submissions = match load_submissions(&args.solutions) {
        Ok(map) => map,
        Err(e) => return fail(EXIT_INPUT, format!("cannot load solutions: {e}")),
    };
    let comparator = ComparatorConfig {
        tol: args.tol,
        epsilon: args.epsilon,
    };
    let tallies = evaluate_dataset(&instances, &submissions, &comparator, &SolverConfig::default());
    let report = aggregate(&tallies, BTreeMap::new());

    println!("{:<20} {:>8} {:>8} {:>9}", "dataset", "correct", "total", "accuracy");
    for (name, score) in &report.per_dataset {
        println!(
            "{name:<20} {:>8} {:>8} {:>8}%",
            score.correct,
            score.total,
            display_percent(score.accuracy)
        );
    }
    println!(
        "micro {}%  macro {}%",
        display_percent(report.micro),
        display_percent(report.macro_avg)
    );
    if let Some(path) = &args.json {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        if let Err(e) = std::fs::write(path, json) {
            return fail(EXIT_INPUT, format!("cannot write report: {e}"));
        }
    }
    EXIT_OK
}

fn stats(args: StatsArgs) -> u8 {
    let store = match CorpusStore::load(&args.corpus) {
        Ok(store) => store,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    let total = store.len();
    let active = store.active_count();
    println!(
        "records: {total} ({active} active, {} discarded), {} corrupt lines skipped",
        total - active,
        store.corrupt_lines()
    );
    let mut by_operator: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for record in store.records() {
        let entry = by_operator
            .entry(record.lineage.operator.clone())
            .or_default();
        entry.0 += 1;
        if record.status == orforge::corpus::RecordStatus::Active {
            entry.1 += 1;
        }
    }
    println!("{:<28} {:>9} {:>9}", "operator", "records", "active");
    for (operator, (records, active)) in &by_operator {
        println!("{operator:<28} {records:>9} {active:>9}");
    }
    EXIT_OK
}

fn export(args: ExportArgs) -> u8 {
    let store = match CorpusStore::load(&args.corpus) {
        Ok(store) => store,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    match store.export_training(&args.out) {
        Ok(count) => {
            println!("exported {count} training examples to {}", args.out.display());
            EXIT_OK
        }
        Err(e) => fail(EXIT_INPUT, e),
    }
}

fn solve_file(args: SolveArgs) -> u8 {
    let path = match args.model.or(args.positional) {
        Some(path) => path,
        None => return fail(EXIT_CONFIG, "solve needs a model file (--model PATH or PATH)"),
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) => return fail(EXIT_INPUT, format!("{}: {e}", path.display())),
    };
    let model = match parse_model(&text) {
        Ok(model) => model,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    let result = solve(&model, &SolverConfig::default());
    match result.status {
        SolveStatus::Optimal => {
            println!("OBJECTIVE {}", result.objective.expect("optimal result"));
            EXIT_OK
        }
        SolveStatus::Infeasible => {
            println!("INFEASIBLE");
            EXIT_NOT_OPTIMAL
        }
        SolveStatus::Unbounded => {
            println!("UNBOUNDED");
            EXIT_NOT_OPTIMAL
        }
        SolveStatus::NodeLimit => {
            println!("NODE_LIMIT");
            EXIT_NOT_OPTIMAL
        }
    }
}
