//! End-to-end tests over the `orforge` binary: exit codes, wire formats,
//! and the scripted generation demo.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_orforge")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

#[test]
fn solve_prints_objective_line() {
    let model = fixtures().join("models/salmon_eggs.optir");
    let output = run(&["solve", "--model", model.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 0);
    assert_eq!(stdout(&output).trim(), "OBJECTIVE 460");
}

#[test]
fn solve_reports_infeasible_with_exit_4() {
    let model = fixtures().join("models/infeasible.optir");
    let output = run(&["solve", "--model", model.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 4);
    assert_eq!(stdout(&output).trim(), "INFEASIBLE");
}

#[test]
fn solve_handles_subtour_fixtures() {
    let mtz = fixtures().join("models/tsp4_mtz.optir");
    let output = run(&["solve", "--model", mtz.to_str().unwrap()]);
    assert_eq!(stdout(&output).trim(), "OBJECTIVE 127");

    let loose = fixtures().join("models/tsp4_nosubtour.optir");
    let output = run(&["solve", "--model", loose.to_str().unwrap()]);
    assert_eq!(stdout(&output).trim(), "OBJECTIVE 50");
}

#[test]
fn solve_accepts_positional_model_path() {
    let model = fixtures().join("models/salmon_eggs.optir");
    let output = run(&["solve", model.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 0);
    assert_eq!(stdout(&output).trim(), "OBJECTIVE 460");
}

#[test]
fn solve_on_unreadable_file_exits_3() {
    let output = run(&["solve", "--model", "/nonexistent/model.optir"]);
    assert_eq!(exit_code(&output), 3);
}

fn write_backend_conf(dir: &Path) -> PathBuf {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/demo_fixture.jsonl");
    let conf = dir.join("backend.conf");
    std::fs::write(
        &conf,
        format!("kind = scripted\nfixtures = {}\n", fixture.display()),
    )
    .unwrap();
    conf
}

#[test]
fn generate_demo_reports_three_survivors() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_backend_conf(dir.path());
    let out = dir.path().join("out.jsonl");
    let seeds = fixtures().join("seeds.jsonl");
    let output = run(&[
        "generate",
        "--seeds",
        seeds.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--iterations",
        "5",
        "--backend",
        conf.to_str().unwrap(),
        "--desc-retries",
        "0",
        "--sol-retries",
        "0",
        "--rng-seed",
        "42",
    ]);
    assert_eq!(exit_code(&output), 0, "{}", String::from_utf8_lossy(&output.stderr));
    let text = stdout(&output);
    assert!(text.contains("3 survived, 2 discarded"), "{text}");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["survived"], 3);
    assert_eq!(report["discarded"], 2);

    // 3 seeds copied + 5 generated records
    let corpus = std::fs::read_to_string(&out).unwrap();
    assert_eq!(corpus.lines().count(), 8);
}

#[test]
fn generate_zero_iterations_is_a_noop() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_backend_conf(dir.path());
    let out = dir.path().join("out.jsonl");
    let seeds = fixtures().join("seeds.jsonl");
    let output = run(&[
        "generate",
        "--seeds",
        seeds.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--iterations",
        "0",
        "--backend",
        conf.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["iterations"], 0);
    assert_eq!(report["survived"], 0);
}

#[test]
fn generate_without_backend_flag_exits_2_with_usage() {
    let output = run(&["generate", "--seeds", "a", "--out", "b", "--iterations", "1"]);
    assert_eq!(exit_code(&output), 2);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("--backend"), "{stderr}");
    assert!(stderr.to_lowercase().contains("usage"), "{stderr}");
}

#[test]
fn generate_with_bad_backend_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("backend.conf");
    std::fs::write(&conf, "kind = teapot\n").unwrap();
    let seeds = fixtures().join("seeds.jsonl");
    let output = run(&[
        "generate",
        "--seeds",
        seeds.to_str().unwrap(),
        "--out",
        dir.path().join("out.jsonl").to_str().unwrap(),
        "--iterations",
        "1",
        "--backend",
        conf.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 2);
}

#[test]
fn generate_with_missing_seed_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_backend_conf(dir.path());
    let output = run(&[
        "generate",
        "--seeds",
        "/nonexistent/seeds.jsonl",
        "--out",
        dir.path().join("out.jsonl").to_str().unwrap(),
        "--iterations",
        "1",
        "--backend",
        conf.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 3);
}

fn write_published_row(dir: &Path) -> (PathBuf, PathBuf) {
    let sizes = [("nl4opt", 245usize, 207usize), ("mamo_easylp", 652, 556),
                 ("mamo_complexlp", 211, 130), ("industryor", 77, 28)];
    let bench = dir.join("bench.jsonl");
    let solutions = dir.join("solutions.jsonl");
    let mut bench_lines = String::new();
    let mut solution_lines = String::new();
    for (dataset, total, correct) in sizes {
        for i in 0..total {
            let id = format!("{dataset}-{i:04}");
            bench_lines.push_str(&format!(
                "{}\n",
                serde_json::json!({"id": id, "dataset": dataset, "description": format!("instance {i}"), "ground_truth": 100.0})
            ));
            let answer = if i < correct { 100.0 } else { 250.0 };
            solution_lines.push_str(&format!(
                "{}\n",
                serde_json::json!({"id": id, "answer": answer})
            ));
        }
    }
    std::fs::write(&bench, bench_lines).unwrap();
    std::fs::write(&solutions, solution_lines).unwrap();
    (bench, solutions)
}

#[test]
fn evaluate_reproduces_published_row_averages() {
    let dir = tempfile::tempdir().unwrap();
    let (bench, solutions) = write_published_row(dir.path());
    let json = dir.path().join("report.json");
    let output = run(&[
        "evaluate",
        "--bench",
        bench.to_str().unwrap(),
        "--solutions",
        solutions.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0);
    let text = stdout(&output);
    assert!(text.contains("micro 77.72%  macro 66.94%"), "{text}");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!((report["micro"].as_f64().unwrap() - 921.0 / 1185.0).abs() < 1e-12);
    assert_eq!(report["per_dataset"]["nl4opt"]["correct"], 207);
}

#[test]
fn evaluate_with_empty_solutions_scores_zero() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("bench.jsonl");
    std::fs::write(
        &bench,
        format!(
            "{}\n",
            serde_json::json!({"id": "a", "dataset": "d1", "description": "x", "ground_truth": 5.0})
        ),
    )
    .unwrap();
    let solutions = dir.path().join("solutions.jsonl");
    std::fs::write(&solutions, "").unwrap();
    let output = run(&[
        "evaluate",
        "--bench",
        bench.to_str().unwrap(),
        "--solutions",
        solutions.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0);
    let text = stdout(&output);
    assert!(text.contains("micro 0.00%  macro 0.00%"), "{text}");
}

#[test]
fn evaluate_tolerance_override_flips_borderline_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("bench.jsonl");
    std::fs::write(
        &bench,
        format!(
            "{}\n",
            serde_json::json!({"id": "a", "dataset": "d1", "description": "x", "ground_truth": 1.0})
        ),
    )
    .unwrap();
    let solutions = dir.path().join("solutions.jsonl");
    std::fs::write(
        &solutions,
        format!("{}\n", serde_json::json!({"id": "a", "answer": 1.00009})),
    )
    .unwrap();

    let default_run = run(&[
        "evaluate",
        "--bench",
        bench.to_str().unwrap(),
        "--solutions",
        solutions.to_str().unwrap(),
    ]);
    assert!(stdout(&default_run).contains("micro 100.00%"), "{}", stdout(&default_run));

    let tight = run(&[
        "evaluate",
        "--bench",
        bench.to_str().unwrap(),
        "--solutions",
        solutions.to_str().unwrap(),
        "--tol",
        "1e-5",
    ]);
    assert!(stdout(&tight).contains("micro 0.00%"), "{}", stdout(&tight));
}

#[test]
fn evaluate_solves_model_submissions() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("bench.jsonl");
    std::fs::write(
        &bench,
        format!(
            "{}\n",
            serde_json::json!({"id": "meal", "dataset": "d1", "description": "bowls", "ground_truth": 460.0})
        ),
    )
    .unwrap();
    let model_source = std::fs::read_to_string(fixtures().join("models/salmon_eggs.optir")).unwrap();
    let solutions = dir.path().join("solutions.jsonl");
    std::fs::write(
        &solutions,
        format!("{}\n", serde_json::json!({"id": "meal", "model": model_source})),
    )
    .unwrap();
    let output = run(&[
        "evaluate",
        "--bench",
        bench.to_str().unwrap(),
        "--solutions",
        solutions.to_str().unwrap(),
    ]);
    assert!(stdout(&output).contains("micro 100.00%"), "{}", stdout(&output));
}

#[test]
fn stats_and_export_never_touch_a_backend() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = fixtures().join("seeds.jsonl");
    let stats = run(&["stats", "--corpus", seeds.to_str().unwrap()]);
    assert_eq!(exit_code(&stats), 0);
    assert!(stdout(&stats).contains("3 active"), "{}", stdout(&stats));

    let out = dir.path().join("train.jsonl");
    let export = run(&[
        "export",
        "--corpus",
        seeds.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&export), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert!(first["instruction"].as_str().unwrap().contains("operations research"));
}

#[test]
fn validate_passes_shipped_seed_corpus() {
    let seeds = fixtures().join("seeds.jsonl");
    let output = run(&["validate", "--corpus", seeds.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 0, "{}", stdout(&output));
    assert!(stdout(&output).contains("checked 3 active records, 0 failing"));
}

#[test]
fn validate_flags_one_sided_absolute_value_model() {
    let model = fixtures().join("models/resource_allocation_onesided.optir");
    let output = run(&["validate", "--model", model.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 1);
    assert!(stdout(&output).contains("missing branch"), "{}", stdout(&output));
}

/// The binary is its own subprocess-mode executor: `orforge solve` obeys the
/// model-path-as-last-argument contract.
#[test]
fn validate_subprocess_mode_round_trips_through_own_solver() {
    let model = fixtures().join("models/salmon_eggs.optir");
    let output = run(&[
        "validate",
        "--model",
        model.to_str().unwrap(),
        "--subprocess",
        bin(),
        "solve",
    ]);
    assert_eq!(exit_code(&output), 0, "{}", stdout(&output));
    assert!(stdout(&output).contains("program pass"), "{}", stdout(&output));
}
