//! Answer-equivalence comparison, per-dataset benchmark scoring, micro/macro
//! aggregation, and per-operator survival reporting.

use crate::model::{parse_model, OptModel};
use crate::solver::{solve, SolveStatus, SolverConfig};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparatorConfig {
    pub tol: f64,
    pub epsilon: f64,
}

impl Default for ComparatorConfig {
    fn default() -> Self {
        ComparatorConfig {
            tol: 1e-4,
            epsilon: 1e-6,
        }
    }
}

/// Relative-error equivalence: `|o - g| <= tol * |g + epsilon|`. The
/// denominator keeps its absolute value so a ground truth near `-epsilon`
/// cannot flip the comparison.
pub fn answers_equivalent(output: f64, ground_truth: f64, cfg: &ComparatorConfig) -> bool {
    (output - ground_truth).abs() <= cfg.tol * (ground_truth + cfg.epsilon).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkInstance {
    pub id: String,
    pub dataset: String,
    pub description: String,
    pub ground_truth: f64,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("solution {0} matches no benchmark instance")]
    UnknownInstance(String),
}

/// One submitted answer: either a model to solve or a declared value.
#[derive(Debug, Clone)]
pub enum Submission {
    Model(OptModel),
    Declared(f64),
}

/// Wire form of a submission line: `{id, model}` or `{id, answer}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetTally {
    pub correct: usize,
    pub total: usize,
    /// Instances that scored incorrect, with the reason.
    pub failures: Vec<(String, String)>,
}

impl DatasetTally {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetScore {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub per_dataset: BTreeMap<String, DatasetScore>,
    /// Pooled accuracy over all instances.
    pub micro: f64,
    /// Unweighted mean of per-dataset accuracies.
    pub macro_avg: f64,
    /// operator -> (attempted, survived)
    pub survival: BTreeMap<String, (u64, u64)>,
}

/// Loads a JSON Lines benchmark file (`{id, dataset, description,
/// ground_truth}` per line).
pub fn load_benchmark(path: impl AsRef<Path>) -> Result<Vec<BenchmarkInstance>, EvalError> {
    let file = std::fs::File::open(path.as_ref())?;
    let mut instances = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst = serde_json::from_str(&line).map_err(|source| EvalError::Parse {
            line: idx + 1,
            source,
        })?;
        instances.push(inst);
    }
    Ok(instances)
}

/// Loads a submissions file and parses model-valued entries. Unparseable
/// models are kept as failures at scoring time, not load errors.
pub fn load_submissions(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<String, Result<Submission, String>>, EvalError> {
    let file = std::fs::File::open(path.as_ref())?;
    let mut out = BTreeMap::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SubmissionRecord =
            serde_json::from_str(&line).map_err(|source| EvalError::Parse {
                line: idx + 1,
                source,
            })?;
        let parsed = match (&record.model, record.answer) {
            (Some(source), _) => match parse_model(source) {
                Ok(m) => Ok(Submission::Model(m)),
                Err(e) => Err(format!("model parse failed: {e}")),
            },
            (None, Some(value)) => Ok(Submission::Declared(value)),
            (None, None) => Err("submission carries neither model nor answer".to_string()),
        };
        out.insert(record.id, parsed);
    }
    Ok(out)
}

/// Scores one candidate per instance. Model submissions are solved with the
/// built-in solver and their objective compared under Eq-style equivalence;
/// declared values compare directly. Missing or unsolvable submissions count
/// as incorrect; per-instance problems never abort the run.
pub fn evaluate_dataset(
    instances: &[BenchmarkInstance],
    submissions: &BTreeMap<String, Result<Submission, String>>,
    cfg: &ComparatorConfig,
    solver_cfg: &SolverConfig,
) -> BTreeMap<String, DatasetTally> {
    let mut tallies: BTreeMap<String, DatasetTally> = BTreeMap::new();
    for inst in instances {
        let tally = tallies.entry(inst.dataset.clone()).or_default();
        tally.total += 1;
        let outcome: Result<f64, String> = match submissions.get(&inst.id) {
            None => Err("no submission".to_string()),
            Some(Err(reason)) => Err(reason.clone()),
            Some(Ok(Submission::Declared(value))) => Ok(*value),
            Some(Ok(Submission::Model(model))) => {
                let result = solve(model, solver_cfg);
                match result.status {
                    SolveStatus::Optimal => Ok(result.objective.expect("optimal has objective")),
                    status => Err(status.to_string()),
                }
            }
        };
        match outcome {
            Ok(value) if answers_equivalent(value, inst.ground_truth, cfg) => {
                tally.correct += 1;
            }
            Ok(value) => {
                tally
                    .failures
                    .push((inst.id.clone(), format!("answer {value} not equivalent")));
            }
            Err(reason) => {
                tally.failures.push((inst.id.clone(), reason));
            }
        }
    }
    tallies
}

/// Folds per-dataset tallies into micro/macro averages. Values stay at full
/// precision; rounding happens only at display.
pub fn aggregate(
    tallies: &BTreeMap<String, DatasetTally>,
    survival: BTreeMap<String, (u64, u64)>,
) -> AggregateReport {
    let mut per_dataset = BTreeMap::new();
    let mut correct = 0usize;
    let mut total = 0usize;
    let mut accuracy_sum = 0.0;
    for (name, tally) in tallies {
        correct += tally.correct;
        total += tally.total;
        accuracy_sum += tally.accuracy();
        per_dataset.insert(
            name.clone(),
            DatasetScore {
                correct: tally.correct,
                total: tally.total,
                accuracy: tally.accuracy(),
            },
        );
    }
    let micro = if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    };
    let macro_avg = if tallies.is_empty() {
        0.0
    } else {
        accuracy_sum / tallies.len() as f64
    };
    AggregateReport {
        per_dataset,
        micro,
        macro_avg,
        survival,
    }
}

/// Documented oracle for reconstructing correct-answer counts from a
/// published percentage: `round(accuracy * total)`.
pub fn correct_count_from_accuracy(accuracy_percent: f64, total: usize) -> usize {
    (accuracy_percent / 100.0 * total as f64).round() as usize
}

/// Display rounding: percent with two decimals, half away from zero.
pub fn display_percent(fraction: f64) -> String {
    format!("{:.2}", (fraction * 10_000.0).round() / 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SALMON_EGGS: &str = "\
var s integer\nvar e integer\nmin 80 s + 20 e\n\
st calories: 300 s + 200 e >= 2000\n\
st protein: 15 s + 8 e >= 90\n\
st egg_ratio: 3 e - 2 s <= 0\n";

    #[test]
    fn relaxation_answer_is_not_equivalent_to_integer_optimum() {
        let cfg = ComparatorConfig::default();
        assert!(!answers_equivalent(430.7692307692307, 460.0, &cfg));
        assert!(answers_equivalent(460.0, 460.0, &cfg));
    }

    #[test]
    fn near_boundary_ratio_is_accepted() {
        let cfg = ComparatorConfig::default();
        // |o - g| / |g + eps| ~ 9.9999e-5 <= 1e-4
        assert!(answers_equivalent(1.00009999, 1.0, &cfg));
    }

    #[test]
    fn boundary_flips_at_the_threshold() {
        let cfg = ComparatorConfig::default();
        let g = 1.0;
        let radius = cfg.tol * (g + cfg.epsilon).abs();
        assert!(answers_equivalent(g + radius - 1e-12, g, &cfg));
        assert!(!answers_equivalent(g + radius + 1e-12, g, &cfg));
    }

    #[test]
    fn equivalence_is_reflexive_for_negative_values() {
        let cfg = ComparatorConfig::default();
        for g in [-5.0, -1e-6, 0.0, 3.25e7] {
            assert!(answers_equivalent(g, g, &cfg), "g = {g}");
        }
    }

    fn bench(id: &str, dataset: &str, truth: f64) -> BenchmarkInstance {
        BenchmarkInstance {
            id: id.to_string(),
            dataset: dataset.to_string(),
            description: format!("instance {id}"),
            ground_truth: truth,
        }
    }

    #[test]
    fn dataset_scoring_solves_models_and_compares_declared_values() {
        let instances = vec![
            bench("a", "d1", 460.0),
            bench("b", "d1", 460.0),
            bench("c", "d1", 1.0),
        ];
        let mut submissions: BTreeMap<String, Result<Submission, String>> = BTreeMap::new();
        submissions.insert(
            "a".into(),
            Ok(Submission::Model(parse_model(SALMON_EGGS).unwrap())),
        );
        submissions.insert("b".into(), Ok(Submission::Declared(430.7692307692307)));
        submissions.insert(
            "c".into(),
            Ok(Submission::Model(
                parse_model("var x\nmin x\nst a: x >= 5\nst b: x <= 3").unwrap(),
            )),
        );
        let tallies = evaluate_dataset(
            &instances,
            &submissions,
            &ComparatorConfig::default(),
            &SolverConfig::default(),
        );
        let d1 = &tallies["d1"];
        assert_eq!(d1.correct, 1);
        assert_eq!(d1.total, 3);
        assert!(d1
            .failures
            .iter()
            .any(|(id, reason)| id == "c" && reason.contains("infeasible")));
    }

    #[test]
    fn missing_submissions_count_as_incorrect() {
        let instances = vec![bench("a", "d1", 10.0)];
        let tallies = evaluate_dataset(
            &instances,
            &BTreeMap::new(),
            &ComparatorConfig::default(),
            &SolverConfig::default(),
        );
        assert_eq!(tallies["d1"].correct, 0);
        assert_eq!(tallies["d1"].total, 1);
    }

    fn synthetic_tallies(accuracies: [f64; 4], sizes: [usize; 4]) -> BTreeMap<String, DatasetTally> {
        let names = ["a_nl4opt", "b_easylp", "c_complexlp", "d_industryor"];
        let mut tallies = BTreeMap::new();
        for i in 0..4 {
            let correct = correct_count_from_accuracy(accuracies[i], sizes[i]);
            tallies.insert(
                names[i].to_string(),
                DatasetTally {
                    correct,
                    total: sizes[i],
                    failures: vec![],
                },
            );
        }
        tallies
    }

    #[test]
    fn published_row_micro_macro_reconstruction() {
        let tallies = synthetic_tallies([84.49, 85.28, 61.61, 36.36], [245, 652, 211, 77]);
        let report = aggregate(&tallies, BTreeMap::new());
        assert!((report.micro * 100.0 - 77.72).abs() < 0.01, "{}", report.micro);
        assert!(
            (report.macro_avg * 100.0 - 66.94).abs() < 0.01,
            "{}",
            report.macro_avg
        );
    }

    #[test]
    fn second_published_row_reconstruction() {
        let tallies = synthetic_tallies([78.37, 84.20, 38.39, 35.06], [245, 652, 211, 77]);
        let report = aggregate(&tallies, BTreeMap::new());
        assert!((report.micro * 100.0 - 71.65).abs() < 0.01);
        assert!((report.macro_avg * 100.0 - 59.01).abs() < 0.01);
    }

    #[test]
    fn single_dataset_micro_equals_macro() {
        let mut tallies = BTreeMap::new();
        tallies.insert(
            "only".to_string(),
            DatasetTally {
                correct: 3,
                total: 4,
                failures: vec![],
            },
        );
        let report = aggregate(&tallies, BTreeMap::new());
        assert_eq!(report.micro, report.macro_avg);
        assert_eq!(report.micro, 0.75);
    }

    #[test]
    fn micro_lies_between_dataset_extremes() {
        let tallies = synthetic_tallies([20.0, 40.0, 60.0, 80.0], [50, 60, 70, 80]);
        let report = aggregate(&tallies, BTreeMap::new());
        let accs: Vec<f64> = report.per_dataset.values().map(|d| d.accuracy).collect();
        let lo = accs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = accs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(report.micro >= lo && report.micro <= hi);
    }

    #[test]
    fn display_rounding_keeps_two_decimals() {
        assert_eq!(display_percent(921.0 / 1185.0), "77.72");
        assert_eq!(display_percent(0.5), "50.00");
        assert_eq!(display_percent(849.0 / 1185.0), "71.65");
    }
}
