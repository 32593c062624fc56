//! Append-only JSON Lines store for the evolving dataset: seed loading,
//! durable appends, tombstoned discards, lineage tracking, uniform sampling,
//! and training-format export.

use crate::report::CheckReport;
use rand::seq::IteratorRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Lineage label for corpus seeds (records with no parents).
pub const SEED_OPERATOR: &str = "seed";

/// Instruction field emitted for every training example.
pub const TRAINING_INSTRUCTION: &str = "You are an expert in operations research. \
Read the problem below, build the mathematical model and the corresponding \
machine-readable program, and state the optimal value.";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("duplicate record id {0}")]
    DuplicateId(String),
    #[error("unknown parent id {0}")]
    UnknownParent(String),
    #[error("corpus has no active records")]
    EmptyCorpus,
    #[error("sampling a pair requires at least 2 active records")]
    NotEnoughRecords,
    #[error("invalid record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Active,
    Discarded,
}

/// Where a record came from: up to two parents, the operator that produced
/// it ("seed" for initial data), and the campaign iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lineage {
    pub parent_ids: Vec<String>,
    pub operator: String,
    pub iteration: u64,
}

impl Lineage {
    pub fn seed() -> Self {
        Lineage {
            parent_ids: Vec::new(),
            operator: SEED_OPERATOR.to_string(),
            iteration: 0,
        }
    }

    fn expected_arity(&self) -> Option<usize> {
        match self.operator.as_str() {
            SEED_OPERATOR => Some(0),
            "combination" => Some(2),
            _ => Some(1),
        }
    }
}

/// One corpus record: a problem description plus its model, check history,
/// and lineage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedExample {
    pub id: String,
    pub description: String,
    /// Structured model source in the `.optir` grammar (may be empty or
    /// unparseable on discarded records).
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub narrative: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program_output: Option<f64>,
    pub lineage: Lineage,
    pub status: RecordStatus,
    pub checks: Vec<CheckReport>,
}

/// A corpus file line: either a full record or a tombstone marking an
/// earlier record as discarded without rewriting history.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum CorpusLine {
    Tombstone { tombstone_of: String },
    Record(Box<SeedExample>),
}

/// In-memory view over an append-only corpus file. A single writer
/// serializes appends; readers see a consistent prefix.
#[derive(Debug)]
pub struct CorpusStore {
    path: PathBuf,
    records: Vec<SeedExample>,
    index: HashMap<String, usize>,
    corrupt_lines: usize,
}

impl CorpusStore {
    /// Creates an empty store backed by `path` (the file is created on the
    /// first append).
    pub fn create(path: impl Into<PathBuf>) -> Self {
        CorpusStore {
            path: path.into(),
            records: Vec::new(),
            index: HashMap::new(),
            corrupt_lines: 0,
        }
    }

    /// Loads a corpus file. Corrupt lines are skipped with a warning and
    /// counted in [`CorpusStore::corrupt_lines`]; tombstones flip the status
    /// of the record they reference.
    pub fn load(path: impl Into<PathBuf>) -> Result<Self, CorpusError> {
        let path = path.into();
        let mut store = CorpusStore::create(path.clone());
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(store),
            Err(e) => return Err(e.into()),
        };
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<CorpusLine>(&line) {
                Ok(CorpusLine::Record(record)) => {
                    if store.index.contains_key(&record.id) {
                        log::warn!("line {}: duplicate record id {}, skipped", idx + 1, record.id);
                        store.corrupt_lines += 1;
                        continue;
                    }
                    store.index.insert(record.id.clone(), store.records.len());
                    store.records.push(*record);
                }
                Ok(CorpusLine::Tombstone { tombstone_of }) => {
                    match store.index.get(&tombstone_of) {
                        Some(&i) => store.records[i].status = RecordStatus::Discarded,
                        None => {
                            log::warn!(
                                "line {}: tombstone for unknown id {tombstone_of}, skipped",
                                idx + 1
                            );
                            store.corrupt_lines += 1;
                        }
                    }
                }
                Err(e) => {
                    log::warn!("line {}: corrupt record skipped: {e}", idx + 1);
                    store.corrupt_lines += 1;
                }
            }
        }
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Lines skipped during the last load.
    pub fn corrupt_lines(&self) -> usize {
        self.corrupt_lines
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &SeedExample> {
        self.records.iter()
    }

    pub fn active(&self) -> impl Iterator<Item = &SeedExample> {
        self.records
            .iter()
            .filter(|r| r.status == RecordStatus::Active)
    }

    pub fn active_count(&self) -> usize {
        self.active().count()
    }

    pub fn get(&self, id: &str) -> Option<&SeedExample> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    fn write_line(&self, line: &CorpusLine) -> Result<(), CorpusError> {
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        let json = serde_json::to_string(line)?;
        writeln!(file, "{json}")?;
        file.sync_all()?;
        Ok(())
    }

    /// Appends a record durably and returns its id. The id must be fresh and
    /// every parent must resolve.
    pub fn append(&mut self, record: SeedExample) -> Result<String, CorpusError> {
        if self.index.contains_key(&record.id) {
            return Err(CorpusError::DuplicateId(record.id));
        }
        if let Some(arity) = record.lineage.expected_arity() {
            if record.lineage.parent_ids.len() != arity {
                return Err(CorpusError::InvalidRecord {
                    id: record.id.clone(),
                    reason: format!(
                        "operator {} expects {} parent(s), found {}",
                        record.lineage.operator,
                        arity,
                        record.lineage.parent_ids.len()
                    ),
                });
            }
        }
        for parent in &record.lineage.parent_ids {
            if !self.index.contains_key(parent) {
                return Err(CorpusError::UnknownParent(parent.clone()));
            }
        }
        self.write_line(&CorpusLine::Record(Box::new(record.clone())))?;
        let id = record.id.clone();
        self.index.insert(id.clone(), self.records.len());
        self.records.push(record);
        Ok(id)
    }

    /// Marks an existing record discarded by appending a tombstone; the
    /// original line is never rewritten.
    pub fn mark_discarded(&mut self, id: &str) -> Result<(), CorpusError> {
        let &i = self
            .index
            .get(id)
            .ok_or_else(|| CorpusError::UnknownParent(id.to_string()))?;
        self.write_line(&CorpusLine::Tombstone {
            tombstone_of: id.to_string(),
        })?;
        self.records[i].status = RecordStatus::Discarded;
        Ok(())
    }

    /// Uniform draw over active records. Discarded records are never
    /// returned.
    pub fn sample_seed<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&SeedExample, CorpusError> {
        self.active().choose(rng).ok_or(CorpusError::EmptyCorpus)
    }

    /// Two distinct active records, uniform over unordered pairs.
    pub fn sample_pair<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<(&SeedExample, &SeedExample), CorpusError> {
        let active: Vec<&SeedExample> = self.active().collect();
        if active.len() < 2 {
            return Err(CorpusError::NotEnoughRecords);
        }
        let first = rng.random_range(0..active.len());
        let mut second = rng.random_range(0..active.len() - 1);
        if second >= first {
            second += 1;
        }
        Ok((active[first], active[second]))
    }

    /// Writes active records as training examples
    /// (`{instruction, input, output}` JSON Lines) and returns the count.
    pub fn export_training(&self, out_path: impl AsRef<Path>) -> Result<usize, CorpusError> {
        let mut file = File::create(out_path.as_ref())?;
        let mut count = 0;
        for record in self.active() {
            let mut output = String::new();
            if let Some(narrative) = &record.narrative {
                output.push_str(narrative);
                if !narrative.ends_with('\n') {
                    output.push('\n');
                }
            }
            output.push_str(&record.model);
            let row = serde_json::json!({
                "instruction": TRAINING_INSTRUCTION,
                "input": record.description,
                "output": output,
            });
            writeln!(file, "{row}")?;
            count += 1;
        }
        file.sync_all()?;
        Ok(count)
    }
}
