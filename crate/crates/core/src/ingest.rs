//! Dataset ingestion: JSONL corpora of sampled responses, optional accuracy
//! labels, response deduplication, and reproducible calibration/test splits.
//!
//! Accuracy labels are ingested, never computed here. Whatever judge produced
//! them lives upstream; this crate accepts binary or continuous values in
//! [0, 1] and thresholds them only where a binary label is required.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {source}")]
    MalformedLine {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("question {question_id}: m<2 (got {m} responses; at least 2 are required for scoring)")]
    TooFewResponses { question_id: String, m: usize },
    #[error("question {question_id}: accuracy has {got} entries for {m} responses")]
    AccuracyLengthMismatch {
        question_id: String,
        got: usize,
        m: usize,
    },
    #[error("question {question_id}: accuracy[{index}] = {value} is outside [0, 1]")]
    AccuracyOutOfRange {
        question_id: String,
        index: usize,
        value: f64,
    },
    #[error("calibration size {calib_size} must be smaller than the dataset ({n} records)")]
    CalibrationTooLarge { calib_size: usize, n: usize },
    #[error("at least one trial is required")]
    NoTrials,
}

/// One question with its m sampled responses.
///
/// Response order is identity: index `j` refers to the same response
/// everywhere downstream (similarity rows, confidence vectors, CSV rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSet {
    pub question_id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_answer: Option<String>,
    pub responses: Vec<String>,
    /// Per-response accuracy in [0, 1], aligned with `responses`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<Vec<f64>>,
}

impl ResponseSet {
    /// Number of sampled responses.
    pub fn m(&self) -> usize {
        self.responses.len()
    }

    /// Keep only the first `m` responses (and their accuracy entries).
    /// Used to sweep the number of generations from one dataset file.
    pub fn truncated(mut self, m: usize) -> Self {
        if self.responses.len() > m {
            self.responses.truncate(m);
            if let Some(acc) = self.accuracy.as_mut() {
                acc.truncate(m);
            }
        }
        self
    }

    fn validate(&self) -> Result<(), IngestError> {
        if self.m() < 2 {
            return Err(IngestError::TooFewResponses {
                question_id: self.question_id.clone(),
                m: self.m(),
            });
        }
        if let Some(acc) = &self.accuracy {
            if acc.len() != self.m() {
                return Err(IngestError::AccuracyLengthMismatch {
                    question_id: self.question_id.clone(),
                    got: acc.len(),
                    m: self.m(),
                });
            }
            for (index, &value) in acc.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                    return Err(IngestError::AccuracyOutOfRange {
                        question_id: self.question_id.clone(),
                        index,
                        value,
                    });
                }
            }
        }
        Ok(())
    }
}

/// One calibration/test split of a dataset.
///
/// `calibration` and `test` are disjoint and together cover the input;
/// identical `(seed, trial_index)` reproduce the split bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub calibration: Vec<ResponseSet>,
    pub test: Vec<ResponseSet>,
    pub seed: u64,
    pub trial_index: u64,
}

/// Load a JSONL dataset: one record per line, file order preserved.
///
/// Records with fewer than 2 responses are rejected, not dropped: a silent
/// drop would corrupt AUARC denominators downstream.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<ResponseSet>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ResponseSet = serde_json::from_str(&line)
            .map_err(|source| IngestError::MalformedLine {
                line: idx + 1,
                source,
            })?;
        record.validate()?;
        records.push(record);
    }
    Ok(records)
}

/// Serialize records back to JSONL, one record per line, LF-terminated.
pub fn to_jsonl(records: &[ResponseSet]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("ResponseSet serializes"));
        out.push('\n');
    }
    out
}

/// Map each response index to the index of its representative: the first
/// response with byte-identical text. Distinct texts are their own
/// representatives.
pub fn dedup_pairs(responses: &[String]) -> Vec<usize> {
    let mut first_seen: HashMap<&str, usize> = HashMap::new();
    responses
        .iter()
        .enumerate()
        .map(|(j, text)| *first_seen.entry(text.as_str()).or_insert(j))
        .collect()
}

/// Number of ordered pairs of distinct representatives: the exact number of
/// NLI calls a cold cache needs for one question.
pub fn ordered_distinct_pair_count(representatives: &[usize]) -> usize {
    let mut reps: Vec<usize> = representatives.to_vec();
    reps.sort_unstable();
    reps.dedup();
    reps.len() * reps.len().saturating_sub(1)
}

/// Deterministic per-trial RNG: ChaCha8 keyed by the run seed and the trial
/// index, so trials are independently reproducible on every platform.
pub fn trial_rng(seed: u64, trial_index: u64) -> rand_chacha::ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial_index.to_le_bytes());
    rand_chacha::ChaCha8Rng::from_seed(key)
}

/// Unbiased uniform draw from `0..bound` by rejection sampling.
fn uniform_below(rng: &mut impl RngCore, bound: u64) -> u64 {
    assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % bound;
        }
    }
}

/// Indices of a uniform sample of `k` items out of `n`, without replacement,
/// returned in ascending order. Partial Fisher-Yates over the index array.
fn sample_indices(rng: &mut impl RngCore, n: usize, k: usize) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + uniform_below(rng, (n - i) as u64) as usize;
        indices.swap(i, j);
    }
    let mut chosen = indices[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Produce `trials` calibration/test splits of the dataset. Each trial draws
/// `calib_size` records uniformly without replacement; the rest form the test
/// set. Both halves keep the input record order.
pub fn split_trials(
    dataset: &[ResponseSet],
    calib_size: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<DatasetSplit>, IngestError> {
    if trials == 0 {
        return Err(IngestError::NoTrials);
    }
    if calib_size >= dataset.len() {
        return Err(IngestError::CalibrationTooLarge {
            calib_size,
            n: dataset.len(),
        });
    }
    let mut splits = Vec::with_capacity(trials);
    for trial_index in 0..trials as u64 {
        let mut rng = trial_rng(seed, trial_index);
        let chosen = sample_indices(&mut rng, dataset.len(), calib_size);
        let mut in_calibration = vec![false; dataset.len()];
        for &i in &chosen {
            in_calibration[i] = true;
        }
        let calibration = chosen.iter().map(|&i| dataset[i].clone()).collect();
        let test = dataset
            .iter()
            .enumerate()
            .filter(|(i, _)| !in_calibration[*i])
            .map(|(_, r)| r.clone())
            .collect();
        splits.push(DatasetSplit {
            calibration,
            test,
            seed,
            trial_index,
        });
    }
    Ok(splits)
}
