//! Natural-language-inference scoring: wire types, softmax post-processing,
//! pair formatting, and the endpoint client with its persistent cache.
//!
//! The classifier itself is external. We POST ordered text pairs to an HTTP
//! endpoint and get back three class logits; everything downstream (softmax
//! temperature, similarity kernels, semantic sets) consumes those logits.

mod cache;
mod client;

pub use cache::{cache_file_path, cache_key, NliCache};
pub use client::{ClassOrder, NliClient, NliEndpointConfig, PrefetchStats};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NliError {
    #[error("softmax temperature must be positive (got {0})")]
    InvalidTemperature(f64),
    #[error("NLI endpoint not configured and pair {pair_key} is not cached")]
    EndpointNotConfigured { pair_key: String },
    #[error("NLI endpoint failed for pair {pair_key} after {attempts} attempts: {message}")]
    Endpoint {
        pair_key: String,
        attempts: u32,
        message: String,
    },
    #[error("malformed NLI response for pair {pair_key}: {reason}; payload: {payload_excerpt}")]
    Protocol {
        pair_key: String,
        reason: String,
        payload_excerpt: String,
    },
    #[error("NLI endpoint returned non-finite logits for pair {pair_key}")]
    NonFiniteLogits { pair_key: String },
    #[error("cache file {path}: {source}")]
    CacheIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cache file {path} is corrupt at line {line}")]
    CacheCorrupt { path: String, line: usize },
}

/// Unnormalized class logits in the fixed order entailment / neutral /
/// contradiction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliLogits {
    pub entail: f64,
    pub neutral: f64,
    pub contra: f64,
}

impl NliLogits {
    pub fn new(entail: f64, neutral: f64, contra: f64) -> Self {
        Self {
            entail,
            neutral,
            contra,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entail.is_finite() && self.neutral.is_finite() && self.contra.is_finite()
    }
}

/// Softmaxed class probabilities at a given temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NliProbabilities {
    pub p_entail: f64,
    pub p_neutral: f64,
    pub p_contra: f64,
    pub temperature: f64,
}

/// Temperature softmax over the three logits, with max-logit subtraction for
/// stability.
pub fn to_probabilities(logits: NliLogits, temperature: f64) -> Result<NliProbabilities, NliError> {
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(NliError::InvalidTemperature(temperature));
    }
    let scaled = [
        logits.entail / temperature,
        logits.neutral / temperature,
        logits.contra / temperature,
    ];
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps = [
        (scaled[0] - max).exp(),
        (scaled[1] - max).exp(),
        (scaled[2] - max).exp(),
    ];
    let z = exps[0] + exps[1] + exps[2];
    Ok(NliProbabilities {
        p_entail: exps[0] / z,
        p_neutral: exps[1] / z,
        p_contra: exps[2] / z,
        temperature,
    })
}

/// Premise/hypothesis texts for an ordered answer pair: the question is
/// prepended to both sides, joined by a single space. The endpoint's
/// two-field split is the separator boundary.
pub fn format_pair(question: &str, answer1: &str, answer2: &str) -> (String, String) {
    (join_side(question, answer1), join_side(question, answer2))
}

fn join_side(question: &str, answer: &str) -> String {
    match (question.is_empty(), answer.is_empty()) {
        (true, _) => answer.to_string(),
        (_, true) => question.to_string(),
        _ => format!("{question} {answer}"),
    }
}

/// Source of raw NLI logits for ordered response pairs of one question.
///
/// Implementations must be pure per cache epoch: the same (question, a, b)
/// yields the same logits for the lifetime of the scorer.
pub trait NliScorer: Sync {
    fn pair_logits(&self, question: &str, a: &str, b: &str) -> Result<NliLogits, NliError>;
}
