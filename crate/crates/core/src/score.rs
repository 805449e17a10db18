//! Per-question scoring pipeline: similarity kernels in, uncertainty and
//! confidence scores out.
//!
//! NLI logits are fetched once per question and reused by every measure and
//! every softmax temperature; spectra are memoized per (question, kernel,
//! temperature) so an eigenvalue-threshold sweep costs nothing beyond the
//! first decomposition.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::ingest::ResponseSet;
use crate::measures::MeasureSpec;
use crate::nli::{NliError, NliScorer};
use crate::semantic_sets::{cluster_from_pair_logits, num_set_uncertainty, SemanticPartition};
use crate::similarity::{
    build_similarity_matrix, lexi_sim_uncertainty, similarity_from_pair_logits, PairLogits,
    SimilarityError, SimilarityKernel,
};
use crate::spectral::{
    deg_scores, ecc_embed, ecc_scores, eigen_decompose, laplacian, u_eigv, EccEmbedding,
    MeasureKind, MeasureScores, SpectralError, SpectralSummary,
};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("question {question_id}: {source}")]
    Similarity {
        question_id: String,
        #[source]
        source: SimilarityError,
    },
    #[error("question {question_id}: {source}")]
    Spectral {
        question_id: String,
        #[source]
        source: SpectralError,
    },
    #[error(transparent)]
    Nli(#[from] NliError),
    #[error("measure {measure} requires an NLI scorer but none is configured")]
    NliScorerMissing { measure: MeasureSpec },
}

/// Hyperparameters a scoring pass runs with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    /// NLI softmax temperature for the E/C kernels.
    pub temperature: f64,
    /// Eigenvalue cutoff selecting the Ecc embedding dimension.
    pub ecc_threshold: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            ecc_threshold: 0.9,
        }
    }
}

/// All scores computed for one question.
#[derive(Debug, Clone)]
pub struct ScoredQuestion {
    pub question_id: String,
    pub m: usize,
    pub accuracy: Option<Vec<f64>>,
    pub scores: Vec<(MeasureSpec, MeasureScores)>,
    /// Present when NumSet was among the measures.
    pub semantic_sets: Option<SemanticPartition>,
    /// Embedding of the first Ecc measure, kept for optional export.
    pub ecc_embedding: Option<EccEmbedding>,
}

impl ScoredQuestion {
    pub fn score(&self, measure: MeasureSpec) -> Option<&MeasureScores> {
        self.scores
            .iter()
            .find(|(spec, _)| *spec == measure)
            .map(|(_, s)| s)
    }
}

/// Anything that can score questions. The production implementation is
/// [`ScoringPipeline`]; tests instrument this to observe which questions a
/// caller evaluates.
pub trait QuestionScorer: Sync {
    fn score_question(
        &self,
        rs: &ResponseSet,
        measures: &[MeasureSpec],
        params: &HyperParams,
    ) -> Result<ScoredQuestion, ScoreError>;
}

type SpectrumKey = (String, SimilarityKernel, u64);

/// The production scorer. Thread-safe; per-question work is sequential and
/// callers parallelize across questions.
pub struct ScoringPipeline {
    nli: Option<Arc<dyn NliScorer + Send + Sync>>,
    spectra: Mutex<HashMap<SpectrumKey, SpectralSummary>>,
}

impl ScoringPipeline {
    pub fn new(nli: Option<Arc<dyn NliScorer + Send + Sync>>) -> Self {
        Self {
            nli,
            spectra: Mutex::new(HashMap::new()),
        }
    }

    fn similarity_error(&self, rs: &ResponseSet, source: SimilarityError) -> ScoreError {
        ScoreError::Similarity {
            question_id: rs.question_id.clone(),
            source,
        }
    }

    /// Spectrum for (question, kernel) at the temperature the kernel was
    /// built with, memoized across calls.
    fn spectrum(
        &self,
        rs: &ResponseSet,
        kernel: SimilarityKernel,
        temperature: f64,
        pair_logits: Option<&PairLogits>,
    ) -> Result<SpectralSummary, ScoreError> {
        let key = (
            rs.question_id.clone(),
            kernel,
            if kernel.needs_nli() {
                temperature.to_bits()
            } else {
                0
            },
        );
        if let Some(hit) = self.spectra.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let sm = self.similarity(rs, kernel, temperature, pair_logits)?;
        let summary = eigen_decompose(&laplacian(&sm.w)).map_err(|source| {
            ScoreError::Spectral {
                question_id: rs.question_id.clone(),
                source,
            }
        })?;
        self.spectra
            .lock()
            .unwrap()
            .insert(key, summary.clone());
        Ok(summary)
    }

    fn similarity(
        &self,
        rs: &ResponseSet,
        kernel: SimilarityKernel,
        temperature: f64,
        pair_logits: Option<&PairLogits>,
    ) -> Result<crate::similarity::SimilarityMatrix, ScoreError> {
        let built = match (kernel.needs_nli(), pair_logits) {
            (true, Some(pl)) => similarity_from_pair_logits(pl, kernel, temperature),
            _ => build_similarity_matrix(
                rs,
                kernel,
                self.nli.as_deref().map(|s| s as &dyn NliScorer),
                temperature,
            ),
        };
        built.map_err(|source| self.similarity_error(rs, source))
    }
}

impl QuestionScorer for ScoringPipeline {
    fn score_question(
        &self,
        rs: &ResponseSet,
        measures: &[MeasureSpec],
        params: &HyperParams,
    ) -> Result<ScoredQuestion, ScoreError> {
        let needs_nli = measures.iter().any(|m| m.needs_nli());
        let pair_logits = if needs_nli {
            let scorer = self
                .nli
                .as_deref()
                .ok_or_else(|| ScoreError::NliScorerMissing {
                    measure: *measures.iter().find(|m| m.needs_nli()).unwrap(),
                })?;
            Some(
                PairLogits::collect(rs, scorer)
                    .map_err(|source| self.similarity_error(rs, source))?,
            )
        } else {
            None
        };

        let mut scores = Vec::with_capacity(measures.len());
        let mut semantic_sets = None;
        let mut ecc_embedding = None;
        for &measure in measures {
            let computed = match measure.kind {
                MeasureKind::NumSet => {
                    let partition = cluster_from_pair_logits(pair_logits.as_ref().unwrap())
                        .map_err(|source| self.similarity_error(rs, source))?;
                    let u = num_set_uncertainty(&partition);
                    semantic_sets = Some(partition);
                    MeasureScores {
                        measure: MeasureKind::NumSet,
                        u,
                        c: None,
                    }
                }
                MeasureKind::LexiSim => MeasureScores {
                    measure: MeasureKind::LexiSim,
                    u: lexi_sim_uncertainty(rs)
                        .map_err(|source| self.similarity_error(rs, source))?,
                    c: None,
                },
                MeasureKind::EigV => {
                    let kernel = measure.kernel.expect("spectral measure has a kernel");
                    let summary =
                        self.spectrum(rs, kernel, params.temperature, pair_logits.as_ref())?;
                    u_eigv(&summary)
                }
                MeasureKind::Deg => {
                    let kernel = measure.kernel.expect("spectral measure has a kernel");
                    let sm =
                        self.similarity(rs, kernel, params.temperature, pair_logits.as_ref())?;
                    deg_scores(&laplacian(&sm.w))
                }
                MeasureKind::Ecc => {
                    let kernel = measure.kernel.expect("spectral measure has a kernel");
                    let summary =
                        self.spectrum(rs, kernel, params.temperature, pair_logits.as_ref())?;
                    let embedding = ecc_embed(&summary, params.ecc_threshold);
                    let computed = ecc_scores(&embedding);
                    if ecc_embedding.is_none() {
                        ecc_embedding = Some(embedding);
                    }
                    computed
                }
            };
            scores.push((measure, computed));
        }

        Ok(ScoredQuestion {
            question_id: rs.question_id.clone(),
            m: rs.m(),
            accuracy: rs.accuracy.clone(),
            scores,
            semantic_sets,
            ecc_embedding,
        })
    }
}
