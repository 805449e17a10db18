//! Uncertainty and confidence scoring for sampled black-box LLM responses.
//!
//! Given m sampled responses per question, this crate builds a pairwise
//! response-similarity graph (Jaccard, ROUGE-L, or NLI-derived kernels),
//! derives uncertainty scores U(x) and per-response confidence scores
//! C(x, s_j) from the graph's degree structure and normalized-Laplacian
//! spectrum, and evaluates those scores for selective generation with
//! AUROC, accuracy-rejection curves, and AUARC, including hyperparameter
//! calibration on held-out splits.

pub mod calibrate;
pub mod cli;
pub mod csvio;
pub mod eval;
pub mod ingest;
pub mod matrix;
pub mod measures;
pub mod nli;
pub mod score;
pub mod semantic_sets;
pub mod similarity;
pub mod spectral;
