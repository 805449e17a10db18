//! Selective-generation evaluation: expected accuracy, AUROC by rank
//! statistics, accuracy-rejection curves and their area, and the three
//! predictor/target pairings (U+EA, C+IA, U+IA).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::matrix::{mean, KahanSum};
use crate::measures::MeasureSpec;
use crate::score::ScoredQuestion;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("AUROC undefined: labels contain a single class")]
    SingleClassLabels,
    #[error("scores ({scores}) and labels ({labels}) differ in length")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("evaluation requires at least one question")]
    EmptyDataset,
    #[error("accuracy labels missing for questions: {}", question_ids.join(", "))]
    MissingAccuracy { question_ids: Vec<String> },
    #[error("per-response evaluation needs a uniform response count: question {question_id} has {got}, expected {expected}")]
    RaggedResponses {
        question_id: String,
        got: usize,
        expected: usize,
    },
    #[error("confidence cannot predict expected accuracy (C+EA is not a setting)")]
    InvalidSetting,
    #[error("questions were scored with different measure lists")]
    InconsistentMeasures,
}

/// What drives the rejection decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredictorKind {
    Uncertainty,
    Confidence,
}

/// What the predictor is asked to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetKind {
    ExpectedAccuracy,
    IndividualAccuracy,
}

/// A predictor/target pairing. C+EA is rejected: a per-response confidence
/// has no business predicting a question-level quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EvalSetting {
    predictor: PredictorKind,
    target: TargetKind,
}

impl EvalSetting {
    pub const U_EA: EvalSetting = EvalSetting {
        predictor: PredictorKind::Uncertainty,
        target: TargetKind::ExpectedAccuracy,
    };
    pub const C_IA: EvalSetting = EvalSetting {
        predictor: PredictorKind::Confidence,
        target: TargetKind::IndividualAccuracy,
    };
    pub const U_IA: EvalSetting = EvalSetting {
        predictor: PredictorKind::Uncertainty,
        target: TargetKind::IndividualAccuracy,
    };

    pub fn new(predictor: PredictorKind, target: TargetKind) -> Result<Self, EvalError> {
        if predictor == PredictorKind::Confidence && target == TargetKind::ExpectedAccuracy {
            return Err(EvalError::InvalidSetting);
        }
        Ok(Self { predictor, target })
    }

    pub fn predictor(&self) -> PredictorKind {
        self.predictor
    }

    pub fn target(&self) -> TargetKind {
        self.target
    }

    pub fn label(&self) -> &'static str {
        match (self.predictor, self.target) {
            (PredictorKind::Uncertainty, TargetKind::ExpectedAccuracy) => "U+EA",
            (PredictorKind::Confidence, TargetKind::IndividualAccuracy) => "C+IA",
            (PredictorKind::Uncertainty, TargetKind::IndividualAccuracy) => "U+IA",
            _ => unreachable!("constructor rejects C+EA"),
        }
    }
}

impl fmt::Display for EvalSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EvalSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "U+EA" => Ok(Self::U_EA),
            "C+IA" => Ok(Self::C_IA),
            "U+IA" => Ok(Self::U_IA),
            other => Err(format!(
                "unknown setting `{other}` (expected U+EA, C+IA, or U+IA)"
            )),
        }
    }
}

/// Monte Carlo estimate of a question's accuracy: the mean over its
/// per-response labels.
pub fn expected_accuracy(acc_row: &[f64]) -> f64 {
    mean(acc_row)
}

/// AUROC by the Mann-Whitney rank formulation with midranks for ties:
/// P(score_pos > score_neg) + ½·P(equal).
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClassLabels);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));

    // Midranks: tied scores share the mean of their 1-based positions.
    let mut rank = vec![0.0f64; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            rank[idx] = midrank;
        }
        i = j + 1;
    }

    let positive_rank_sum: f64 = rank
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(r, _)| r)
        .sum();
    let p = positives as f64;
    let u = positive_rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Accuracy-rejection curve: sort descending by predictor (ties broken by
/// original index, ascending) and report (kept fraction, mean target of the
/// kept prefix) for every prefix length.
pub fn arc_points(predictor: &[f64], targets: &[f64]) -> Vec<(f64, f64)> {
    assert_eq!(
        predictor.len(),
        targets.len(),
        "predictor/target length mismatch"
    );
    let n = predictor.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| predictor[j].total_cmp(&predictor[i]).then(i.cmp(&j)));
    let mut acc = KahanSum::new();
    let mut points = Vec::with_capacity(n);
    for (kept, &idx) in order.iter().enumerate() {
        acc.add(targets[idx]);
        points.push(((kept + 1) as f64 / n as f64, acc.value() / (kept + 1) as f64));
    }
    points
}

/// Area under the accuracy-rejection curve: the uniform mean of the curve's
/// per-prefix accuracies.
pub fn auarc(predictor: &[f64], targets: &[f64]) -> f64 {
    assert!(!predictor.is_empty(), "AUARC needs at least one sample");
    let points = arc_points(predictor, targets);
    mean(&points.iter().map(|(_, acc)| *acc).collect::<Vec<f64>>())
}

/// Accuracy of the most-confident response; ties pick the smallest index.
pub fn pick_best(confidences: &[f64], acc_row: &[f64]) -> f64 {
    assert!(!confidences.is_empty(), "pick_best needs at least one response");
    assert_eq!(confidences.len(), acc_row.len());
    let mut best = 0;
    for (j, &c) in confidences.iter().enumerate() {
        if c > confidences[best] {
            best = j;
        }
    }
    acc_row[best]
}

/// Evaluation results for one measure under one setting.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureEval {
    pub auroc: Option<f64>,
    pub auarc: f64,
    /// (keep_fraction, mean_accuracy) samples; for per-response settings the
    /// pointwise mean across the m per-generation curves.
    pub arc: Vec<(f64, f64)>,
}

/// Dataset-level evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub setting: EvalSetting,
    /// Accuracy with no rejection: the random-predictor reference.
    pub base_accuracy: f64,
    /// AUARC of the target used as its own predictor: the upper bound.
    pub oracle_auarc: f64,
    pub measures: Vec<(MeasureSpec, MeasureEval)>,
}

/// Evaluate every scored measure under `setting`.
///
/// Continuous accuracy labels are binarized at `correctness_cutoff`
/// (strictly greater) wherever a binary label is required, i.e. for AUROC.
/// Uncertainty-only measures keep their question-level behavior in C+IA:
/// their AUARC is the U+EA value and their AUROC the U+IA value.
pub fn evaluate(
    questions: &[ScoredQuestion],
    setting: EvalSetting,
    correctness_cutoff: f64,
) -> Result<EvalReport, EvalError> {
    if questions.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let missing: Vec<String> = questions
        .iter()
        .filter(|q| q.accuracy.is_none())
        .map(|q| q.question_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingAccuracy {
            question_ids: missing,
        });
    }
    let specs: Vec<MeasureSpec> = questions[0].scores.iter().map(|(s, _)| *s).collect();
    for q in questions {
        let qs: Vec<MeasureSpec> = q.scores.iter().map(|(s, _)| *s).collect();
        if qs != specs {
            return Err(EvalError::InconsistentMeasures);
        }
    }

    let ea: Vec<f64> = questions
        .iter()
        .map(|q| expected_accuracy(q.accuracy.as_ref().unwrap()))
        .collect();
    let base_accuracy = mean(&ea);

    let negated_u = |spec: MeasureSpec| -> Vec<f64> {
        questions
            .iter()
            .map(|q| -q.score(spec).unwrap().u)
            .collect()
    };

    match setting.target {
        TargetKind::ExpectedAccuracy => {
            let oracle_auarc = auarc(&ea, &ea);
            let measures = specs
                .iter()
                .map(|&spec| {
                    let predictor = negated_u(spec);
                    (
                        spec,
                        MeasureEval {
                            auroc: None,
                            auarc: auarc(&predictor, &ea),
                            arc: arc_points(&predictor, &ea),
                        },
                    )
                })
                .collect();
            Ok(EvalReport {
                setting,
                base_accuracy,
                oracle_auarc,
                measures,
            })
        }
        TargetKind::IndividualAccuracy => {
            let m = questions[0].m;
            for q in questions {
                if q.m != m {
                    return Err(EvalError::RaggedResponses {
                        question_id: q.question_id.clone(),
                        got: q.m,
                        expected: m,
                    });
                }
            }
            let acc_columns: Vec<Vec<f64>> = (0..m)
                .map(|j| {
                    questions
                        .iter()
                        .map(|q| q.accuracy.as_ref().unwrap()[j])
                        .collect()
                })
                .collect();
            let oracle_auarc = mean(
                &acc_columns
                    .iter()
                    .map(|col| auarc(col, col))
                    .collect::<Vec<f64>>(),
            );

            let mut measures = Vec::with_capacity(specs.len());
            for &spec in &specs {
                // Per-response confidence drives the prediction only where
                // the scores actually carry it; everything else falls back
                // to the question-level uncertainty.
                let confidence_based = setting.predictor == PredictorKind::Confidence
                    && spec.has_confidence()
                    && questions.iter().all(|q| q.score(spec).unwrap().c.is_some());
                let eval = if confidence_based {
                    let predictor_columns: Vec<Vec<f64>> = (0..m)
                        .map(|j| {
                            questions
                                .iter()
                                .map(|q| q.score(spec).unwrap().c.as_ref().unwrap()[j])
                                .collect()
                        })
                        .collect();
                    per_generation_eval(&predictor_columns, &acc_columns, correctness_cutoff)
                } else {
                    let u = negated_u(spec);
                    let predictor_columns: Vec<Vec<f64>> = (0..m).map(|_| u.clone()).collect();
                    let mut eval =
                        per_generation_eval(&predictor_columns, &acc_columns, correctness_cutoff);
                    if setting.predictor == PredictorKind::Confidence {
                        // Uncertainty-only measure in the confidence table:
                        // its AUARC stays the question-level U+EA value.
                        eval.auarc = auarc(&u, &ea);
                        eval.arc = arc_points(&u, &ea);
                    }
                    eval
                };
                measures.push((spec, eval));
            }
            Ok(EvalReport {
                setting,
                base_accuracy,
                oracle_auarc,
                measures,
            })
        }
    }
}

/// AUROC/AUARC averaged over the m per-generation columns, with the ARC
/// curves averaged pointwise. Columns whose binarized labels are
/// single-class carry no AUROC information and drop out of that mean; the
/// AUROC is None when every column is degenerate.
fn per_generation_eval(
    predictor_columns: &[Vec<f64>],
    acc_columns: &[Vec<f64>],
    cutoff: f64,
) -> MeasureEval {
    let m = predictor_columns.len();
    let n = acc_columns[0].len();
    let mut aurocs = Vec::new();
    let mut auarc_acc = KahanSum::new();
    let mut arc_sums = vec![KahanSum::new(); n];
    for j in 0..m {
        let labels: Vec<bool> = acc_columns[j].iter().map(|&a| a > cutoff).collect();
        if let Ok(value) = auroc(&predictor_columns[j], &labels) {
            aurocs.push(value);
        }
        auarc_acc.add(auarc(&predictor_columns[j], &acc_columns[j]));
        for (slot, (_, acc)) in arc_sums
            .iter_mut()
            .zip(arc_points(&predictor_columns[j], &acc_columns[j]))
        {
            slot.add(acc);
        }
    }
    let arc = (0..n)
        .map(|i| ((i + 1) as f64 / n as f64, arc_sums[i].value() / m as f64))
        .collect();
    MeasureEval {
        auroc: if aurocs.is_empty() {
            None
        } else {
            Some(mean(&aurocs))
        },
        auarc: auarc_acc.value() / m as f64,
        arc,
    }
}
