//! Hyperparameter selection on calibration splits and repeated-trial
//! aggregation.
//!
//! Each trial draws a calibration subset, picks one hyperparameter point per
//! measure by maximizing the objective on that subset alone, then reports the
//! test-split metric under the chosen point. Grid search only ever sees
//! calibration records; the test split enters after selection.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::eval::{evaluate, EvalError, EvalSetting, TargetKind};
use crate::ingest::{split_trials, IngestError, ResponseSet};
use crate::matrix::mean;
use crate::measures::MeasureSpec;
use crate::score::{HyperParams, QuestionScorer, ScoreError, ScoredQuestion};
use crate::spectral::MeasureKind;

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error("grid search requires a non-empty calibration set")]
    EmptyCalibration,
    #[error("hyperparameter grid must not be empty")]
    EmptyGrid,
    #[error("Ecc threshold {0} is outside (0, 1)")]
    ThresholdOutOfRange(f64),
    #[error("temperature {0} is not positive")]
    TemperatureOutOfRange(f64),
    #[error("AUROC objective needs an individual-accuracy setting; {measure} was evaluated under {setting}")]
    AurocNeedsBinaryTarget {
        measure: MeasureSpec,
        setting: EvalSetting,
    },
    #[error("AUROC objective undefined on this calibration set (single-class labels)")]
    DegenerateObjective,
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Which metric grid search maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Auarc,
    Auroc,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Auarc => "auarc",
            Objective::Auroc => "auroc",
        })
    }
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auarc" => Ok(Objective::Auarc),
            "auroc" => Ok(Objective::Auroc),
            other => Err(format!("unknown objective `{other}`")),
        }
    }
}

/// Search grid plus the objective it optimizes. `setting: None` evaluates
/// each measure in its native setting: C+IA for the confidence-capable
/// measures (Deg, Ecc), U+EA for the uncertainty-only ones.
#[derive(Debug, Clone)]
pub struct HyperGrid {
    pub temperatures: Vec<f64>,
    pub ecc_thresholds: Vec<f64>,
    pub objective: Objective,
    pub setting: Option<EvalSetting>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            temperatures: vec![0.1, 0.25, 0.5, 1.0, 3.0, 5.0, 7.0],
            ecc_thresholds: vec![0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            objective: Objective::Auarc,
            setting: None,
        }
    }
}

impl HyperGrid {
    pub fn validate(&self) -> Result<(), CalibrateError> {
        if self.temperatures.is_empty() || self.ecc_thresholds.is_empty() {
            return Err(CalibrateError::EmptyGrid);
        }
        for &t in &self.temperatures {
            if !t.is_finite() || t <= 0.0 {
                return Err(CalibrateError::TemperatureOutOfRange(t));
            }
        }
        for &t in &self.ecc_thresholds {
            if t.is_nan() || t <= 0.0 || t >= 1.0 {
                return Err(CalibrateError::ThresholdOutOfRange(t));
            }
        }
        Ok(())
    }
}

/// The measure's own evaluation setting.
pub fn native_setting(measure: MeasureSpec) -> EvalSetting {
    match measure.kind {
        MeasureKind::Deg | MeasureKind::Ecc => EvalSetting::C_IA,
        _ => EvalSetting::U_EA,
    }
}

/// Hyperparameters chosen for one measure, with the calibration objective
/// they achieved. Fields are `None` when the measure has no such knob.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChosenParams {
    pub temperature: Option<f64>,
    pub ecc_threshold: Option<f64>,
    pub objective_value: f64,
}

impl ChosenParams {
    /// Concrete scoring parameters, with defaults filling the absent knobs.
    pub fn hyper_params(&self, defaults: HyperParams) -> HyperParams {
        HyperParams {
            temperature: self.temperature.unwrap_or(defaults.temperature),
            ecc_threshold: self.ecc_threshold.unwrap_or(defaults.ecc_threshold),
        }
    }
}

fn objective_value(
    questions: &[ScoredQuestion],
    measure: MeasureSpec,
    setting: EvalSetting,
    objective: Objective,
    cutoff: f64,
) -> Result<f64, CalibrateError> {
    if objective == Objective::Auroc && setting.target() == TargetKind::ExpectedAccuracy {
        return Err(CalibrateError::AurocNeedsBinaryTarget { measure, setting });
    }
    let report = evaluate(questions, setting, cutoff)?;
    let (_, eval) = report
        .measures
        .iter()
        .find(|(spec, _)| *spec == measure)
        .expect("measure was scored");
    match objective {
        Objective::Auarc => Ok(eval.auarc),
        Objective::Auroc => eval.auroc.ok_or(CalibrateError::DegenerateObjective),
    }
}

/// Grid points for one measure, in tie-break order: temperatures outermost,
/// thresholds innermost, exactly as listed in the grid. Measures without a
/// knob get a single point carrying the defaults.
fn grid_points(measure: MeasureSpec, grid: &HyperGrid, defaults: HyperParams) -> Vec<HyperParams> {
    let temperatures: Vec<f64> = if measure.has_temperature() {
        grid.temperatures.clone()
    } else {
        vec![defaults.temperature]
    };
    let thresholds: Vec<f64> = if measure.has_threshold() {
        grid.ecc_thresholds.clone()
    } else {
        vec![defaults.ecc_threshold]
    };
    let mut points = Vec::with_capacity(temperatures.len() * thresholds.len());
    for &temperature in &temperatures {
        for &ecc_threshold in &thresholds {
            points.push(HyperParams {
                temperature,
                ecc_threshold,
            });
        }
    }
    points
}

/// Pick the best grid point per measure on the calibration set. Ties go to
/// the earliest grid point.
pub fn grid_search(
    calibration: &[ResponseSet],
    measures: &[MeasureSpec],
    grid: &HyperGrid,
    scorer: &dyn QuestionScorer,
    cutoff: f64,
) -> Result<Vec<(MeasureSpec, ChosenParams)>, CalibrateError> {
    grid.validate()?;
    if calibration.is_empty() {
        return Err(CalibrateError::EmptyCalibration);
    }
    let defaults = HyperParams::default();
    let mut chosen = Vec::with_capacity(measures.len());
    for &measure in measures {
        let setting = grid.setting.unwrap_or_else(|| native_setting(measure));
        let mut best: Option<(HyperParams, f64)> = None;
        for params in grid_points(measure, grid, defaults) {
            let scored = score_all(calibration, &[measure], &params, scorer)?;
            let value = objective_value(&scored, measure, setting, grid.objective, cutoff)?;
            if best.as_ref().is_none_or(|(_, b)| value > *b) {
                best = Some((params, value));
            }
        }
        let (params, objective_value) = best.expect("grid is non-empty");
        chosen.push((
            measure,
            ChosenParams {
                temperature: measure.has_temperature().then_some(params.temperature),
                ecc_threshold: measure.has_threshold().then_some(params.ecc_threshold),
                objective_value,
            },
        ));
    }
    Ok(chosen)
}

fn score_all(
    questions: &[ResponseSet],
    measures: &[MeasureSpec],
    params: &HyperParams,
    scorer: &dyn QuestionScorer,
) -> Result<Vec<ScoredQuestion>, ScoreError> {
    questions
        .iter()
        .map(|rs| scorer.score_question(rs, measures, params))
        .collect()
}

/// One measure's outcome in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial_index: u64,
    pub chosen: ChosenParams,
    /// Objective metric on the test split under the chosen parameters.
    pub test_metric: f64,
}

/// Per-measure aggregation over all trials.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTrials {
    pub measure: MeasureSpec,
    pub setting: EvalSetting,
    pub objective: Objective,
    pub outcomes: Vec<TrialOutcome>,
    pub mean: f64,
    /// Population standard deviation across trials.
    pub std: f64,
}

/// Results of the full repeated-trials protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub trials: usize,
    pub calib_size: usize,
    pub seed: u64,
    pub measures: Vec<MeasureTrials>,
}

/// Run the repeated-trials protocol: split, calibrate on the calibration
/// half, evaluate on the test half, and aggregate mean ± population std per
/// measure.
#[allow(clippy::too_many_arguments)]
pub fn run_trials(
    dataset: &[ResponseSet],
    measures: &[MeasureSpec],
    grid: &HyperGrid,
    trials: usize,
    calib_size: usize,
    seed: u64,
    scorer: &(dyn QuestionScorer + Sync),
    cutoff: f64,
) -> Result<TrialSummary, CalibrateError> {
    grid.validate()?;
    let splits = split_trials(dataset, calib_size, trials, seed)?;
    let per_trial: Vec<Vec<(MeasureSpec, ChosenParams, f64)>> = splits
        .par_iter()
        .map(|split| {
            let chosen = grid_search(&split.calibration, measures, grid, scorer, cutoff)?;
            let mut results = Vec::with_capacity(chosen.len());
            for (measure, params) in chosen {
                let setting = grid.setting.unwrap_or_else(|| native_setting(measure));
                let scored = score_all(
                    &split.test,
                    &[measure],
                    &params.hyper_params(HyperParams::default()),
                    scorer,
                )?;
                let metric =
                    objective_value(&scored, measure, setting, grid.objective, cutoff)?;
                results.push((measure, params, metric));
            }
            Ok(results)
        })
        .collect::<Result<_, CalibrateError>>()?;

    let measures_out = measures
        .iter()
        .map(|&measure| {
            let outcomes: Vec<TrialOutcome> = per_trial
                .iter()
                .enumerate()
                .map(|(trial, results)| {
                    let (_, chosen, test_metric) = results
                        .iter()
                        .find(|(m, _, _)| *m == measure)
                        .expect("every trial covers every measure");
                    TrialOutcome {
                        trial_index: trial as u64,
                        chosen: *chosen,
                        test_metric: *test_metric,
                    }
                })
                .collect();
            let values: Vec<f64> = outcomes.iter().map(|o| o.test_metric).collect();
            let mean_value = mean(&values);
            let variance = mean(
                &values
                    .iter()
                    .map(|v| (v - mean_value) * (v - mean_value))
                    .collect::<Vec<f64>>(),
            );
            MeasureTrials {
                measure,
                setting: grid.setting.unwrap_or_else(|| native_setting(measure)),
                objective: grid.objective,
                outcomes,
                mean: mean_value,
                std: variance.sqrt(),
            }
        })
        .collect();

    Ok(TrialSummary {
        trials,
        calib_size,
        seed,
        measures: measures_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::SimilarityKernel;
    use crate::spectral::MeasureScores;

    /// Scorer whose uncertainty depends on the question's expected accuracy
    /// and the temperature in a controlled way: perfectly informative at
    /// T = 1, perfectly misleading elsewhere.
    struct TemperatureSensitive;

    impl QuestionScorer for TemperatureSensitive {
        fn score_question(
            &self,
            rs: &ResponseSet,
            measures: &[MeasureSpec],
            params: &HyperParams,
        ) -> Result<ScoredQuestion, ScoreError> {
            let ea = crate::eval::expected_accuracy(rs.accuracy.as_ref().unwrap());
            let at_one = (params.temperature - 1.0).abs() < 1e-12;
            let u = if at_one { 1.0 - ea } else { ea };
            Ok(ScoredQuestion {
                question_id: rs.question_id.clone(),
                m: rs.m(),
                accuracy: rs.accuracy.clone(),
                scores: measures
                    .iter()
                    .map(|&m| {
                        (
                            m,
                            MeasureScores {
                                measure: m.kind,
                                u,
                                c: None,
                            },
                        )
                    })
                    .collect(),
                semantic_sets: None,
                ecc_embedding: None,
            })
        }
    }

    /// Scorer with a constant uncertainty: every grid point ties.
    struct Constant;

    impl QuestionScorer for Constant {
        fn score_question(
            &self,
            rs: &ResponseSet,
            measures: &[MeasureSpec],
            _params: &HyperParams,
        ) -> Result<ScoredQuestion, ScoreError> {
            Ok(ScoredQuestion {
                question_id: rs.question_id.clone(),
                m: rs.m(),
                accuracy: rs.accuracy.clone(),
                scores: measures
                    .iter()
                    .map(|&m| {
                        (
                            m,
                            MeasureScores {
                                measure: m.kind,
                                u: 0.5,
                                c: None,
                            },
                        )
                    })
                    .collect(),
                semantic_sets: None,
                ecc_embedding: None,
            })
        }
    }

    fn dataset(n: usize) -> Vec<ResponseSet> {
        (0..n)
            .map(|i| {
                let correct = i % 5;
                ResponseSet {
                    question_id: format!("q{i}"),
                    question: format!("question {i}"),
                    reference_answer: None,
                    responses: (0..4).map(|j| format!("answer {j}")).collect(),
                    accuracy: Some(
                        (0..4)
                            .map(|j| if j <= correct % 4 { 1.0 } else { 0.0 })
                            .collect(),
                    ),
                }
            })
            .collect()
    }

    fn eigv_e() -> MeasureSpec {
        MeasureSpec::spectral(MeasureKind::EigV, SimilarityKernel::NliEntail)
    }

    #[test]
    fn single_point_grid_is_chosen() {
        let grid = HyperGrid {
            temperatures: vec![3.0],
            ecc_thresholds: vec![0.5],
            ..HyperGrid::default()
        };
        let chosen = grid_search(&dataset(10), &[eigv_e()], &grid, &Constant, 0.7).unwrap();
        assert_eq!(chosen[0].1.temperature, Some(3.0));
        assert_eq!(chosen[0].1.ecc_threshold, None);
    }

    #[test]
    fn constant_objective_ties_break_to_first_grid_point() {
        let grid = HyperGrid::default();
        let chosen = grid_search(&dataset(10), &[eigv_e()], &grid, &Constant, 0.7).unwrap();
        assert_eq!(chosen[0].1.temperature, Some(0.1));
        let ecc = MeasureSpec::spectral(MeasureKind::Ecc, SimilarityKernel::NliEntail);
        let chosen = grid_search(&dataset(10), &[ecc], &grid, &Constant, 0.7).unwrap();
        assert_eq!(chosen[0].1.temperature, Some(0.1));
        assert_eq!(chosen[0].1.ecc_threshold, Some(0.4));
    }

    #[test]
    fn dominant_temperature_is_selected() {
        let chosen = grid_search(
            &dataset(20),
            &[eigv_e()],
            &HyperGrid::default(),
            &TemperatureSensitive,
            0.7,
        )
        .unwrap();
        assert_eq!(chosen[0].1.temperature, Some(1.0));
    }

    #[test]
    fn empty_calibration_is_an_error() {
        assert!(matches!(
            grid_search(&[], &[eigv_e()], &HyperGrid::default(), &Constant, 0.7),
            Err(CalibrateError::EmptyCalibration)
        ));
    }

    #[test]
    fn grid_validation() {
        let grid = HyperGrid {
            ecc_thresholds: vec![1.0],
            ..HyperGrid::default()
        };
        assert!(matches!(
            grid.validate(),
            Err(CalibrateError::ThresholdOutOfRange(_))
        ));
        let grid = HyperGrid {
            temperatures: Vec::new(),
            ..HyperGrid::default()
        };
        assert!(matches!(grid.validate(), Err(CalibrateError::EmptyGrid)));
    }

    #[test]
    fn superset_grid_never_scores_worse() {
        let narrow = HyperGrid {
            temperatures: vec![0.25, 5.0],
            ..HyperGrid::default()
        };
        let wide = HyperGrid {
            temperatures: vec![0.25, 0.5, 1.0, 5.0],
            ..HyperGrid::default()
        };
        let data = dataset(20);
        let a = grid_search(&data, &[eigv_e()], &narrow, &TemperatureSensitive, 0.7).unwrap();
        let b = grid_search(&data, &[eigv_e()], &wide, &TemperatureSensitive, 0.7).unwrap();
        assert!(b[0].1.objective_value >= a[0].1.objective_value);
    }

    #[test]
    fn auroc_objective_rejects_expected_accuracy_target() {
        let grid = HyperGrid {
            objective: Objective::Auroc,
            setting: Some(EvalSetting::U_EA),
            ..HyperGrid::default()
        };
        assert!(matches!(
            grid_search(&dataset(10), &[eigv_e()], &grid, &Constant, 0.7),
            Err(CalibrateError::AurocNeedsBinaryTarget { .. })
        ));
    }

    #[test]
    fn identical_questions_give_zero_std() {
        // Every question has the same accuracy row, so any test split's
        // AUARC equals the common expected accuracy.
        let data: Vec<ResponseSet> = (0..12)
            .map(|i| ResponseSet {
                question_id: format!("q{i}"),
                question: "same".into(),
                reference_answer: None,
                responses: vec!["a".into(), "b".into()],
                accuracy: Some(vec![1.0, 0.0]),
            })
            .collect();
        let summary = run_trials(
            &data,
            &[eigv_e()],
            &HyperGrid::default(),
            3,
            4,
            9,
            &Constant,
            0.7,
        )
        .unwrap();
        let m = &summary.measures[0];
        assert_eq!(m.std, 0.0);
        assert_eq!(m.mean, 0.5);
        assert_eq!(m.outcomes.len(), 3);
    }

    #[test]
    fn run_trials_is_deterministic() {
        let data = dataset(25);
        let grid = HyperGrid::default();
        let a = run_trials(&data, &[eigv_e()], &grid, 4, 6, 11, &TemperatureSensitive, 0.7)
            .unwrap();
        let b = run_trials(&data, &[eigv_e()], &grid, 4, 6, 11, &TemperatureSensitive, 0.7)
            .unwrap();
        assert_eq!(a, b);
        let c = run_trials(&data, &[eigv_e()], &grid, 4, 6, 12, &TemperatureSensitive, 0.7)
            .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn trial_mean_lies_within_trial_range() {
        let data = dataset(30);
        let summary = run_trials(
            &data,
            &[eigv_e()],
            &HyperGrid::default(),
            5,
            8,
            3,
            &TemperatureSensitive,
            0.7,
        )
        .unwrap();
        let m = &summary.measures[0];
        let min = m
            .outcomes
            .iter()
            .map(|o| o.test_metric)
            .fold(f64::INFINITY, f64::min);
        let max = m
            .outcomes
            .iter()
            .map(|o| o.test_metric)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(m.mean >= min && m.mean <= max);
    }
}
