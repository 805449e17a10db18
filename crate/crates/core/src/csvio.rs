//! CSV emission and parsing for every file the CLI produces.
//!
//! Floats are serialized with 17 significant digits, which is enough for
//! every `f64` to survive a write/parse round trip bit-exactly; each writer
//! here has a matching reader that proves it.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::calibrate::TrialSummary;
use crate::eval::EvalReport;
use crate::score::ScoredQuestion;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Malformed {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path} record {record}: {message}")]
    Field {
        path: String,
        record: usize,
        message: String,
    },
}

/// 17 significant digits: the round-trip-exact representation of an `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_float(path: &str, record: usize, s: &str) -> Result<f64, CsvError> {
    s.parse::<f64>().map_err(|_| CsvError::Field {
        path: path.to_string(),
        record,
        message: format!("bad float `{s}`"),
    })
}

fn parse_usize(path: &str, record: usize, s: &str) -> Result<usize, CsvError> {
    s.parse::<usize>().map_err(|_| CsvError::Field {
        path: path.to_string(),
        record,
        message: format!("bad integer `{s}`"),
    })
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>, CsvError> {
    let file = File::open(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn write_all(path: &Path, rows: Vec<Vec<String>>) -> Result<(), CsvError> {
    let io_err = |source| CsvError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut buffer = Vec::new();
    {
        let mut writer = csv::Writer::from_writer(&mut buffer);
        for row in rows {
            writer.write_record(&row).map_err(|source| CsvError::Malformed {
                path: path.display().to_string(),
                source,
            })?;
        }
        writer.flush().map_err(io_err)?;
    }
    let mut file = File::create(path).map_err(io_err)?;
    file.write_all(&buffer).map_err(io_err)?;
    Ok(())
}

/// One row of the score CSV: a question-level U value or a per-response C
/// value (with its semantic set id when the partition was computed).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub question_id: String,
    pub measure: String,
    pub score_type: char,
    pub response_index: Option<usize>,
    pub value: f64,
    pub semantic_set_id: Option<usize>,
}

/// Write per-question scores: one `U` row per measure, one `C` row per
/// (measure, response) where the measure defines confidences.
pub fn write_scores(path: &Path, questions: &[ScoredQuestion]) -> Result<(), CsvError> {
    let mut rows = vec![vec![
        "question_id".to_string(),
        "measure".to_string(),
        "score_type".to_string(),
        "response_index".to_string(),
        "value".to_string(),
        "semantic_set_id".to_string(),
    ]];
    for q in questions {
        for (spec, scores) in &q.scores {
            rows.push(vec![
                q.question_id.clone(),
                spec.to_string(),
                "U".to_string(),
                String::new(),
                format_float(scores.u),
                String::new(),
            ]);
            if let Some(c) = &scores.c {
                for (j, &value) in c.iter().enumerate() {
                    let set_id = q
                        .semantic_sets
                        .as_ref()
                        .map(|p| p.assignment[j].to_string())
                        .unwrap_or_default();
                    rows.push(vec![
                        q.question_id.clone(),
                        spec.to_string(),
                        "C".to_string(),
                        j.to_string(),
                        format_float(value),
                        set_id,
                    ]);
                }
            }
        }
    }
    write_all(path, rows)
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>, CsvError> {
    let display = path.display().to_string();
    let mut out = Vec::new();
    for (i, record) in open_reader(path)?.records().enumerate() {
        let record = record.map_err(|source| CsvError::Malformed {
            path: display.clone(),
            source,
        })?;
        let field = |idx: usize| record.get(idx).unwrap_or_default().to_string();
        out.push(ScoreRow {
            question_id: field(0),
            measure: field(1),
            score_type: field(2).chars().next().ok_or_else(|| CsvError::Field {
                path: display.clone(),
                record: i,
                message: "empty score_type".into(),
            })?,
            response_index: match field(3).as_str() {
                "" => None,
                s => Some(parse_usize(&display, i, s)?),
            },
            value: parse_float(&display, i, &field(4))?,
            semantic_set_id: match field(5).as_str() {
                "" => None,
                s => Some(parse_usize(&display, i, s)?),
            },
        });
    }
    Ok(out)
}

/// One row of the evaluation report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub measure: String,
    pub setting: String,
    pub auroc: Option<f64>,
    pub auarc: f64,
    pub trial_mean: f64,
    pub trial_std: f64,
}

/// Append-style report writer: one Random row, one Oracle row, then one row
/// per measure, for each evaluated setting.
pub fn write_report(path: &Path, reports: &[EvalReport]) -> Result<(), CsvError> {
    let mut rows = vec![vec![
        "measure".to_string(),
        "setting".to_string(),
        "auroc".to_string(),
        "auarc".to_string(),
        "trial_mean".to_string(),
        "trial_std".to_string(),
    ]];
    let mut push = |measure: &str, setting: &str, auroc: Option<f64>, auarc: f64| {
        rows.push(vec![
            measure.to_string(),
            setting.to_string(),
            auroc.map(format_float).unwrap_or_default(),
            format_float(auarc),
            format_float(auarc),
            format_float(0.0),
        ]);
    };
    for report in reports {
        let setting = report.setting.label();
        push("Random", setting, None, report.base_accuracy);
        push("Oracle", setting, None, report.oracle_auarc);
        for (spec, eval) in &report.measures {
            push(&spec.to_string(), setting, eval.auroc, eval.auarc);
        }
    }
    write_all(path, rows)
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>, CsvError> {
    let display = path.display().to_string();
    let mut out = Vec::new();
    for (i, record) in open_reader(path)?.records().enumerate() {
        let record = record.map_err(|source| CsvError::Malformed {
            path: display.clone(),
            source,
        })?;
        let field = |idx: usize| record.get(idx).unwrap_or_default().to_string();
        out.push(ReportRow {
            measure: field(0),
            setting: field(1),
            auroc: match field(2).as_str() {
                "" => None,
                s => Some(parse_float(&display, i, s)?),
            },
            auarc: parse_float(&display, i, &field(3))?,
            trial_mean: parse_float(&display, i, &field(4))?,
            trial_std: parse_float(&display, i, &field(5))?,
        });
    }
    Ok(out)
}

/// One accuracy-rejection curve sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcRow {
    pub measure: String,
    pub keep_fraction: f64,
    pub mean_accuracy: f64,
}

/// ARC samples for external plotting: every measure's curve under one
/// setting.
pub fn write_arc(path: &Path, report: &EvalReport) -> Result<(), CsvError> {
    let mut rows = vec![vec![
        "measure".to_string(),
        "keep_fraction".to_string(),
        "mean_accuracy".to_string(),
    ]];
    for (spec, eval) in &report.measures {
        for &(keep_fraction, mean_accuracy) in &eval.arc {
            rows.push(vec![
                spec.to_string(),
                format_float(keep_fraction),
                format_float(mean_accuracy),
            ]);
        }
    }
    write_all(path, rows)
}

pub fn read_arc(path: &Path) -> Result<Vec<ArcRow>, CsvError> {
    let display = path.display().to_string();
    let mut out = Vec::new();
    for (i, record) in open_reader(path)?.records().enumerate() {
        let record = record.map_err(|source| CsvError::Malformed {
            path: display.clone(),
            source,
        })?;
        let field = |idx: usize| record.get(idx).unwrap_or_default().to_string();
        out.push(ArcRow {
            measure: field(0),
            keep_fraction: parse_float(&display, i, &field(1))?,
            mean_accuracy: parse_float(&display, i, &field(2))?,
        });
    }
    Ok(out)
}

/// One spectral-embedding coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub question_id: String,
    pub response_index: usize,
    pub dim: usize,
    pub value: f64,
}

/// Raw Ecc embedding coordinates, for external 2-D projection.
pub fn write_embeddings(path: &Path, questions: &[ScoredQuestion]) -> Result<(), CsvError> {
    let mut rows = vec![vec![
        "question_id".to_string(),
        "response_index".to_string(),
        "dim".to_string(),
        "value".to_string(),
    ]];
    for q in questions {
        if let Some(embedding) = &q.ecc_embedding {
            for (j, coords) in embedding.coords.iter().enumerate() {
                for (dim, &value) in coords.iter().enumerate() {
                    rows.push(vec![
                        q.question_id.clone(),
                        j.to_string(),
                        dim.to_string(),
                        format_float(value),
                    ]);
                }
            }
        }
    }
    write_all(path, rows)
}

pub fn read_embeddings(path: &Path) -> Result<Vec<EmbeddingRow>, CsvError> {
    let display = path.display().to_string();
    let mut out = Vec::new();
    for (i, record) in open_reader(path)?.records().enumerate() {
        let record = record.map_err(|source| CsvError::Malformed {
            path: display.clone(),
            source,
        })?;
        let field = |idx: usize| record.get(idx).unwrap_or_default().to_string();
        out.push(EmbeddingRow {
            question_id: field(0),
            response_index: parse_usize(&display, i, &field(1))?,
            dim: parse_usize(&display, i, &field(2))?,
            value: parse_float(&display, i, &field(3))?,
        });
    }
    Ok(out)
}

/// One row of the calibration trial log.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub measure: String,
    pub setting: String,
    pub objective: String,
    pub trial_index: Option<u64>,
    pub temperature: Option<f64>,
    pub ecc_threshold: Option<f64>,
    pub calibration_objective: Option<f64>,
    pub test_metric: Option<f64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

/// Trial-by-trial calibration results plus one summary row per measure
/// (trial_index empty, mean/std filled).
pub fn write_calibration(path: &Path, summary: &TrialSummary) -> Result<(), CsvError> {
    let mut rows = vec![vec![
        "measure".to_string(),
        "setting".to_string(),
        "objective".to_string(),
        "trial_index".to_string(),
        "temperature".to_string(),
        "ecc_threshold".to_string(),
        "calibration_objective".to_string(),
        "test_metric".to_string(),
        "mean".to_string(),
        "std".to_string(),
    ]];
    for measure in &summary.measures {
        for outcome in &measure.outcomes {
            rows.push(vec![
                measure.measure.to_string(),
                measure.setting.label().to_string(),
                measure.objective.to_string(),
                outcome.trial_index.to_string(),
                outcome.chosen.temperature.map(format_float).unwrap_or_default(),
                outcome
                    .chosen
                    .ecc_threshold
                    .map(format_float)
                    .unwrap_or_default(),
                format_float(outcome.chosen.objective_value),
                format_float(outcome.test_metric),
                String::new(),
                String::new(),
            ]);
        }
        rows.push(vec![
            measure.measure.to_string(),
            measure.setting.label().to_string(),
            measure.objective.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            format_float(measure.mean),
            format_float(measure.std),
        ]);
    }
    write_all(path, rows)
}

pub fn read_calibration(path: &Path) -> Result<Vec<CalibrationRow>, CsvError> {
    let display = path.display().to_string();
    let mut out = Vec::new();
    for (i, record) in open_reader(path)?.records().enumerate() {
        let record = record.map_err(|source| CsvError::Malformed {
            path: display.clone(),
            source,
        })?;
        let field = |idx: usize| record.get(idx).unwrap_or_default().to_string();
        let opt_float = |idx: usize, i: usize| -> Result<Option<f64>, CsvError> {
            match field(idx).as_str() {
                "" => Ok(None),
                s => Ok(Some(parse_float(&display, i, s)?)),
            }
        };
        out.push(CalibrationRow {
            measure: field(0),
            setting: field(1),
            objective: field(2),
            trial_index: match field(3).as_str() {
                "" => None,
                s => Some(parse_usize(&display, i, s)? as u64),
            },
            temperature: opt_float(4, i)?,
            ecc_threshold: opt_float(5, i)?,
            calibration_objective: opt_float(6, i)?,
            test_metric: opt_float(7, i)?,
            mean: opt_float(8, i)?,
            std: opt_float(9, i)?,
        });
    }
    Ok(out)
}

/// Read a whole file as bytes (for byte-determinism checks).
pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CsvError> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|source| CsvError::Io {
            path: path.display().to_string(),
            source,
        })?;
    Ok(buf)
}
