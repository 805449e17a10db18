//! Command implementations behind the binary: score, evaluate, calibrate,
//! and cache-nli, plus configuration validation and exit-code mapping.
//!
//! Outputs are byte-deterministic for a fixed (dataset, config, warm cache,
//! seed): questions are processed by a worker pool but collected in input
//! order, and every float is serialized with a fixed 17-digit format.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::calibrate::{run_trials, CalibrateError, HyperGrid};
use crate::csvio::{self, CsvError};
use crate::eval::{evaluate, EvalError, EvalSetting};
use crate::ingest::{load_dataset, IngestError, ResponseSet};
use crate::measures::MeasureSpec;
use crate::nli::{ClassOrder, NliCache, NliClient, NliEndpointConfig, NliError};
use crate::score::{HyperParams, QuestionScorer, ScoreError, ScoredQuestion, ScoringPipeline};
use crate::spectral::MeasureKind;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
    #[error(transparent)]
    Nli(#[from] NliError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("failed to create {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Exit codes: 0 success, 1 validation problems (bad flags, malformed or
/// unlabeled data), 2 runtime failures (endpoint, solver, output IO).
impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::InvalidConfig(_) | CliError::Ingest(_) | CliError::Eval(_) => 1,
            CliError::Calibrate(e) => match e {
                CalibrateError::Score(_) => 2,
                CalibrateError::Eval(_) | CalibrateError::Ingest(_) => 1,
                _ => 1,
            },
            CliError::Score(_) | CliError::Nli(_) | CliError::Csv(_) | CliError::Io { .. } => 2,
        }
    }
}

/// Settings shared by all subcommands.
#[derive(Debug, Clone)]
pub struct CommonConfig {
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    pub measures: Vec<MeasureSpec>,
    pub nli_url: Option<String>,
    pub nli_class_order: ClassOrder,
    pub cache_dir: Option<PathBuf>,
    pub params: HyperParams,
    pub workers: Option<usize>,
    pub num_generations: Option<usize>,
    pub correctness_cutoff: f64,
    pub seed: u64,
}

impl CommonConfig {
    fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.out_dir.clone())
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.measures.is_empty() {
            return Err(CliError::InvalidConfig("no measures selected".into()));
        }
        if self
            .measures
            .iter()
            .any(|m| m.kernel == Some(crate::similarity::SimilarityKernel::RougeL))
        {
            return Err(CliError::InvalidConfig(
                "the rouge_l kernel backs LexiSim only; spectral measures take jaccard, nli_entail, or nli_contra".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.correctness_cutoff) {
            return Err(CliError::InvalidConfig(format!(
                "correctness cutoff {} is outside [0, 1]",
                self.correctness_cutoff
            )));
        }
        if !self.params.temperature.is_finite() || self.params.temperature <= 0.0 {
            return Err(CliError::InvalidConfig(format!(
                "NLI temperature {} is not positive",
                self.params.temperature
            )));
        }
        if self.measures.iter().any(|m| m.needs_nli()) && self.nli_url.is_none() {
            let cache_file = crate::nli::cache_file_path(&self.cache_dir());
            let warm = cache_file
                .metadata()
                .map(|m| m.len() > 0)
                .unwrap_or(false);
            if !warm {
                return Err(CliError::InvalidConfig(format!(
                    "NLI-kernel measures need --nli-url (or NLI_ENDPOINT_URL) or a warm cache; {} is missing or empty",
                    cache_file.display()
                )));
            }
        }
        Ok(())
    }

    fn load(&self) -> Result<Vec<ResponseSet>, CliError> {
        let mut dataset = load_dataset(&self.dataset)?;
        if let Some(m) = self.num_generations {
            if m < 2 {
                return Err(CliError::InvalidConfig(format!(
                    "--num-generations must be at least 2 (got {m})"
                )));
            }
            dataset = dataset.into_iter().map(|rs| rs.truncated(m)).collect();
        }
        Ok(dataset)
    }

    fn nli_client(&self) -> Result<Option<Arc<NliClient>>, CliError> {
        if !self.measures.iter().any(|m| m.needs_nli()) && self.nli_url.is_none() {
            return Ok(None);
        }
        let cache = NliCache::open(&self.cache_dir())?;
        let endpoint = self.nli_url.as_ref().map(|url| {
            let mut cfg = NliEndpointConfig::new(url.clone());
            cfg.class_order = self.nli_class_order;
            cfg
        });
        Ok(Some(Arc::new(NliClient::new(endpoint, cache))))
    }

    fn ensure_out_dir(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out_dir).map_err(|source| CliError::Io {
            path: self.out_dir.display().to_string(),
            source,
        })
    }

    /// Run `f` inside a worker pool of the configured size.
    fn with_pool<T: Send>(
        &self,
        f: impl FnOnce() -> Result<T, CliError> + Send,
    ) -> Result<T, CliError> {
        match self.workers {
            None => f(),
            Some(workers) => rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .build()
                .map_err(|e| CliError::InvalidConfig(format!("worker pool: {e}")))?
                .install(f),
        }
    }
}

fn score_dataset(
    dataset: &[ResponseSet],
    measures: &[MeasureSpec],
    params: &HyperParams,
    pipeline: &ScoringPipeline,
) -> Result<Vec<ScoredQuestion>, CliError> {
    dataset
        .par_iter()
        .map(|rs| pipeline.score_question(rs, measures, params))
        .collect::<Result<Vec<_>, ScoreError>>()
        .map_err(CliError::from)
}

#[derive(Debug, Clone)]
pub struct ScoreConfig {
    pub common: CommonConfig,
    pub export_embeddings: bool,
}

/// Score every question and write `scores.csv` (and optionally
/// `embeddings.csv`).
pub fn cmd_score(config: &ScoreConfig) -> Result<(), CliError> {
    config.common.validate()?;
    if config.export_embeddings
        && !config
            .common
            .measures
            .iter()
            .any(|m| m.kind == MeasureKind::Ecc)
    {
        return Err(CliError::InvalidConfig(
            "--export-embeddings needs at least one Ecc measure".into(),
        ));
    }
    let dataset = config.common.load()?;
    config.common.ensure_out_dir()?;
    let client = config.common.nli_client()?;
    let pipeline = ScoringPipeline::new(client.clone().map(|c| c as _));
    let scored = config.common.with_pool(|| {
        score_dataset(
            &dataset,
            &config.common.measures,
            &config.common.params,
            &pipeline,
        )
    })?;
    csvio::write_scores(&config.common.out_dir.join("scores.csv"), &scored)?;
    if config.export_embeddings {
        csvio::write_embeddings(&config.common.out_dir.join("embeddings.csv"), &scored)?;
    }
    if let Some(client) = client {
        client.flush_cache()?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EvaluateConfig {
    pub common: CommonConfig,
    pub settings: Vec<EvalSetting>,
}

/// Score, then evaluate under every requested setting. Writes `report.csv`
/// plus one ARC dump per setting (`arc_u_ea.csv`, ...).
pub fn cmd_evaluate(config: &EvaluateConfig) -> Result<(), CliError> {
    config.common.validate()?;
    if config.settings.is_empty() {
        return Err(CliError::InvalidConfig("no evaluation settings".into()));
    }
    let dataset = config.common.load()?;
    let unlabeled: Vec<String> = dataset
        .iter()
        .filter(|rs| rs.accuracy.is_none())
        .map(|rs| rs.question_id.clone())
        .collect();
    if !unlabeled.is_empty() {
        return Err(CliError::Eval(EvalError::MissingAccuracy {
            question_ids: unlabeled,
        }));
    }
    config.common.ensure_out_dir()?;
    let client = config.common.nli_client()?;
    let pipeline = ScoringPipeline::new(client.clone().map(|c| c as _));
    let scored = config.common.with_pool(|| {
        score_dataset(
            &dataset,
            &config.common.measures,
            &config.common.params,
            &pipeline,
        )
    })?;
    let mut reports = Vec::with_capacity(config.settings.len());
    for &setting in &config.settings {
        let report = evaluate(&scored, setting, config.common.correctness_cutoff)?;
        let arc_name = format!(
            "arc_{}.csv",
            setting.label().to_ascii_lowercase().replace('+', "_")
        );
        csvio::write_arc(&config.common.out_dir.join(arc_name), &report)?;
        reports.push(report);
    }
    csvio::write_report(&config.common.out_dir.join("report.csv"), &reports)?;
    if let Some(client) = client {
        client.flush_cache()?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CalibrateConfig {
    pub common: CommonConfig,
    pub grid: HyperGrid,
    pub trials: usize,
    pub calib_size: usize,
}

/// Repeated-trials calibration: writes `calibration.csv` and the chosen
/// hyperparameters as `chosen_params.json`.
pub fn cmd_calibrate(config: &CalibrateConfig) -> Result<(), CliError> {
    config.common.validate()?;
    config.grid.validate()?;
    let dataset = config.common.load()?;
    config.common.ensure_out_dir()?;
    let client = config.common.nli_client()?;
    // Warm the logit cache up front so grid search never touches the
    // endpoint.
    if let Some(client) = &client {
        if client.has_endpoint() && config.common.measures.iter().any(|m| m.needs_nli()) {
            client.prefetch_dataset(&dataset)?;
        }
    }
    let pipeline = ScoringPipeline::new(client.clone().map(|c| c as _));
    let summary = config.common.with_pool(|| {
        run_trials(
            &dataset,
            &config.common.measures,
            &config.grid,
            config.trials,
            config.calib_size,
            config.common.seed,
            &pipeline,
            config.common.correctness_cutoff,
        )
        .map_err(CliError::from)
    })?;
    csvio::write_calibration(&config.common.out_dir.join("calibration.csv"), &summary)?;

    let chosen: Vec<serde_json::Value> = summary
        .measures
        .iter()
        .flat_map(|m| {
            m.outcomes.iter().map(|o| {
                serde_json::json!({
                    "measure": m.measure.to_string(),
                    "setting": m.setting.label(),
                    "objective": m.objective.to_string(),
                    "trial_index": o.trial_index,
                    "temperature": o.chosen.temperature,
                    "ecc_threshold": o.chosen.ecc_threshold,
                    "calibration_objective": o.chosen.objective_value,
                    "test_metric": o.test_metric,
                })
            })
        })
        .collect();
    let sidecar = config.common.out_dir.join("chosen_params.json");
    std::fs::write(
        &sidecar,
        serde_json::to_string_pretty(&chosen).expect("sidecar serializes") + "\n",
    )
    .map_err(|source| CliError::Io {
        path: sidecar.display().to_string(),
        source,
    })?;
    if let Some(client) = client {
        client.flush_cache()?;
    }
    Ok(())
}

/// Cache prefill statistics, as printed by `cache-nli`.
#[derive(Debug, Clone, Copy)]
pub struct CacheNliReport {
    pub pairs: usize,
    pub cache_hits: usize,
    pub network_calls: usize,
    pub wall_seconds: f64,
}

/// Pre-fill the NLI logit cache for every ordered distinct-text pair in the
/// dataset.
pub fn cmd_cache_nli(config: &CommonConfig) -> Result<CacheNliReport, CliError> {
    if config.nli_url.is_none() {
        let cache_file = crate::nli::cache_file_path(&config.cache_dir());
        let warm = cache_file.metadata().map(|m| m.len() > 0).unwrap_or(false);
        if !warm {
            return Err(CliError::InvalidConfig(
                "cache-nli needs --nli-url (or NLI_ENDPOINT_URL) unless the cache is already warm"
                    .into(),
            ));
        }
    }
    let dataset = config.load()?;
    std::fs::create_dir_all(config.cache_dir()).map_err(|source| CliError::Io {
        path: config.cache_dir().display().to_string(),
        source,
    })?;
    let cache = NliCache::open(&config.cache_dir())?;
    let endpoint = config.nli_url.as_ref().map(|url| {
        let mut cfg = NliEndpointConfig::new(url.clone());
        cfg.class_order = config.nli_class_order;
        cfg
    });
    let client = NliClient::new(endpoint, cache);
    let start = Instant::now();
    let stats = client.prefetch_dataset(&dataset)?;
    Ok(CacheNliReport {
        pairs: stats.pairs,
        cache_hits: stats.cache_hits,
        network_calls: stats.network_calls,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Parse a `--measures` value: `all`, or a comma-separated list of measure
/// names.
pub fn parse_measures(spec: &str) -> Result<Vec<MeasureSpec>, CliError> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(MeasureSpec::default_set());
    }
    let mut out = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let measure: MeasureSpec = part
            .parse()
            .map_err(CliError::InvalidConfig)?;
        if !out.contains(&measure) {
            out.push(measure);
        }
    }
    if out.is_empty() {
        return Err(CliError::InvalidConfig(format!(
            "no measures in `{spec}`"
        )));
    }
    Ok(out)
}

/// Resolve the measure list from the two selection flags.
pub fn resolve_measures(
    measures_flag: Option<&str>,
    kernel_flag: Option<&str>,
) -> Result<Vec<MeasureSpec>, CliError> {
    match (measures_flag, kernel_flag) {
        (Some(_), Some(_)) => Err(CliError::InvalidConfig(
            "--measures and --measure are mutually exclusive".into(),
        )),
        (Some(list), None) => parse_measures(list),
        (None, Some(kernel)) => {
            let kernel = kernel
                .parse::<crate::similarity::SimilarityKernel>()
                .map_err(CliError::InvalidConfig)?;
            Ok(MeasureSpec::kernel_set(kernel))
        }
        (None, None) => Ok(MeasureSpec::default_set()),
    }
}

/// Resolve the NLI endpoint URL: flag first, then NLI_ENDPOINT_URL.
pub fn resolve_nli_url(flag: Option<String>) -> Option<String> {
    flag.or_else(|| std::env::var("NLI_ENDPOINT_URL").ok().filter(|s| !s.is_empty()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::SimilarityKernel;
    use std::io::Write;
    use std::path::Path;

    fn common(dir: &Path, dataset: PathBuf, measures: Vec<MeasureSpec>) -> CommonConfig {
        CommonConfig {
            dataset,
            out_dir: dir.to_path_buf(),
            measures,
            nli_url: None,
            nli_class_order: ClassOrder::default(),
            cache_dir: None,
            params: HyperParams::default(),
            workers: Some(2),
            num_generations: None,
            correctness_cutoff: 0.7,
            seed: 1,
        }
    }

    fn write_dataset(dir: &Path, labeled: bool) -> PathBuf {
        let path = dir.join("data.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        for i in 0..6 {
            let acc = if labeled {
                format!(r#","accuracy":[{}.0,0.0,1.0]"#, i % 2)
            } else {
                String::new()
            };
            writeln!(
                f,
                r#"{{"question_id":"q{i}","question":"what {i}?","responses":["ans {i}","ans {i}","other {i}"]{acc}}}"#
            )
            .unwrap();
        }
        path
    }

    #[test]
    fn jaccard_only_score_needs_no_network() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = write_dataset(dir.path(), false);
        let cfg = ScoreConfig {
            common: common(
                dir.path(),
                dataset,
                MeasureSpec::kernel_set(SimilarityKernel::Jaccard),
            ),
            export_embeddings: true,
        };
        cmd_score(&cfg).unwrap();
        let rows = csvio::read_scores(&dir.path().join("scores.csv")).unwrap();
        // 3 measures: 3 U rows per question, plus Deg and Ecc C rows (3
        // responses each): 6 questions × (3 + 6) = 54.
        assert_eq!(rows.len(), 54);
        assert!(rows.iter().any(|r| r.measure == "Deg(J)" && r.score_type == 'C'));
        let emb = csvio::read_embeddings(&dir.path().join("embeddings.csv")).unwrap();
        assert!(!emb.is_empty());
    }

    #[test]
    fn nli_measures_without_endpoint_or_cache_fail_validation() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = write_dataset(dir.path(), false);
        let cfg = ScoreConfig {
            common: common(
                dir.path(),
                dataset,
                MeasureSpec::kernel_set(SimilarityKernel::NliEntail),
            ),
            export_embeddings: false,
        };
        let err = cmd_score(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn evaluate_requires_labels() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = write_dataset(dir.path(), false);
        let cfg = EvaluateConfig {
            common: common(
                dir.path(),
                dataset,
                MeasureSpec::kernel_set(SimilarityKernel::Jaccard),
            ),
            settings: vec![EvalSetting::U_EA],
        };
        let err = cmd_evaluate(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("q0"));
    }

    #[test]
    fn evaluate_writes_report_and_arc() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = write_dataset(dir.path(), true);
        let cfg = EvaluateConfig {
            common: common(
                dir.path(),
                dataset,
                MeasureSpec::kernel_set(SimilarityKernel::Jaccard),
            ),
            settings: vec![EvalSetting::U_EA, EvalSetting::C_IA],
        };
        cmd_evaluate(&cfg).unwrap();
        let report = csvio::read_report(&dir.path().join("report.csv")).unwrap();
        // 2 settings × (Random + Oracle + 3 measures).
        assert_eq!(report.len(), 10);
        assert!(dir.path().join("arc_u_ea.csv").exists());
        assert!(dir.path().join("arc_c_ia.csv").exists());
        // Base accuracy never exceeds the oracle.
        assert!(report[0].auarc <= report[1].auarc);
    }

    #[test]
    fn measure_flag_resolution() {
        assert_eq!(resolve_measures(None, None).unwrap().len(), 11);
        assert_eq!(
            resolve_measures(None, Some("jaccard")).unwrap(),
            MeasureSpec::kernel_set(SimilarityKernel::Jaccard)
        );
        assert_eq!(
            resolve_measures(Some("Deg(E),NumSet,Deg(E)"), None).unwrap().len(),
            2
        );
        assert!(resolve_measures(Some("NumSet"), Some("jaccard")).is_err());
        assert_eq!(
            resolve_measures(None, Some("rouge_l")).unwrap(),
            vec![MeasureSpec::lexi_sim()]
        );
    }

    #[test]
    fn spectral_measures_over_rouge_kernel_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = write_dataset(dir.path(), false);
        let cfg = ScoreConfig {
            common: common(
                dir.path(),
                dataset,
                vec![MeasureSpec::spectral(
                    crate::spectral::MeasureKind::Deg,
                    SimilarityKernel::RougeL,
                )],
            ),
            export_embeddings: false,
        };
        let err = cmd_score(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("rouge_l"));
    }
}
