use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use graphuq::calibrate::{HyperGrid, Objective};
use graphuq::cli::{
    cmd_cache_nli, cmd_calibrate, cmd_evaluate, cmd_score, resolve_measures, resolve_nli_url,
    CalibrateConfig, CliError, CommonConfig, EvaluateConfig, ScoreConfig,
};
use graphuq::eval::EvalSetting;
use graphuq::nli::ClassOrder;
use graphuq::score::HyperParams;

/// Uncertainty and confidence scoring for sampled LLM responses, with
/// selective-generation evaluation and hyperparameter calibration.
#[derive(Parser)]
#[command(name = "graphuq", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSONL dataset: one question with its sampled responses per line
    #[arg(long)]
    dataset: PathBuf,

    /// Directory for output files
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    /// Comma-separated measures, e.g. `NumSet,Deg(E),Ecc(J)`, or `all`
    #[arg(long)]
    measures: Option<String>,

    /// Similarity kernel shorthand: score the spectral measures over one
    /// kernel (jaccard, nli_entail, nli_contra) or LexiSim for rouge_l
    #[arg(long)]
    measure: Option<String>,

    /// NLI endpoint base URL (falls back to NLI_ENDPOINT_URL)
    #[arg(long)]
    nli_url: Option<String>,

    /// Wire order of the endpoint's logits array
    #[arg(long, default_value = "entail,neutral,contra")]
    nli_class_order: String,

    /// Softmax temperature applied to cached NLI logits
    #[arg(long, default_value_t = 1.0)]
    nli_temperature: f64,

    /// Eigenvalue cutoff for the Ecc embedding dimension
    #[arg(long, default_value_t = 0.9)]
    ecc_threshold: f64,

    /// Directory holding the NLI logit cache (defaults to --out-dir)
    #[arg(long)]
    cache_dir: Option<PathBuf>,

    /// Worker threads (defaults to the logical core count)
    #[arg(long)]
    workers: Option<usize>,

    /// Truncate every question to its first m responses
    #[arg(long)]
    num_generations: Option<usize>,

    /// Accuracy above this value counts as correct
    #[arg(long, default_value_t = 0.7)]
    correctness_cutoff: f64,

    /// Seed for calibration/test splits
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl CommonArgs {
    fn into_config(self) -> Result<CommonConfig, CliError> {
        let measures = resolve_measures(self.measures.as_deref(), self.measure.as_deref())?;
        let class_order: ClassOrder = self
            .nli_class_order
            .parse()
            .map_err(CliError::InvalidConfig)?;
        Ok(CommonConfig {
            dataset: self.dataset,
            out_dir: self.out_dir,
            measures,
            nli_url: resolve_nli_url(self.nli_url),
            nli_class_order: class_order,
            cache_dir: self.cache_dir,
            params: HyperParams {
                temperature: self.nli_temperature,
                ecc_threshold: self.ecc_threshold,
            },
            workers: self.workers,
            num_generations: self.num_generations,
            correctness_cutoff: self.correctness_cutoff,
            seed: self.seed,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute U and C scores for every question; writes scores.csv
    Score {
        #[command(flatten)]
        common: CommonArgs,

        /// Also write the Ecc spectral embeddings as embeddings.csv
        #[arg(long)]
        export_embeddings: bool,
    },
    /// Score and evaluate against accuracy labels; writes report.csv and
    /// per-setting ARC dumps
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,

        /// Comma-separated settings: u+ea, c+ia, u+ia
        #[arg(long, default_value = "u+ea,c+ia,u+ia")]
        settings: String,
    },
    /// Grid-search hyperparameters on calibration splits over repeated
    /// trials; writes calibration.csv and chosen_params.json
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,

        /// Number of repeated trials
        #[arg(long, default_value_t = 10)]
        trials: usize,

        /// Calibration questions drawn per trial
        #[arg(long, default_value_t = 1000)]
        calib_size: usize,

        /// Metric the grid search maximizes (auarc or auroc)
        #[arg(long, default_value = "auarc")]
        objective: String,

        /// Evaluation setting override (defaults to each measure's native
        /// setting)
        #[arg(long)]
        setting: Option<String>,

        /// Comma-separated softmax temperature grid
        #[arg(long)]
        temperatures: Option<String>,

        /// Comma-separated Ecc eigenvalue-threshold grid
        #[arg(long)]
        ecc_thresholds: Option<String>,
    },
    /// Pre-fill the NLI logit cache for every ordered response pair
    CacheNli {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn parse_float_list(name: &str, spec: &str) -> Result<Vec<f64>, CliError> {
    spec.split(',')
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| CliError::InvalidConfig(format!("bad {name} value `{p}`")))
        })
        .collect()
}

fn run() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Score {
            common,
            export_embeddings,
        } => cmd_score(&ScoreConfig {
            common: common.into_config()?,
            export_embeddings,
        }),
        Command::Evaluate { common, settings } => {
            let settings = settings
                .split(',')
                .map(|p| p.trim())
                .filter(|p| !p.is_empty())
                .map(|p| p.parse::<EvalSetting>().map_err(CliError::InvalidConfig))
                .collect::<Result<Vec<_>, _>>()?;
            cmd_evaluate(&EvaluateConfig {
                common: common.into_config()?,
                settings,
            })
        }
        Command::Calibrate {
            common,
            trials,
            calib_size,
            objective,
            setting,
            temperatures,
            ecc_thresholds,
        } => {
            let mut grid = HyperGrid {
                objective: objective
                    .parse::<Objective>()
                    .map_err(CliError::InvalidConfig)?,
                setting: setting
                    .map(|s| s.parse::<EvalSetting>().map_err(CliError::InvalidConfig))
                    .transpose()?,
                ..HyperGrid::default()
            };
            if let Some(spec) = temperatures {
                grid.temperatures = parse_float_list("temperature", &spec)?;
            }
            if let Some(spec) = ecc_thresholds {
                grid.ecc_thresholds = parse_float_list("threshold", &spec)?;
            }
            cmd_calibrate(&CalibrateConfig {
                common: common.into_config()?,
                grid,
                trials,
                calib_size,
            })
        }
        Command::CacheNli { common } => {
            let report = cmd_cache_nli(&common.into_config()?)?;
            println!(
                "pairs: {} | cache hits: {} | endpoint calls: {} | wall time: {:.2}s",
                report.pairs, report.cache_hits, report.network_calls, report.wall_seconds
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
