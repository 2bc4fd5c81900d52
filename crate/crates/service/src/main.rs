use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use eop_core::aggregator::{aggregate_average_named, aggregate_hierarchical, HierarchicalConfig};
use eop_core::domain::synthetic::compas_like_csv;
use eop_core::domain::{load_dataset, CircumstanceProfile, DatasetConfig, FeatureSchema, Part, Participant, Subject, WeightVector};
use eop_core::eop_audit::{check_eop, AuditConfig, PolicyPredictions};
use eop_core::estimator::{comparison_rows, estimate_weights, ComparisonRow, FitResult, SolverConfig};
use eop_core::questiongen::{build_questionnaire, Questionnaire, QuestionnaireConfig};
use eop_core::simulator::{recovery_curve, SimConfig};
use eop_service::{Service, ServiceConfig};

#[derive(Parser)]
#[command(name = "eop", version, about = "Pairwise moral-judgment studies: serve, estimate, aggregate, audit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "EOP_PORT")]
        port: Option<u16>,
        #[arg(long, env = "EOP_DATA_DIR")]
        data_dir: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Build one participant's questionnaire.
    GenerateQuestions {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 25)]
        n_desert: usize,
        #[arg(long, default_value_t = 25)]
        n_utility: usize,
        #[arg(long, default_value_t = 2)]
        max_attribute_diff: usize,
        #[arg(long)]
        allow_neutral: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit one participant's weights for one part.
    Estimate {
        /// Participant JSON with Likert and pairwise responses.
        #[arg(long)]
        participant: PathBuf,
        /// The questionnaire the participant answered.
        #[arg(long)]
        questionnaire: PathBuf,
        #[arg(long, value_enum)]
        part: PartArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Combine per-participant estimates into society weights.
    Aggregate {
        #[arg(long, value_enum, default_value = "average")]
        method: Method,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Directory of files written by `estimate`.
        #[arg(long)]
        fits: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recovery of a random truth from simulated answers.
    Simulate {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[arg(long, value_enum, default_value = "desert")]
        part: PartArg,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, value_delimiter = ',', default_value = "5,10,15,20,25,30,40")]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        signal_scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a policy's predictions for equality of opportunity.
    CheckEop {
        /// JSON array of subjects, or a CSV in the dataset format.
        #[arg(long)]
        subjects: PathBuf,
        /// JSON object from subject id to 0/1.
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        delta: PathBuf,
        #[arg(long)]
        upsilon: PathBuf,
        #[arg(long)]
        circumstance: PathBuf,
        #[arg(long, default_value_t = 5)]
        bins: usize,
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
        #[arg(long, default_value_t = 10)]
        min_cell_size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DatasetArgs {
    /// Dataset CSV with the standard recidivism columns.
    #[arg(long, conflicts_with = "synthetic")]
    dataset: Option<PathBuf>,
    /// Use this many synthetic subjects instead of a CSV.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 0)]
    dataset_seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum PartArg {
    Desert,
    Utility,
}

impl From<PartArg> for Part {
    fn from(p: PartArg) -> Part {
        match p {
            PartArg::Desert => Part::Desert,
            PartArg::Utility => Part::Utility,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Average,
    Hierarchical,
}

/// Output of `estimate`, input of `aggregate`.
#[derive(Serialize, Deserialize)]
struct ParticipantEstimate {
    participant_id: String,
    kind: Part,
    fit: FitResult,
    rows: Vec<ComparisonRow>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn load_subjects_csv(path: &Path) -> Result<Vec<Subject>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    load_dataset(file, &FeatureSchema::compas(), &DatasetConfig::default())
        .with_context(|| format!("loading {}", path.display()))
}

impl DatasetArgs {
    fn load(&self) -> Result<Vec<Subject>> {
        match (&self.dataset, self.synthetic) {
            (Some(path), _) => load_subjects_csv(path),
            (None, Some(n)) => {
                let csv = compas_like_csv(n, &mut ChaCha8Rng::seed_from_u64(self.dataset_seed));
                Ok(load_dataset(csv.as_bytes(), &FeatureSchema::compas(), &DatasetConfig::default())?)
            }
            (None, None) => bail!("pass --dataset <csv> or --synthetic <n>"),
        }
    }
}

fn serve(config: &Path, port: Option<u16>, data_dir: Option<PathBuf>, host: &str) -> Result<()> {
    let mut config = ServiceConfig::load(config)?;
    if let Some(port) = port {
        config.port = port;
    }
    if let Some(dir) = data_dir {
        config.data_dir = dir;
    }
    let service = Arc::new(Service::open(&config)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, config.port)).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        let ctrl_c = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        eop_service::http::serve(service, listener, ctrl_c).await?;
        Ok(())
    })
}

fn estimate(participant: &Path, questionnaire: &Path, part: Part) -> Result<ParticipantEstimate> {
    let participant: Participant = read_json(participant)?;
    let questionnaire: Questionnaire = read_json(questionnaire)?;
    let rows = comparison_rows(&participant, part, &questionnaire)?;
    let dim = part.dim(questionnaire.likert_features.len());
    let fit = estimate_weights(&rows, dim, part, &SolverConfig::default())?;
    Ok(ParticipantEstimate { participant_id: participant.participant_id, kind: part, fit, rows })
}

fn aggregate(method: Method, lambda: f64, dir: &Path, out: Option<&Path>) -> Result<()> {
    let mut estimates = BTreeMap::new();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    for path in &paths {
        let estimate: ParticipantEstimate = read_json(path)?;
        if estimates.insert(estimate.participant_id.clone(), estimate).is_some() {
            bail!("{}: participant appears twice", path.display());
        }
    }
    let kind = match estimates.values().next() {
        Some(e) => e.kind,
        None => bail!("no estimates in {}", dir.display()),
    };
    if estimates.values().any(|e| e.kind != kind) {
        bail!("estimates mix desert and utility fits");
    }
    let result = match method {
        Method::Average => {
            let weights: BTreeMap<String, WeightVector> =
                estimates.iter().map(|(id, e)| (id.clone(), e.fit.weights.clone())).collect();
            aggregate_average_named(&weights)?
        }
        Method::Hierarchical => {
            let rows = estimates.into_iter().map(|(id, e)| (id, e.rows)).collect();
            let config = HierarchicalConfig { lambda, ..HierarchicalConfig::default() };
            aggregate_hierarchical(&rows, kind, &config)?
        }
    };
    write_json(&result, out)
}

fn read_subjects(path: &Path) -> Result<Vec<Subject>> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        load_subjects_csv(path)
    } else {
        read_json(path)
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Serve { config, port, data_dir, host } => serve(&config, port, data_dir, &host),
        Command::GenerateQuestions { dataset, seed, n_desert, n_utility, max_attribute_diff, allow_neutral, out } => {
            let subjects = dataset.load()?;
            let config = QuestionnaireConfig {
                n_desert,
                n_utility,
                max_attribute_diff,
                allow_neutral,
                seed,
                ..QuestionnaireConfig::default()
            };
            let questionnaire = build_questionnaire(&subjects, &FeatureSchema::compas(), &config)?;
            write_json(&questionnaire, out.as_deref())
        }
        Command::Estimate { participant, questionnaire, part, out } => {
            let estimate = estimate(&participant, &questionnaire, part.into())?;
            write_json(&estimate, out.as_deref())
        }
        Command::Aggregate { method, lambda, fits, out } => aggregate(method, lambda, &fits, out.as_deref()),
        Command::Simulate { dataset, part, trials, counts, seed, signal_scale, out } => {
            let subjects = dataset.load()?;
            let schema = FeatureSchema::compas();
            let part = Part::from(part);
            let config = SimConfig {
                dim: part.dim(schema.k()),
                n_trials: trials,
                question_counts: counts,
                seed,
                signal_scale,
                ..SimConfig::default()
            };
            let curve = recovery_curve(&subjects, &schema, part, &config)?;
            write_json(&curve, out.as_deref())
        }
        Command::CheckEop { subjects, predictions, delta, upsilon, circumstance, bins, threshold, min_cell_size, out } => {
            let subjects = read_subjects(&subjects)?;
            let predictions: PolicyPredictions = read_json(&predictions)?;
            let delta: WeightVector = read_json(&delta)?;
            let upsilon: WeightVector = read_json(&upsilon)?;
            let profile: CircumstanceProfile = read_json(&circumstance)?;
            let config = AuditConfig { n_desert_bins: bins, divergence_threshold: threshold, min_cell_size };
            let report = check_eop(&subjects, &predictions, &delta, &upsilon, &profile, &config)?;
            write_json(&report, out.as_deref())
        }
    }
}
