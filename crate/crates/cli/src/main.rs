use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use thiserror::Error;

use strokecast::classifier::{score_writer, write_results_csv, ScoreOptions};
use strokecast::experiment::{run_experiment, DataSource, ExperimentConfig, ExperimentError};
use strokecast::model::{self, build_word_model_from_store, codebook_from_text, ModelConfig, ModelError, ModelSet};
use strokecast::stats::{self, BinomialReport};
use strokecast::stroke::{extract_features, FeatureStore};
use strokecast::svc::{self, Dataset};
use strokecast::synth::{self, SynthConfig};
use strokecast::{Channel, SessionFusion, TrainingMode};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) => CliError::Config(e.to_string()),
            ExperimentError::Invariant(_) => CliError::Invariant(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Parser)]
#[command(name = "strokecast", version, about = "Gender classification of online handwriting from stroke codebooks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic SVC dataset with a manifest.
    Synth(SynthArgs),
    /// Train the four codebooks of every word on all writers of a dataset.
    Train(TrainArgs),
    /// Classify the writers of a dataset with trained models.
    Classify(ClassifyArgs),
    /// Run the repeated train/test protocol and write rate tables.
    Experiment(ExperimentArgs),
    /// Run the experiment once per separation on synthetic data.
    Sweep(SweepArgs),
    /// Binomial significance of a classification count or rate.
    Stats(StatsArgs),
    /// Print feature strokes of an SVC file or the headers of a codebook.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct SynthOverrides {
    /// Writers per gender.
    #[arg(long)]
    writers_per_gender: Option<usize>,
    #[arg(long)]
    sessions: Option<u32>,
    /// Gender separation of the latent traits.
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    writer_jitter: Option<f64>,
    #[arg(long)]
    word_jitter: Option<f64>,
    #[arg(long)]
    session_jitter: Option<f64>,
    #[arg(long)]
    strokes_per_glyph: Option<f64>,
}

impl SynthOverrides {
    fn apply(&self, cfg: &mut SynthConfig) {
        if let Some(v) = self.writers_per_gender {
            cfg.writers_per_gender = v;
        }
        if let Some(v) = self.sessions {
            cfg.sessions = v;
        }
        if let Some(v) = self.separation {
            cfg.separation = v;
        }
        if let Some(v) = self.writer_jitter {
            cfg.writer_jitter = v;
        }
        if let Some(v) = self.word_jitter {
            cfg.word_jitter = v;
        }
        if let Some(v) = self.session_jitter {
            cfg.session_jitter = v;
        }
        if let Some(v) = self.strokes_per_glyph {
            cfg.strokes_per_glyph = v;
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// JSON generator config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the SVC tree and manifest.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of the vocabulary.
    #[arg(long, value_delimiter = ',')]
    words: Vec<String>,
    #[command(flatten)]
    synth: SynthOverrides,
}

#[derive(Args)]
struct ModelOverrides {
    /// Resampled points per stroke.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    min_points: Option<usize>,
    /// Approximate SOM units per codebook.
    #[arg(long)]
    target_units: Option<usize>,
    #[arg(long)]
    rough_epochs: Option<usize>,
    #[arg(long)]
    fine_epochs: Option<usize>,
    /// batch or sequential.
    #[arg(long)]
    mode: Option<String>,
}

impl ModelOverrides {
    fn apply(&self, cfg: &mut ModelConfig) -> Result<(), CliError> {
        if let Some(v) = self.m {
            cfg.pipeline.m = v;
        }
        if let Some(v) = self.min_points {
            cfg.pipeline.min_points = v;
        }
        if let Some(v) = self.target_units {
            cfg.som.target_units = v;
        }
        if let Some(v) = self.rough_epochs {
            cfg.som.rough_epochs = v;
        }
        if let Some(v) = self.fine_epochs {
            cfg.som.fine_epochs = v;
        }
        if let Some(mode) = &self.mode {
            cfg.som.mode = match mode.as_str() {
                "batch" => TrainingMode::Batch,
                "sequential" => TrainingMode::Sequential,
                other => return Err(CliError::Config(format!("unknown mode {other:?} (batch, sequential)"))),
            };
        }
        Ok(())
    }
}

#[derive(Args)]
struct DataArgs {
    /// Dataset root holding <writer>/<session>/<word>.svc.
    #[arg(long)]
    data: PathBuf,
    /// Manifest of writer_id,gender rows; defaults to <data>/manifest.csv.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

impl DataArgs {
    fn manifest(&self) -> PathBuf {
        self.manifest.clone().unwrap_or_else(|| self.data.join("manifest.csv"))
    }

    fn load(&self) -> Result<Dataset, CliError> {
        let outcome = svc::load_dataset(&self.data, &self.manifest()).map_err(data_err)?;
        for skip in &outcome.skipped {
            log::warn!("skipped {}: {}", skip.path.display(), skip.reason);
        }
        if outcome.dataset.is_empty() {
            return Err(CliError::Data(format!("no recordings under {}", self.data.display())));
        }
        Ok(outcome.dataset)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output directory; one sub-directory per word.
    #[arg(long)]
    out: PathBuf,
    /// JSON model config (pipeline and som sections).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    words: Vec<String>,
    #[command(flatten)]
    model: ModelOverrides,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Directory written by `train`.
    #[arg(long)]
    models: PathBuf,
    /// Writers to classify; defaults to all.
    #[arg(long, value_delimiter = ',')]
    writers: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    words: Vec<String>,
    /// down, up or combined.
    #[arg(long, default_value = "combined")]
    channel: String,
    /// sum, average, max or min.
    #[arg(long, default_value = "sum")]
    fusion: String,
    #[arg(long, default_value_t = 1e-2)]
    p_threshold: f64,
    /// Results CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentOverrides {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Read recordings from this dataset root instead of generating them.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// JSON generator config for synthetic data.
    #[arg(long)]
    synth_config: Option<PathBuf>,
    #[arg(long)]
    synth_seed: Option<u64>,
    #[command(flatten)]
    synth: SynthOverrides,
    #[arg(long)]
    train_per_gender: Option<usize>,
    #[arg(long)]
    test_per_gender: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated channels (down, up, combined).
    #[arg(long, value_delimiter = ',')]
    channels: Vec<String>,
    #[arg(long)]
    fusion: Option<String>,
    #[arg(long, value_delimiter = ',')]
    words: Vec<String>,
    #[arg(long)]
    up_weight: Option<f64>,
    #[arg(long)]
    p_threshold: Option<f64>,
    #[command(flatten)]
    model: ModelOverrides,
}

impl ExperimentOverrides {
    fn resolve(&self, seed: u64) -> Result<ExperimentConfig, CliError> {
        let mut cfg: ExperimentConfig = match &self.config {
            Some(p) => read_json(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.seed = seed;
        if let Some(root) = &self.data {
            let manifest = self.manifest.clone().unwrap_or_else(|| root.join("manifest.csv"));
            cfg.data = DataSource::Directory {
                root: root.clone(),
                manifest,
            };
        } else if let Some(p) = &self.synth_config {
            cfg.data = DataSource::Synth(read_json(p)?);
        }
        if let DataSource::Synth(s) = &mut cfg.data {
            self.synth.apply(s);
            if let Some(v) = self.synth_seed {
                s.seed = v;
            }
            if !self.words.is_empty() {
                let words: Vec<&str> = self.words.iter().map(String::as_str).collect();
                *s = s.clone().with_words(&words);
            }
        }
        if let Some(v) = self.train_per_gender {
            cfg.train_per_gender = v;
        }
        if let Some(v) = self.test_per_gender {
            cfg.test_per_gender = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if !self.channels.is_empty() {
            cfg.channels = self
                .channels
                .iter()
                .map(|c| c.parse::<Channel>().map_err(CliError::Config))
                .collect::<Result<_, _>>()?;
        }
        if let Some(f) = &self.fusion {
            cfg.fusion = f.parse::<SessionFusion>().map_err(CliError::Config)?;
        }
        if !self.words.is_empty() {
            cfg.words = self.words.clone();
        }
        if let Some(v) = self.up_weight {
            cfg.up_weight = v;
        }
        if let Some(v) = self.p_threshold {
            cfg.p_threshold = v;
        }
        self.model.apply(&mut cfg.model)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment seed; every split, codebook and generated writer derives from it.
    #[arg(long)]
    seed: u64,
    /// Results directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    cfg: ExperimentOverrides,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    seed: u64,
    /// Comma-separated separations.
    #[arg(long, value_delimiter = ',', required = true)]
    deltas: Vec<f64>,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    cfg: ExperimentOverrides,
}

#[derive(Args)]
struct StatsArgs {
    /// Number of classified writers.
    #[arg(long)]
    n: u64,
    /// Correctly classified writers.
    #[arg(long, conflicts_with = "rate")]
    k: Option<u64>,
    /// Classification rate in [0, 1]; k = round(rate * n).
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, default_value_t = 1e-2)]
    p_threshold: f64,
}

#[derive(Args)]
struct InspectArgs {
    /// SVC file whose feature strokes are printed.
    #[arg(long, conflicts_with = "codebook")]
    svc: Option<PathBuf>,
    /// Codebook file whose header is printed.
    #[arg(long)]
    codebook: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    min_points: usize,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => {
            print!("{}", String::from_utf8_lossy(bytes));
            Ok(())
        }
    }
}

fn synth_cmd(args: SynthArgs) -> Result<(), CliError> {
    let mut cfg: SynthConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    args.synth.apply(&mut cfg);
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if !args.words.is_empty() {
        let words: Vec<&str> = args.words.iter().map(String::as_str).collect();
        cfg = cfg.with_words(&words);
        if cfg.words.len() != words.len() {
            return Err(CliError::Config("unknown word in --words".into()));
        }
    }
    if cfg.writers_per_gender == 0 || cfg.sessions == 0 || cfg.words.is_empty() {
        return Err(CliError::Config("need at least one writer, session and word".into()));
    }
    if !(cfg.separation >= 0.0 && cfg.writer_jitter >= 0.0 && cfg.word_jitter >= 0.0 && cfg.session_jitter >= 0.0) {
        return Err(CliError::Config("separation and jitters must be non-negative".into()));
    }
    let ds = synth::generate_dataset(&cfg);
    let manifest = svc::write_dataset(&ds, &args.out).map_err(data_err)?;
    let json = serde_json::to_string_pretty(&cfg).expect("config serializes");
    fs::write(args.out.join("synth.json"), json + "\n").map_err(data_err)?;
    println!(
        "wrote {} recordings of {} writers; manifest {}",
        ds.len(),
        ds.writers().len(),
        manifest.display()
    );
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<(), CliError> {
    let mut cfg: ModelConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => ModelConfig::default(),
    };
    args.model.apply(&mut cfg)?;
    let ds = args.data.load()?;
    let store = FeatureStore::extract(&ds, cfg.pipeline).map_err(data_err)?;
    let words = if args.words.is_empty() { store.words() } else { args.words.clone() };
    let writers: Vec<&str> = store.writers().keys().map(String::as_str).collect();
    let mut set = ModelSet {
        config_digest: cfg.digest(),
        ..ModelSet::default()
    };
    for word in &words {
        log::info!("training {word}");
        set.insert(build_word_model_from_store(&store, &writers, word, &cfg.som, args.seed)?);
    }
    model::save_model_set(&set, &args.out)?;
    for (word, m) in &set.words {
        let shapes: Vec<String> = m
            .codebooks()
            .iter()
            .map(|c| {
                let g = c.protos.grid();
                format!("{}-{} {}x{}", c.gender.code(), c.kind, g.rows, g.cols)
            })
            .collect();
        println!("{word}: {}", shapes.join(", "));
    }
    Ok(())
}

fn classify_cmd(args: ClassifyArgs) -> Result<(), CliError> {
    let channel: Channel = args.channel.parse().map_err(CliError::Config)?;
    let fusion: SessionFusion = args.fusion.parse().map_err(CliError::Config)?;
    let models = model::load_model_set(&args.models)?;
    if models.words.is_empty() {
        return Err(CliError::Data(format!("no models under {}", args.models.display())));
    }
    let m = models.words.values().next().expect("non-empty").m();
    let ds = args.data.load()?;
    let pipeline = strokecast::PipelineConfig {
        m,
        ..strokecast::PipelineConfig::default()
    };
    let store = FeatureStore::extract(&ds, pipeline).map_err(data_err)?;
    let words = if args.words.is_empty() {
        models.words.keys().cloned().collect()
    } else {
        args.words.clone()
    };
    let writers: Vec<String> = if args.writers.is_empty() {
        store.writers().keys().cloned().collect()
    } else {
        args.writers.clone()
    };
    let options = ScoreOptions {
        fusion,
        ..ScoreOptions::default()
    };
    let mut results = Vec::with_capacity(writers.len());
    for w in &writers {
        let scores = score_writer(&models, &store, w, &words, &options).map_err(data_err)?;
        results.push(scores.classify(channel).map_err(data_err)?);
    }
    let mut buf = Vec::new();
    write_results_csv(&results, &mut buf).map_err(data_err)?;
    write_output(args.out.as_deref(), &buf)?;
    let report = stats::evaluate_rates(&results, args.p_threshold);
    eprintln!(
        "{} of {} correct ({:.2}%), p = {:.3e}, {}",
        report.k,
        report.n,
        100.0 * report.rate,
        report.p_value,
        if report.significant { "significant" } else { "not significant" }
    );
    Ok(())
}

fn experiment_cmd(args: ExperimentArgs) -> Result<(), CliError> {
    let cfg = args.cfg.resolve(args.seed)?;
    let report = run_experiment(&cfg)?;
    report.write_dir(&args.out).map_err(data_err)?;
    print!("{}", report.render());
    Ok(())
}

fn sweep_cmd(args: SweepArgs) -> Result<(), CliError> {
    let cfg = args.cfg.resolve(args.seed)?;
    let points = synth::separation_sweep(&cfg, &args.deltas)?;
    let mut out = String::from("separation,channel,fused,word_mean\n");
    for p in &points {
        out.push_str(&format!("{},{},{},{}\n", p.separation, p.channel, p.fused, p.word_mean));
    }
    write_output(args.out.as_deref(), out.as_bytes())
}

fn stats_cmd(args: StatsArgs) -> Result<(), CliError> {
    let report = match (args.k, args.rate) {
        (Some(k), None) => BinomialReport::new(args.n, k, args.p_threshold),
        (None, Some(r)) if (0.0..=1.0).contains(&r) => BinomialReport::from_rate(args.n, r, args.p_threshold),
        (None, Some(r)) => return Err(CliError::Config(format!("rate {r} outside [0, 1]"))),
        _ => return Err(CliError::Config("give --k or --rate".into())),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    let mut buf = Vec::new();
    stats::write_reports_csv(&[report], &mut buf).map_err(data_err)?;
    write_output(None, &buf)
}

fn inspect_cmd(args: InspectArgs) -> Result<(), CliError> {
    if let Some(path) = &args.svc {
        let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let word = path.file_stem().map_or(String::new(), |s| s.to_string_lossy().into_owned());
        let rec = svc::parse_svc(&word, &text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let cfg = strokecast::PipelineConfig {
            m: args.m,
            min_points: args.min_points,
        };
        let feats = extract_features(&rec, &cfg).map_err(data_err)?;
        for s in feats.pen_down.iter().chain(&feats.pen_up) {
            println!("{}", s.dump_line());
        }
        if feats.dropped > 0 {
            eprintln!("dropped {} runs shorter than {} points", feats.dropped, args.min_points);
        }
        return Ok(());
    }
    if let Some(path) = &args.codebook {
        let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let cb = codebook_from_text(&text)?;
        let g = cb.protos.grid();
        println!("word: {}", cb.word);
        println!("gender: {}", cb.gender.name());
        println!("kind: {}", cb.kind.name());
        println!("M: {}\nF: {}", cb.m, cb.f);
        println!("grid: {}x{}", g.rows, g.cols);
        println!("writers: {}\nstrokes: {}", cb.provenance.writers, cb.provenance.strokes);
        println!("seed: {}", cb.provenance.seed);
        return Ok(());
    }
    Err(CliError::Config("give --svc or --codebook".into()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(a) => synth_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Stats(a) => stats_cmd(a),
        Command::Inspect(a) => inspect_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
