//! Train/test protocol: repeated seeded writer splits, one model per word
//! from the same training writers, per-word and all-word decisions for every
//! test writer, and rate tables annotated with binomial significance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{score_writer, Channel, ClassificationResult, ClassifyError, ScoreOptions, SessionFusion};
use crate::model::{build_word_model_from_store, ModelConfig, ModelError, ModelSet};
use crate::seeds::{label_tag, mix_all};
use crate::stats::{self, BinomialReport};
use crate::stroke::{FeatureError, FeatureStore};
use crate::svc::{self, Dataset, Gender, LoadError};
use crate::synth::{self, SynthConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Where the recordings come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synth(SynthConfig),
    Directory { root: PathBuf, manifest: PathBuf },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synth(SynthConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub train_per_gender: usize,
    pub test_per_gender: usize,
    pub trials: usize,
    pub channels: Vec<Channel>,
    pub fusion: SessionFusion,
    /// Words to use; empty means every word in the dataset.
    pub words: Vec<String>,
    pub model: ModelConfig,
    pub up_weight: f64,
    pub p_threshold: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::default(),
            train_per_gender: 50,
            test_per_gender: 121,
            trials: 4,
            channels: Channel::ALL.to_vec(),
            fusion: SessionFusion::Sum,
            words: Vec::new(),
            model: ModelConfig::default(),
            up_weight: 1.0,
            p_threshold: 1e-2,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.train_per_gender == 0 {
            return bad("train_per_gender must be positive");
        }
        if self.test_per_gender == 0 {
            return bad("test_per_gender must be positive");
        }
        if self.trials == 0 {
            return bad("trials must be positive");
        }
        if self.channels.is_empty() {
            return bad("at least one channel is required");
        }
        if !(self.p_threshold > 0.0 && self.p_threshold < 1.0) {
            return bad("p_threshold must lie in (0, 1)");
        }
        if self.model.pipeline.m < 2 {
            return bad("m must be at least 2");
        }
        if self.model.som.target_units == 0 {
            return bad("target_units must be positive");
        }
        if !(self.up_weight.is_finite() && self.up_weight >= 0.0) {
            return bad("up_weight must be finite and non-negative");
        }
        Ok(())
    }

    /// Loads or generates the dataset named by `data`.
    pub fn load_data(&self) -> Result<Dataset, ExperimentError> {
        match &self.data {
            DataSource::Synth(s) => Ok(synth::generate_dataset(s)),
            DataSource::Directory { root, manifest } => {
                let outcome = svc::load_dataset(root, manifest)?;
                for skip in &outcome.skipped {
                    log::warn!("skipped {}: {}", skip.path.display(), skip.reason);
                }
                Ok(outcome.dataset)
            }
        }
    }
}

/// Training and test writers of one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Samples `train` writers per gender for training and `test` of the
/// remaining writers per gender for testing, uniformly without replacement.
pub fn split_writers(
    writers: &BTreeMap<String, Gender>,
    train: usize,
    test: usize,
    seed: u64,
) -> Result<Split, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for gender in Gender::BOTH {
        let mut pool: Vec<&String> = writers.iter().filter(|(_, g)| **g == gender).map(|(w, _)| w).collect();
        if pool.len() < train + test {
            return Err(ExperimentError::Data(format!(
                "{} {} writers available, {} needed ({train} train + {test} test)",
                pool.len(),
                gender,
                train + test
            )));
        }
        pool.shuffle(&mut rng);
        out.train.extend(pool[..train].iter().map(|w| (*w).clone()));
        out.test.extend(pool[train..train + test].iter().map(|w| (*w).clone()));
    }
    out.train.sort();
    out.test.sort();
    Ok(out)
}

fn check_disjoint(split: &Split) -> Result<(), ExperimentError> {
    let train: BTreeSet<&String> = split.train.iter().collect();
    if let Some(w) = split.test.iter().find(|w| train.contains(w)) {
        return Err(ExperimentError::Invariant(format!("writer {w} is in both train and test")));
    }
    Ok(())
}

/// Outcome of one trial: a per-word result and an all-word result for every
/// test writer and channel.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub split: Split,
    pub per_word: BTreeMap<(Channel, String), Vec<ClassificationResult>>,
    pub fused: BTreeMap<Channel, Vec<ClassificationResult>>,
}

impl TrialOutcome {
    fn rate(results: &[ClassificationResult]) -> f64 {
        results.iter().filter(|r| r.is_correct()).count() as f64 / results.len() as f64
    }

    pub fn word_rate(&self, channel: Channel, word: &str) -> Option<f64> {
        self.per_word.get(&(channel, word.to_string())).map(|r| Self::rate(r))
    }

    pub fn fused_rate(&self, channel: Channel) -> Option<f64> {
        self.fused.get(&channel).map(|r| Self::rate(r))
    }
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    mix_all(seed, &[label_tag("trial"), trial as u64])
}

/// Words requested by `cfg`, checked against the store.
pub fn resolve_words(cfg: &ExperimentConfig, store: &FeatureStore) -> Result<Vec<String>, ExperimentError> {
    let available = store.words();
    if cfg.words.is_empty() {
        if available.is_empty() {
            return Err(ExperimentError::Data("dataset holds no recordings".into()));
        }
        return Ok(available);
    }
    for w in &cfg.words {
        if !available.contains(w) {
            return Err(ExperimentError::Data(format!("word {w:?} is missing from the dataset")));
        }
    }
    Ok(cfg.words.clone())
}

/// Runs one trial on precomputed features.
pub fn run_trial(
    cfg: &ExperimentConfig,
    store: &FeatureStore,
    words: &[String],
    trial: usize,
) -> Result<TrialOutcome, ExperimentError> {
    let seed = trial_seed(cfg.seed, trial);
    let split = split_writers(store.writers(), cfg.train_per_gender, cfg.test_per_gender, seed)?;
    check_disjoint(&split)?;

    let training: Vec<&str> = split.train.iter().map(String::as_str).collect();
    let models = words
        .par_iter()
        .map(|w| build_word_model_from_store(store, &training, w, &cfg.model.som, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut set = ModelSet {
        config_digest: cfg.model.digest(),
        words: BTreeMap::new(),
    };
    for m in models {
        set.insert(m);
    }

    let options = ScoreOptions {
        fusion: cfg.fusion,
        up_weight: cfg.up_weight,
    };
    let scored = split
        .test
        .par_iter()
        .map(|w| score_writer(&set, store, w, words, &options))
        .collect::<Result<Vec<_>, _>>()?;

    let mut per_word: BTreeMap<(Channel, String), Vec<ClassificationResult>> = BTreeMap::new();
    let mut fused: BTreeMap<Channel, Vec<ClassificationResult>> = BTreeMap::new();
    for scores in &scored {
        for &channel in &cfg.channels {
            for word in words {
                per_word
                    .entry((channel, word.clone()))
                    .or_default()
                    .push(scores.classify_word(channel, word)?);
            }
            fused.entry(channel).or_default().push(scores.classify(channel)?);
        }
    }
    Ok(TrialOutcome {
        trial,
        seed,
        split,
        per_word,
        fused,
    })
}

/// One table cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateCell {
    pub rate: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub label: String,
    pub trials: Vec<RateCell>,
    pub average: RateCell,
}

/// Word rows, then the all-word row and the average row; trial columns and
/// an average column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTable {
    pub channel: Channel,
    pub n: u64,
    pub r_min: Option<f64>,
    pub rows: Vec<RateRow>,
}

pub const ALL_LABEL: &str = "ALL";
pub const AVG_LABEL: &str = "AVG";

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

impl RateTable {
    fn build(channel: Channel, n: u64, r_min: Option<f64>, words: &[String], trials: &[TrialOutcome]) -> Self {
        let cell = |rate: f64| RateCell {
            rate,
            significant: r_min.is_some_and(|r| rate >= r),
        };
        let row = |label: &str, rates: Vec<f64>| RateRow {
            label: label.to_string(),
            average: cell(mean(&rates)),
            trials: rates.into_iter().map(cell).collect(),
        };
        let mut rows: Vec<RateRow> = words
            .iter()
            .map(|w| {
                let rates = trials
                    .iter()
                    .map(|t| t.word_rate(channel, w).expect("every word scored"))
                    .collect();
                row(w, rates)
            })
            .collect();
        let all = trials
            .iter()
            .map(|t| t.fused_rate(channel).expect("every channel scored"))
            .collect();
        let avg = (0..trials.len())
            .map(|i| mean(&rows.iter().map(|r| r.trials[i].rate).collect::<Vec<_>>()))
            .collect();
        rows.push(row(ALL_LABEL, all));
        rows.push(row(AVG_LABEL, avg));
        Self { channel, n, r_min, rows }
    }

    pub fn row(&self, label: &str) -> Option<&RateRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn word_rows(&self) -> &[RateRow] {
        &self.rows[..self.rows.len() - 2]
    }

    /// Plaintext rendering; significant cells carry a trailing `*`.
    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(3).max(4);
        let trials = self.rows.first().map_or(0, |r| r.trials.len());
        let mut out = String::new();
        let _ = writeln!(out, "Classification rates (%), {} channel, n = {}", self.channel, self.n);
        let _ = write!(out, "{:<width$}", "WORD");
        for t in 1..=trials {
            let _ = write!(out, " {:>8}", format!("T{t}"));
        }
        let _ = writeln!(out, " {:>8}", AVG_LABEL);
        let fmt = |c: &RateCell| format!("{:.1}{}", 100.0 * c.rate, if c.significant { "*" } else { " " });
        for r in &self.rows {
            let _ = write!(out, "{:<width$}", r.label);
            for c in &r.trials {
                let _ = write!(out, " {:>8}", fmt(c));
            }
            let _ = writeln!(out, " {:>8}", fmt(&r.average));
        }
        match self.r_min {
            Some(r) => {
                let _ = writeln!(out, "* rate >= {:.2}% (significant)", 100.0 * r);
            }
            None => {
                let _ = writeln!(out, "no rate is significant at this n");
            }
        }
        out
    }
}

/// Significance of one table row's average rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowReport {
    pub channel: Channel,
    pub label: String,
    pub report: BinomialReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub words: Vec<String>,
    pub trials: Vec<TrialOutcome>,
    pub tables: Vec<RateTable>,
    pub reports: Vec<RowReport>,
    /// Pearson correlation of word length and average rate per channel;
    /// `None` when undefined.
    pub length_correlation: Vec<(Channel, Option<f64>)>,
}

fn word_lengths(cfg: &ExperimentConfig, words: &[String]) -> Vec<f64> {
    words
        .iter()
        .map(|w| {
            let listed = match &cfg.data {
                DataSource::Synth(s) => s.words.iter().find(|x| &x.word == w).map(|x| x.glyphs),
                DataSource::Directory { .. } => None,
            };
            listed.unwrap_or_else(|| w.chars().count()) as f64
        })
        .collect()
}

/// Runs every trial on an already loaded dataset.
pub fn run_experiment_on(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let store = FeatureStore::extract(ds, cfg.model.pipeline)?;
    run_experiment_on_store(cfg, &store)
}

pub fn run_experiment_on_store(cfg: &ExperimentConfig, store: &FeatureStore) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let words = resolve_words(cfg, store)?;
    let mut trials = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        log::info!("trial {}/{}", t + 1, cfg.trials);
        trials.push(run_trial(cfg, store, &words, t)?);
    }

    let n = 2 * cfg.test_per_gender as u64;
    let r_min = stats::min_significant_rate(n, cfg.p_threshold).map(|(_, r)| r);
    let mut tables = Vec::new();
    let mut reports = Vec::new();
    let mut length_correlation = Vec::new();
    let lengths = word_lengths(cfg, &words);
    for &channel in &cfg.channels {
        let table = RateTable::build(channel, n, r_min, &words, &trials);
        for row in &table.rows {
            reports.push(RowReport {
                channel,
                label: row.label.clone(),
                report: BinomialReport::from_rate(n, row.average.rate, cfg.p_threshold)
                    .expect("rates lie in [0, 1]"),
            });
        }
        let rates: Vec<f64> = table.word_rows().iter().map(|r| r.average.rate).collect();
        length_correlation.push((channel, stats::pearson(&lengths, &rates).ok()));
        tables.push(table);
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        words,
        trials,
        tables,
        reports,
        length_correlation,
    })
}

/// Loads or generates the data, then runs every trial.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let ds = cfg.load_data()?;
    run_experiment_on(cfg, &ds)
}

impl ExperimentReport {
    pub fn table(&self, channel: Channel) -> Option<&RateTable> {
        self.tables.iter().find(|t| t.channel == channel)
    }

    /// `channel,row,trial_1..trial_T,avg` with rates in [0, 1].
    pub fn write_rates_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["channel".to_string(), "row".to_string()];
        header.extend((1..=self.trials.len()).map(|t| format!("trial_{t}")));
        header.push("avg".into());
        header.push("avg_significant".into());
        w.write_record(&header)?;
        for table in &self.tables {
            for row in &table.rows {
                let mut rec = vec![table.channel.to_string(), row.label.clone()];
                rec.extend(row.trials.iter().map(|c| c.rate.to_string()));
                rec.push(row.average.rate.to_string());
                rec.push(row.average.significant.to_string());
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_binomial_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["channel", "row"];
        header.extend(BinomialReport::CSV_HEADER);
        w.write_record(&header)?;
        for r in &self.reports {
            let mut rec = vec![r.channel.to_string(), r.label.clone()];
            rec.extend(r.report.csv_fields());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Every per-writer decision, one CSV row each, with the trial number.
    pub fn write_results_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "trial",
            "writer_id",
            "channel",
            "words",
            "male_score",
            "female_score",
            "decision",
            "true_gender",
        ])?;
        for t in &self.trials {
            let rows = t.per_word.values().chain(t.fused.values()).flatten();
            for r in rows {
                w.write_record([
                    (t.trial + 1).to_string(),
                    r.writer.clone(),
                    r.channel.to_string(),
                    r.words.join("+"),
                    format!("{:e}", r.male_score),
                    format!("{:e}", r.female_score),
                    r.decision.name().to_string(),
                    r.true_gender.map_or(String::new(), |g| g.code().to_string()),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// All tables plus significance and length correlation, as plain text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for table in &self.tables {
            out.push_str(&table.render());
            out.push('\n');
        }
        for (channel, r) in &self.length_correlation {
            let _ = match r {
                Some(r) => writeln!(out, "word length vs rate ({channel}): r = {r:.3}"),
                None => writeln!(out, "word length vs rate ({channel}): undefined"),
            };
        }
        out
    }

    /// Writes tables, reports, decisions and the resolved config into `dir`.
    pub fn write_dir(&self, dir: &std::path::Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let to_io = |e: csv::Error| io::Error::other(e.to_string());
        self.write_rates_csv(std::fs::File::create(dir.join("rates.csv"))?)
            .map_err(to_io)?;
        self.write_binomial_csv(std::fs::File::create(dir.join("binomial.csv"))?)
            .map_err(to_io)?;
        self.write_results_csv(std::fs::File::create(dir.join("results.csv"))?)
            .map_err(to_io)?;
        std::fs::write(dir.join("tables.txt"), self.render())?;
        let config = serde_json::to_string_pretty(&self.config).map_err(io::Error::other)?;
        std::fs::write(dir.join("config.json"), config + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::som::SomConfig;

    fn writers(m: usize, f: usize) -> BTreeMap<String, Gender> {
        (0..m)
            .map(|i| (format!("m{i}"), Gender::Male))
            .chain((0..f).map(|i| (format!("f{i}"), Gender::Female)))
            .collect()
    }

    #[test]
    fn split_is_disjoint_balanced_and_seeded() {
        let ws = writers(171, 171);
        let s = split_writers(&ws, 50, 121, 9).unwrap();
        assert_eq!(s.train.len(), 100);
        assert_eq!(s.test.len(), 242);
        check_disjoint(&s).unwrap();
        let females = s.test.iter().filter(|w| ws[*w] == Gender::Female).count();
        assert_eq!(females, 121);
        assert_eq!(s, split_writers(&ws, 50, 121, 9).unwrap());
        assert_ne!(s, split_writers(&ws, 50, 121, 10).unwrap());
    }

    #[test]
    fn unbalanced_pool_is_discarded_down() {
        let ws = writers(199, 171);
        let s = split_writers(&ws, 50, 121, 1).unwrap();
        let males = s.test.iter().filter(|w| ws[*w] == Gender::Male).count();
        assert_eq!(males, 121);
        assert!(split_writers(&writers(170, 171), 50, 121, 1).is_err());
    }

    #[test]
    fn overlap_is_an_invariant_error() {
        let s = Split {
            train: vec!["a".into()],
            test: vec!["a".into()],
        };
        assert!(matches!(check_disjoint(&s), Err(ExperimentError::Invariant(_))));
    }

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            data: DataSource::Synth(
                SynthConfig {
                    writers_per_gender: 6,
                    sessions: 2,
                    separation: 3.0,
                    seed: 3,
                    ..SynthConfig::default()
                }
                .with_words(&["DESPRENDER", "DELEZNABLE"]),
            ),
            train_per_gender: 3,
            test_per_gender: 3,
            trials: 2,
            model: ModelConfig {
                som: SomConfig {
                    target_units: 12,
                    rough_epochs: 4,
                    fine_epochs: 8,
                    ..SomConfig::default()
                },
                ..ModelConfig::default()
            },
            seed: 5,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn table_shape_and_averages() {
        let report = run_experiment(&tiny()).unwrap();
        assert_eq!(report.tables.len(), 3);
        for table in &report.tables {
            assert_eq!(table.rows.len(), 4);
            assert_eq!(table.rows[2].label, ALL_LABEL);
            assert_eq!(table.rows[3].label, AVG_LABEL);
            for row in &table.rows {
                assert_eq!(row.trials.len(), 2);
                let m = mean(&row.trials.iter().map(|c| c.rate).collect::<Vec<_>>());
                assert!((row.average.rate - m).abs() < 1e-12);
            }
            // n = 6 cannot reach significance at 1e-2.
            assert_eq!(table.r_min, None);
            assert!(table.rows.iter().all(|r| !r.average.significant));
        }
        let text = report.render();
        assert!(text.contains("DESPRENDER") && text.contains("ALL"));
    }

    #[test]
    fn experiment_is_deterministic() {
        let a = run_experiment(&tiny()).unwrap();
        let b = run_experiment(&tiny()).unwrap();
        assert_eq!(a.tables, b.tables);
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        a.write_results_csv(&mut ca).unwrap();
        b.write_results_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
    }

    #[test]
    fn training_writers_are_shared_across_words() {
        let cfg = tiny();
        let ds = cfg.load_data().unwrap();
        let store = FeatureStore::extract(&ds, cfg.model.pipeline).unwrap();
        let words = resolve_words(&cfg, &store).unwrap();
        let t = run_trial(&cfg, &store, &words, 0).unwrap();
        for ((_, _), results) in &t.per_word {
            let tested: Vec<&String> = results.iter().map(|r| &r.writer).collect();
            assert!(tested.iter().all(|w| !t.split.train.contains(w)));
            assert_eq!(results.len(), 6);
        }
    }

    #[test]
    fn missing_word_and_bad_config_are_reported() {
        let mut cfg = tiny();
        cfg.words = vec!["NOPE".into()];
        assert!(matches!(run_experiment(&cfg), Err(ExperimentError::Data(_))));
        let mut cfg = tiny();
        cfg.trials = 0;
        assert!(matches!(run_experiment(&cfg), Err(ExperimentError::Config(_))));
        let mut cfg = tiny();
        cfg.test_per_gender = 10;
        assert!(matches!(run_experiment(&cfg), Err(ExperimentError::Data(_))));
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = tiny();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let dir: ExperimentConfig =
            serde_json::from_str(r#"{"data": {"directory": {"root": "d", "manifest": "d/m.csv"}}, "seed": 4}"#)
                .unwrap();
        assert_eq!(dir.train_per_gender, 50);
        assert!(matches!(dir.data, DataSource::Directory { .. }));
    }

    #[test]
    fn outputs_are_written() {
        let report = run_experiment(&tiny()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        report.write_dir(dir.path()).unwrap();
        for f in ["rates.csv", "binomial.csv", "results.csv", "tables.txt", "config.json"] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        let rates = std::fs::read_to_string(dir.path().join("rates.csv")).unwrap();
        assert_eq!(rates.lines().count(), 1 + 3 * 4);
    }
}
