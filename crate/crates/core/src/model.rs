//! Per-word gender codebooks: construction from training writers and the
//! versioned, checksummed text format they are stored in.
//!
//! A word is modelled by four codebooks, one per (gender, stroke kind).
//! On disk they live under `<root>/<word>/<gender>-<kind>.cb` next to an
//! `index.txt` listing the four files and the configuration digest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::seeds::{label_tag, mix_all};
use crate::som::{self, GridSpec, PrototypeSet, SomConfig, SomError};
use crate::stroke::{FeatureError, FeatureStore, PipelineConfig, StrokeKind};
use crate::svc::{Dataset, Gender};

pub const CODEBOOK_MAGIC: &str = "STROKECAST-CB v1";
pub const INDEX_MAGIC: &str = "STROKECAST-MODEL v1";
const INDEX_FILE: &str = "index.txt";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no {kind} strokes from {gender} writers for word {word:?}")]
    NoStrokes {
        word: String,
        gender: Gender,
        kind: StrokeKind,
    },
    #[error(transparent)]
    Som(#[from] SomError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("unsupported model file version: {0:?}")]
    Version(String),
    #[error("checksum mismatch: file says {stored}, content hashes to {computed}")]
    Checksum { stored: String, computed: String },
    #[error("truncated model file: {0}")]
    Truncated(String),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Where a codebook came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub writers: usize,
    pub strokes: usize,
    pub seed: u64,
    pub schedule_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub word: String,
    pub gender: Gender,
    pub kind: StrokeKind,
    pub m: usize,
    pub f: usize,
    pub protos: PrototypeSet,
    pub provenance: Provenance,
}

/// Settings shared by every codebook of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub pipeline: PipelineConfig,
    pub som: SomConfig,
}

impl ModelConfig {
    pub fn digest(&self) -> String {
        short_digest(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

fn short_digest(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

/// Seed for one codebook, derived from the experiment seed.
pub fn codebook_seed(seed: u64, word: &str, gender: Gender, kind: StrokeKind) -> u64 {
    mix_all(seed, &[label_tag(word), label_tag(gender.name()), label_tag(kind.name())])
}

/// Trains one codebook from already extracted stroke vectors.
#[allow(clippy::too_many_arguments)]
pub fn train_codebook(
    word: &str,
    gender: Gender,
    kind: StrokeKind,
    m: usize,
    vectors: &[&[f64]],
    writers: usize,
    som_config: &SomConfig,
    seed: u64,
) -> Result<Codebook, ModelError> {
    if vectors.is_empty() {
        return Err(ModelError::NoStrokes {
            word: word.to_string(),
            gender,
            kind,
        });
    }
    let f = kind.feature_count();
    assert!(
        vectors.iter().all(|v| v.len() == m * f),
        "feature strokes of one kind share a dimension"
    );
    let grid = som::plan_grid(vectors, som_config.target_units);
    let schedule = som_config.schedule_for(&grid);
    let protos = som::train(vectors, &grid, &schedule, seed)?;
    Ok(Codebook {
        word: word.to_string(),
        gender,
        kind,
        m,
        f,
        protos,
        provenance: Provenance {
            writers,
            strokes: vectors.len(),
            seed,
            schedule_digest: short_digest(schedule.describe().as_bytes()),
        },
    })
}

/// Builds one codebook from the strokes of every session of `training`
/// writers whose label is `gender`. Writers of the other gender are ignored.
pub fn build_codebook_from_store(
    store: &FeatureStore,
    training: &[&str],
    word: &str,
    gender: Gender,
    kind: StrokeKind,
    som_config: &SomConfig,
    seed: u64,
) -> Result<Codebook, ModelError> {
    let mut vectors: Vec<&[f64]> = Vec::new();
    let mut writers = 0;
    for &w in training {
        if store.gender_of(w) != Some(gender) {
            continue;
        }
        let mut seen = false;
        for (_, feats) in store.sessions_for(w, word) {
            seen = true;
            vectors.extend(feats.of_kind(kind).iter().map(|s| s.vector.as_slice()));
        }
        if seen {
            writers += 1;
        }
    }
    train_codebook(word, gender, kind, store.config.m, &vectors, writers, som_config, seed)
}

/// Builds one codebook treating every writer in `ds` as a training writer.
pub fn build_codebook(
    ds: &Dataset,
    word: &str,
    gender: Gender,
    kind: StrokeKind,
    config: &ModelConfig,
    seed: u64,
) -> Result<Codebook, ModelError> {
    let store = FeatureStore::extract(ds, config.pipeline)?;
    let writers: Vec<&str> = ds.writers_of(gender).collect();
    build_codebook_from_store(&store, &writers, word, gender, kind, &config.som, seed)
}

/// The four codebooks of one word.
#[derive(Debug, Clone, PartialEq)]
pub struct WordModel {
    pub word: String,
    codebooks: Vec<Codebook>,
}

impl WordModel {
    const CELLS: [(Gender, StrokeKind); 4] = [
        (Gender::Male, StrokeKind::PenDown),
        (Gender::Male, StrokeKind::PenUp),
        (Gender::Female, StrokeKind::PenDown),
        (Gender::Female, StrokeKind::PenUp),
    ];

    pub fn new(word: impl Into<String>, codebooks: Vec<Codebook>) -> Result<Self, ModelError> {
        let word = word.into();
        if codebooks.len() != 4 {
            return Err(ModelError::Format(format!("{} codebooks, expected 4", codebooks.len())));
        }
        let mut ordered = Vec::with_capacity(4);
        for (gender, kind) in Self::CELLS {
            let cb = codebooks
                .iter()
                .find(|c| c.gender == gender && c.kind == kind)
                .ok_or_else(|| ModelError::Format(format!("missing {gender}-{kind} codebook")))?;
            ordered.push(cb.clone());
        }
        let m = ordered[0].m;
        if let Some(cb) = ordered.iter().find(|c| c.word != word || c.m != m) {
            return Err(ModelError::Format(format!(
                "codebook {}-{} has word {:?} and M={}, expected {word:?} and M={m}",
                cb.gender, cb.kind, cb.word, cb.m
            )));
        }
        Ok(Self { word, codebooks: ordered })
    }

    pub fn get(&self, gender: Gender, kind: StrokeKind) -> &Codebook {
        let idx = Self::CELLS
            .iter()
            .position(|&c| c == (gender, kind))
            .expect("all cells present");
        &self.codebooks[idx]
    }

    pub fn codebooks(&self) -> &[Codebook] {
        &self.codebooks
    }

    pub fn m(&self) -> usize {
        self.codebooks[0].m
    }
}

pub fn build_word_model_from_store(
    store: &FeatureStore,
    training: &[&str],
    word: &str,
    som_config: &SomConfig,
    seed: u64,
) -> Result<WordModel, ModelError> {
    let codebooks = WordModel::CELLS
        .par_iter()
        .map(|&(gender, kind)| {
            build_codebook_from_store(
                store,
                training,
                word,
                gender,
                kind,
                som_config,
                codebook_seed(seed, word, gender, kind),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    WordModel::new(word, codebooks)
}

pub fn build_word_model(ds: &Dataset, word: &str, config: &ModelConfig, seed: u64) -> Result<WordModel, ModelError> {
    let store = FeatureStore::extract(ds, config.pipeline)?;
    let writers: Vec<&str> = ds.writers().keys().map(String::as_str).collect();
    build_word_model_from_store(&store, &writers, word, &config.som, seed)
}

/// Word models keyed by word id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelSet {
    pub config_digest: String,
    pub words: BTreeMap<String, WordModel>,
}

impl ModelSet {
    pub fn get(&self, word: &str) -> Option<&WordModel> {
        self.words.get(word)
    }

    pub fn insert(&mut self, model: WordModel) {
        self.words.insert(model.word.clone(), model);
    }
}

/// Renders a codebook in the versioned text format.
pub fn codebook_to_text(cb: &Codebook) -> String {
    let grid = cb.protos.grid();
    let mut out = String::new();
    let _ = writeln!(out, "{CODEBOOK_MAGIC}");
    let _ = writeln!(out, "word: {}", cb.word);
    let _ = writeln!(out, "gender: {}", cb.gender.name());
    let _ = writeln!(out, "kind: {}", cb.kind.name());
    let _ = writeln!(out, "M: {}", cb.m);
    let _ = writeln!(out, "F: {}", cb.f);
    let _ = writeln!(out, "rows: {}", grid.rows);
    let _ = writeln!(out, "cols: {}", grid.cols);
    let _ = writeln!(out, "seed: {}", cb.provenance.seed);
    let _ = writeln!(out, "writers: {}", cb.provenance.writers);
    let _ = writeln!(out, "strokes: {}", cb.provenance.strokes);
    let _ = writeln!(out, "schedule: {}", cb.provenance.schedule_digest);
    for proto in cb.protos.prototypes() {
        let line: Vec<String> = proto.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    let checksum = hex::encode(Sha256::digest(out.as_bytes()));
    let _ = writeln!(out, "checksum: {checksum}");
    out
}

fn header<'a>(lines: &mut impl Iterator<Item = &'a str>, key: &str) -> Result<&'a str, ModelError> {
    let line = lines
        .next()
        .ok_or_else(|| ModelError::Truncated(format!("missing {key:?} header")))?;
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(": "))
        .ok_or_else(|| ModelError::Format(format!("expected {key:?} header, found {line:?}")))
}

fn number<T: std::str::FromStr>(value: &str, key: &str) -> Result<T, ModelError> {
    value
        .parse()
        .map_err(|_| ModelError::Format(format!("{key}: {value:?} is not a number")))
}

/// Parses and verifies a codebook file.
pub fn codebook_from_text(text: &str) -> Result<Codebook, ModelError> {
    let magic = text.lines().next().unwrap_or("");
    if magic != CODEBOOK_MAGIC {
        return Err(ModelError::Version(magic.to_string()));
    }
    let body_end = text
        .trim_end_matches('\n')
        .rfind('\n')
        .map(|i| i + 1)
        .ok_or_else(|| ModelError::Truncated("no checksum line".into()))?;
    let (body, tail) = text.split_at(body_end);
    let stored = tail
        .trim_end_matches('\n')
        .strip_prefix("checksum: ")
        .ok_or_else(|| ModelError::Truncated("no checksum line".into()))?;
    let computed = hex::encode(Sha256::digest(body.as_bytes()));
    if stored != computed {
        return Err(ModelError::Checksum {
            stored: stored.to_string(),
            computed,
        });
    }

    let mut lines = body.lines().skip(1);
    let word = header(&mut lines, "word")?.to_string();
    let gender = header(&mut lines, "gender")?
        .parse::<Gender>()
        .map_err(ModelError::Format)?;
    let kind_name = header(&mut lines, "kind")?;
    let kind = StrokeKind::from_name(kind_name)
        .ok_or_else(|| ModelError::Format(format!("unknown stroke kind {kind_name:?}")))?;
    let m: usize = number(header(&mut lines, "M")?, "M")?;
    let f: usize = number(header(&mut lines, "F")?, "F")?;
    let rows: usize = number(header(&mut lines, "rows")?, "rows")?;
    let cols: usize = number(header(&mut lines, "cols")?, "cols")?;
    let seed: u64 = number(header(&mut lines, "seed")?, "seed")?;
    let writers: usize = number(header(&mut lines, "writers")?, "writers")?;
    let strokes: usize = number(header(&mut lines, "strokes")?, "strokes")?;
    let schedule_digest = header(&mut lines, "schedule")?.to_string();
    if f != kind.feature_count() {
        return Err(ModelError::Format(format!("F={f} does not match {kind} strokes")));
    }
    if rows == 0 || cols == 0 {
        return Err(ModelError::Format("empty grid".into()));
    }

    let dim = m * f;
    let mut values = Vec::with_capacity(rows * cols * dim);
    let mut count = 0;
    for line in lines {
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(number::<f64>(tok, "prototype")?);
        }
        if values.len() - before != dim {
            return Err(ModelError::Format(format!(
                "prototype {count} has {} values, expected {dim}",
                values.len() - before
            )));
        }
        count += 1;
    }
    if count != rows * cols {
        return Err(ModelError::Truncated(format!(
            "{count} prototypes, expected {}",
            rows * cols
        )));
    }
    let protos = PrototypeSet::new(GridSpec::new(rows, cols), dim, values)?;
    Ok(Codebook {
        word,
        gender,
        kind,
        m,
        f,
        protos,
        provenance: Provenance {
            writers,
            strokes,
            seed,
            schedule_digest,
        },
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn codebook_file(gender: Gender, kind: StrokeKind) -> String {
    format!("{}-{}.cb", gender.name(), kind.name())
}

/// Writes `<dir>/<gender>-<kind>.cb` for all four codebooks plus the index.
pub fn save_model(model: &WordModel, dir: &Path, config_digest: &str) -> Result<(), ModelError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut index = format!("{INDEX_MAGIC}\nword: {}\nconfig: {config_digest}\n", model.word);
    for cb in model.codebooks() {
        let name = codebook_file(cb.gender, cb.kind);
        let path = dir.join(&name);
        fs::write(&path, codebook_to_text(cb)).map_err(io_err(&path))?;
        index.push_str(&name);
        index.push('\n');
    }
    let path = dir.join(INDEX_FILE);
    fs::write(&path, index).map_err(io_err(&path))
}

/// Reads a word model written by [`save_model`], returning it with the
/// recorded configuration digest.
pub fn load_model(dir: &Path) -> Result<(WordModel, String), ModelError> {
    let path = dir.join(INDEX_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut lines = text.lines();
    let magic = lines.next().unwrap_or("");
    if magic != INDEX_MAGIC {
        return Err(ModelError::Version(magic.to_string()));
    }
    let word = header(&mut lines, "word")?.to_string();
    let digest = header(&mut lines, "config")?.to_string();
    let mut codebooks = Vec::new();
    for name in lines.filter(|l| !l.trim().is_empty()) {
        let path = dir.join(name);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        codebooks.push(codebook_from_text(&text)?);
    }
    Ok((WordModel::new(word, codebooks)?, digest))
}

pub fn save_model_set(set: &ModelSet, root: &Path) -> Result<(), ModelError> {
    for (word, model) in &set.words {
        save_model(model, &root.join(word), &set.config_digest)?;
    }
    Ok(())
}

/// Loads every `<root>/<word>/` directory holding an index file.
pub fn load_model_set(root: &Path) -> Result<ModelSet, ModelError> {
    let mut set = ModelSet::default();
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(io_err(root))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(INDEX_FILE).is_file())
        .collect();
    dirs.sort();
    for dir in dirs {
        let (model, digest) = load_model(&dir)?;
        if !set.config_digest.is_empty() && set.config_digest != digest {
            return Err(ModelError::Format(format!(
                "{} was trained with config {digest}, others with {}",
                dir.display(),
                set.config_digest
            )));
        }
        set.config_digest = digest;
        set.insert(model);
    }
    Ok(set)
}
