//! Distortion-based gender decisions.
//!
//! A test writer's strokes are quantized with the male and the female
//! codebooks of each word. Per-stroke BMU distances are summed per session,
//! the sessions are fused, pen-down and pen-up scores are optionally added,
//! and the words are summed. The gender with the smaller total wins.

use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Codebook, ModelSet};
use crate::som::{self, SomError};
use crate::stroke::{FeatureError, FeatureStore, FeatureStroke, PipelineConfig, StrokeKind};
use crate::svc::{Dataset, Gender};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("writer {0:?} is not in the dataset")]
    UnknownWriter(String),
    #[error("writer {writer:?} has no recording of word {word:?}")]
    MissingWord { writer: String, word: String },
    #[error("no model for word {0:?}")]
    MissingModel(String),
    #[error("{found} stroke given to a {expected} codebook")]
    KindMismatch { expected: StrokeKind, found: StrokeKind },
    #[error("stroke dimension {found} does not match codebook dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("writer {0:?} has no pen-up strokes in any session; pen-up classification impossible")]
    NoPenUpEvidence(String),
    #[error("cannot fuse an empty list")]
    Empty,
    #[error("no words requested")]
    NoWords,
    #[error(transparent)]
    Som(#[from] SomError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    #[serde(rename = "down")]
    DownOnly,
    #[serde(rename = "up")]
    UpOnly,
    Combined,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::DownOnly, Channel::UpOnly, Channel::Combined];

    pub fn name(self) -> &'static str {
        match self {
            Channel::DownOnly => "down",
            Channel::UpOnly => "up",
            Channel::Combined => "combined",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "down" => Ok(Channel::DownOnly),
            "up" => Ok(Channel::UpOnly),
            "combined" => Ok(Channel::Combined),
            other => Err(format!("unknown channel {other:?} (down, up, combined)")),
        }
    }
}

/// How the per-session distortions of one word are reduced to one value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionFusion {
    #[default]
    Sum,
    Average,
    Max,
    Min,
}

impl FromStr for SessionFusion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(SessionFusion::Sum),
            "average" => Ok(SessionFusion::Average),
            "max" => Ok(SessionFusion::Max),
            "min" => Ok(SessionFusion::Min),
            other => Err(format!("unknown session fusion {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Male,
    Female,
    Tie,
}

impl Decision {
    pub fn from_scores(male: f64, female: f64) -> Self {
        if male < female {
            Decision::Male
        } else if female < male {
            Decision::Female
        } else {
            Decision::Tie
        }
    }

    /// Ties never count as correct.
    pub fn is_correct(self, truth: Gender) -> bool {
        matches!(
            (self, truth),
            (Decision::Male, Gender::Male) | (Decision::Female, Gender::Female)
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Decision::Male => "male",
            Decision::Female => "female",
            Decision::Tie => "tie",
        }
    }
}

/// Sum of BMU distances of `strokes` in `cb`. An empty list scores 0.
pub fn word_distortion(cb: &Codebook, strokes: &[FeatureStroke]) -> Result<f64, ClassifyError> {
    if strokes.is_empty() {
        log::warn!(
            "no {} strokes to quantize for word {:?}; distortion 0",
            cb.kind,
            cb.word
        );
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in strokes {
        if s.kind != cb.kind {
            return Err(ClassifyError::KindMismatch {
                expected: cb.kind,
                found: s.kind,
            });
        }
        if s.dim() != cb.protos.dim() {
            return Err(ClassifyError::DimensionMismatch {
                expected: cb.protos.dim(),
                found: s.dim(),
            });
        }
        total += som::bmu(&cb.protos, &s.vector)?.1;
    }
    Ok(total)
}

pub fn fuse_sessions(per_session: &[f64], strategy: SessionFusion) -> Result<f64, ClassifyError> {
    if per_session.is_empty() {
        return Err(ClassifyError::Empty);
    }
    let sum = || per_session.iter().sum::<f64>();
    Ok(match strategy {
        SessionFusion::Sum => sum(),
        SessionFusion::Average => sum() / per_session.len() as f64,
        SessionFusion::Max => per_session.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        SessionFusion::Min => per_session.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

pub fn combine_channels(down: f64, up: f64) -> f64 {
    down + up
}

pub fn combine_words(per_word: &[f64]) -> Result<f64, ClassifyError> {
    if per_word.is_empty() {
        return Err(ClassifyError::Empty);
    }
    Ok(per_word.iter().sum())
}

/// One codebook's distortion on one session of one word.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionRecord {
    pub writer: String,
    pub word: String,
    pub session: u32,
    pub gender: Gender,
    pub kind: StrokeKind,
    pub distortion: f64,
    pub stroke_count: usize,
}

/// Session-fused distortions of one word, indexed `[gender][kind]`
/// with male/pen-down first.
#[derive(Debug, Clone, PartialEq)]
pub struct WordScores {
    pub word: String,
    pub fused: [[f64; 2]; 2],
    pub strokes: [usize; 2],
}

fn gi(g: Gender) -> usize {
    match g {
        Gender::Male => 0,
        Gender::Female => 1,
    }
}

fn ki(k: StrokeKind) -> usize {
    match k {
        StrokeKind::PenDown => 0,
        StrokeKind::PenUp => 1,
    }
}

impl WordScores {
    pub fn get(&self, gender: Gender, kind: StrokeKind) -> f64 {
        self.fused[gi(gender)][ki(kind)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreOptions {
    pub fusion: SessionFusion,
    /// Weight of the pen-up score in the combined channel. Unweighted (1.0)
    /// unless deliberately changed.
    pub up_weight: f64,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            fusion: SessionFusion::Sum,
            up_weight: 1.0,
        }
    }
}

/// All distortion evidence gathered for one writer.
#[derive(Debug, Clone, PartialEq)]
pub struct WriterScores {
    pub writer: String,
    pub true_gender: Option<Gender>,
    pub words: Vec<WordScores>,
    pub records: Vec<DistortionRecord>,
    pub up_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub writer: String,
    pub channel: Channel,
    pub words: Vec<String>,
    pub male_score: f64,
    pub female_score: f64,
    pub decision: Decision,
    pub true_gender: Option<Gender>,
}

impl ClassificationResult {
    pub fn is_correct(&self) -> bool {
        self.true_gender.is_some_and(|g| self.decision.is_correct(g))
    }
}

/// Quantizes every session of every requested word against both genders'
/// codebooks of both stroke kinds.
pub fn score_writer(
    models: &ModelSet,
    store: &FeatureStore,
    writer: &str,
    words: &[String],
    options: &ScoreOptions,
) -> Result<WriterScores, ClassifyError> {
    let true_gender = store.gender_of(writer);
    if true_gender.is_none() {
        return Err(ClassifyError::UnknownWriter(writer.to_string()));
    }
    if words.is_empty() {
        return Err(ClassifyError::NoWords);
    }
    let mut out = WriterScores {
        writer: writer.to_string(),
        true_gender,
        words: Vec::with_capacity(words.len()),
        records: Vec::new(),
        up_weight: options.up_weight,
    };
    for word in words {
        let model = models
            .get(word)
            .ok_or_else(|| ClassifyError::MissingModel(word.clone()))?;
        let sessions: Vec<_> = store.sessions_for(writer, word).collect();
        if sessions.is_empty() {
            return Err(ClassifyError::MissingWord {
                writer: writer.to_string(),
                word: word.clone(),
            });
        }
        let mut scores = WordScores {
            word: word.clone(),
            fused: [[0.0; 2]; 2],
            strokes: [0; 2],
        };
        for kind in StrokeKind::BOTH {
            scores.strokes[ki(kind)] = sessions.iter().map(|(_, f)| f.of_kind(kind).len()).sum();
            for gender in Gender::BOTH {
                let cb = model.get(gender, kind);
                let mut per_session = Vec::with_capacity(sessions.len());
                for (session, feats) in &sessions {
                    let strokes = feats.of_kind(kind);
                    let distortion = word_distortion(cb, strokes)?;
                    per_session.push(distortion);
                    out.records.push(DistortionRecord {
                        writer: writer.to_string(),
                        word: word.clone(),
                        session: *session,
                        gender,
                        kind,
                        distortion,
                        stroke_count: strokes.len(),
                    });
                }
                scores.fused[gi(gender)][ki(kind)] = fuse_sessions(&per_session, options.fusion)?;
            }
        }
        out.words.push(scores);
    }
    Ok(out)
}

impl WriterScores {
    fn channel_score(&self, channel: Channel, gender: Gender, words: &[&WordScores]) -> Result<f64, ClassifyError> {
        let kind_total = |kind: StrokeKind| -> Result<f64, ClassifyError> {
            let per_word: Vec<f64> = words.iter().map(|w| w.get(gender, kind)).collect();
            combine_words(&per_word)
        };
        Ok(match channel {
            Channel::DownOnly => kind_total(StrokeKind::PenDown)?,
            Channel::UpOnly => kind_total(StrokeKind::PenUp)?,
            Channel::Combined => {
                let up = kind_total(StrokeKind::PenUp)?;
                let up = if self.up_weight == 1.0 { up } else { self.up_weight * up };
                combine_channels(kind_total(StrokeKind::PenDown)?, up)
            }
        })
    }

    /// Decision over all scored words.
    pub fn classify(&self, channel: Channel) -> Result<ClassificationResult, ClassifyError> {
        let all: Vec<&WordScores> = self.words.iter().collect();
        self.classify_subset(channel, &all)
    }

    /// Decision over a single scored word.
    pub fn classify_word(&self, channel: Channel, word: &str) -> Result<ClassificationResult, ClassifyError> {
        let ws = self
            .words
            .iter()
            .find(|w| w.word == word)
            .ok_or_else(|| ClassifyError::MissingWord {
                writer: self.writer.clone(),
                word: word.to_string(),
            })?;
        self.classify_subset(channel, &[ws])
    }

    fn classify_subset(&self, channel: Channel, words: &[&WordScores]) -> Result<ClassificationResult, ClassifyError> {
        if channel == Channel::UpOnly && words.iter().all(|w| w.strokes[1] == 0) {
            return Err(ClassifyError::NoPenUpEvidence(self.writer.clone()));
        }
        let male_score = self.channel_score(channel, Gender::Male, words)?;
        let female_score = self.channel_score(channel, Gender::Female, words)?;
        Ok(ClassificationResult {
            writer: self.writer.clone(),
            channel,
            words: words.iter().map(|w| w.word.clone()).collect(),
            male_score,
            female_score,
            decision: Decision::from_scores(male_score, female_score),
            true_gender: self.true_gender,
        })
    }
}

/// Classifies one writer of `ds` with the given models. `ds` must hold the
/// same words the models were trained on.
pub fn classify_writer(
    models: &ModelSet,
    ds: &Dataset,
    writer: &str,
    channel: Channel,
    words: &[String],
    fusion: SessionFusion,
) -> Result<ClassificationResult, ClassifyError> {
    let gender = ds
        .gender_of(writer)
        .ok_or_else(|| ClassifyError::UnknownWriter(writer.to_string()))?;
    let m = words
        .first()
        .and_then(|w| models.get(w))
        .map(|model| model.m())
        .ok_or(ClassifyError::NoWords)?;
    let mut single = Dataset::new();
    single.add_writer(writer, gender).expect("fresh dataset");
    for (key, rec) in ds.recordings().iter().filter(|(k, _)| k.writer == writer) {
        single
            .add_recording(key.clone(), rec.clone())
            .expect("keys come from a valid dataset");
    }
    let store = FeatureStore::extract(&single, PipelineConfig { m, ..PipelineConfig::default() })?;
    let options = ScoreOptions {
        fusion,
        ..ScoreOptions::default()
    };
    score_writer(models, &store, writer, words, &options)?.classify(channel)
}

pub fn write_results_csv<W: io::Write>(results: &[ClassificationResult], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "writer_id",
        "channel",
        "words",
        "male_score",
        "female_score",
        "decision",
        "true_gender",
    ])?;
    for r in results {
        w.write_record([
            r.writer.clone(),
            r.channel.name().to_string(),
            r.words.join(";"),
            r.male_score.to_string(),
            r.female_score.to_string(),
            r.decision.name().to_string(),
            r.true_gender.map_or(String::new(), |g| g.code().to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
