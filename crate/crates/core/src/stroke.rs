//! Pen-down / pen-up stroke segmentation and fixed-length feature vectors.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::svc::{Dataset, Gender, PenSample, RecordingKey, WordRecording};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StrokeKind {
    PenDown,
    PenUp,
}

impl StrokeKind {
    pub const BOTH: [StrokeKind; 2] = [StrokeKind::PenDown, StrokeKind::PenUp];

    /// Number of selected feature channels: x, y, pressure for pen-down;
    /// x, y for pen-up.
    pub fn feature_count(self) -> usize {
        match self {
            StrokeKind::PenDown => 3,
            StrokeKind::PenUp => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StrokeKind::PenDown => "down",
            StrokeKind::PenUp => "up",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "down" | "PenDown" => Some(StrokeKind::PenDown),
            "up" | "PenUp" => Some(StrokeKind::PenUp),
            _ => None,
        }
    }
}

impl fmt::Display for StrokeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A maximal run of samples with constant button status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stroke<'a> {
    pub kind: StrokeKind,
    /// Inclusive sample indices within the source recording.
    pub span: (usize, usize),
    pub points: &'a [PenSample],
}

/// A run that was too short to become a stroke.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DroppedRun {
    pub kind: StrokeKind,
    pub span: (usize, usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Segmentation<'a> {
    pub pen_down: Vec<Stroke<'a>>,
    pub pen_up: Vec<Stroke<'a>>,
    pub dropped: Vec<DroppedRun>,
}

/// Splits a recording at every button-status change. Runs shorter than
/// `min_points` are dropped; leading and trailing pen-up runs are kept.
pub fn segment(recording: &WordRecording, min_points: usize) -> Segmentation<'_> {
    let samples = recording.samples();
    let min_points = min_points.max(2);
    let mut seg = Segmentation::default();
    let mut start = 0;
    while start < samples.len() {
        let bs = samples[start].bs;
        let len = samples[start..].iter().take_while(|s| s.bs == bs).count();
        let end = start + len - 1;
        let kind = if bs == 1 { StrokeKind::PenDown } else { StrokeKind::PenUp };
        if len >= min_points {
            let stroke = Stroke {
                kind,
                span: (start, end),
                points: &samples[start..=end],
            };
            match kind {
                StrokeKind::PenDown => seg.pen_down.push(stroke),
                StrokeKind::PenUp => seg.pen_up.push(stroke),
            }
        } else {
            seg.dropped.push(DroppedRun { kind, span: (start, end) });
        }
        start = end + 1;
    }
    seg
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("resample length must be at least 2, got {0}")]
    ResampleLength(usize),
    #[error("stroke has {0} points, at least 2 are needed")]
    ShortStroke(usize),
}

/// Linear interpolation of `values` at `m` evenly spaced positions along the
/// sample-index axis. First and last values are reproduced exactly.
pub fn resample_channel(values: &[f64], m: usize) -> Result<Vec<f64>, FeatureError> {
    if m < 2 {
        return Err(FeatureError::ResampleLength(m));
    }
    let n = values.len();
    if n < 2 {
        return Err(FeatureError::ShortStroke(n));
    }
    let last = n - 1;
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        // Exact rational position j*(n-1)/(m-1), split into integer and fraction.
        let num = j * last;
        let i = num / (m - 1);
        let rem = num % (m - 1);
        if rem == 0 {
            out.push(values[i]);
        } else {
            let t = rem as f64 / (m - 1) as f64;
            out.push(values[i] + (values[i + 1] - values[i]) * t);
        }
    }
    Ok(out)
}

/// Selected feature channels of a stroke, one `Vec` per channel.
pub fn select_channels(stroke: &Stroke<'_>) -> Vec<Vec<f64>> {
    let pts = stroke.points;
    let x = pts.iter().map(|p| p.x as f64).collect();
    let y = pts.iter().map(|p| p.y as f64).collect();
    match stroke.kind {
        StrokeKind::PenDown => vec![x, y, pts.iter().map(|p| p.pr as f64).collect()],
        StrokeKind::PenUp => vec![x, y],
    }
}

/// Resamples every selected channel of `stroke` to `m` points.
pub fn resample(stroke: &Stroke<'_>, m: usize) -> Result<Vec<Vec<f64>>, FeatureError> {
    select_channels(stroke)
        .iter()
        .map(|c| resample_channel(c, m))
        .collect()
}

/// Z-normalizes a channel using the population standard deviation.
/// A constant channel maps to all zeros.
pub fn normalize(channel: &[f64]) -> Vec<f64> {
    let Some(&first) = channel.first() else {
        return Vec::new();
    };
    if channel.iter().all(|&v| v == first) {
        return vec![0.0; channel.len()];
    }
    let n = channel.len() as f64;
    let mean = channel.iter().sum::<f64>() / n;
    // Second centring pass removes the rounding left in `mean`.
    let shifted: Vec<f64> = channel.iter().map(|v| v - mean).collect();
    let residual = shifted.iter().sum::<f64>() / n;
    let centred: Vec<f64> = shifted.iter().map(|d| d - residual).collect();
    let var = centred.iter().map(|d| d * d).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd == 0.0 {
        return vec![0.0; channel.len()];
    }
    centred.iter().map(|d| d / sd).collect()
}

/// A resampled, normalized stroke flattened point-major:
/// `[p0.f0, p0.f1, .., p1.f0, ..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStroke {
    pub kind: StrokeKind,
    pub m: usize,
    pub f: usize,
    pub vector: Vec<f64>,
}

impl FeatureStroke {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    /// Debug dump line: `kind M F v0,v1,...` with 9 significant digits.
    pub fn dump_line(&self) -> String {
        let values: Vec<String> = self.vector.iter().map(|v| format!("{v:.8e}")).collect();
        format!("{} {} {} {}", self.kind, self.m, self.f, values.join(","))
    }
}

pub fn to_feature_stroke(stroke: &Stroke<'_>, m: usize) -> Result<FeatureStroke, FeatureError> {
    let channels: Vec<Vec<f64>> = resample(stroke, m)?.iter().map(|c| normalize(c)).collect();
    let f = channels.len();
    let mut vector = Vec::with_capacity(m * f);
    for j in 0..m {
        vector.extend(channels.iter().map(|c| c[j]));
    }
    Ok(FeatureStroke {
        kind: stroke.kind,
        m,
        f,
        vector,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Resample length per stroke.
    pub m: usize,
    pub min_points: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { m: 16, min_points: 2 }
    }
}

/// Feature strokes of one word execution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordFeatures {
    pub pen_down: Vec<FeatureStroke>,
    pub pen_up: Vec<FeatureStroke>,
    pub dropped: usize,
}

impl WordFeatures {
    pub fn of_kind(&self, kind: StrokeKind) -> &[FeatureStroke] {
        match kind {
            StrokeKind::PenDown => &self.pen_down,
            StrokeKind::PenUp => &self.pen_up,
        }
    }
}

pub fn extract_features(recording: &WordRecording, cfg: &PipelineConfig) -> Result<WordFeatures, FeatureError> {
    let seg = segment(recording, cfg.min_points);
    let convert = |strokes: &[Stroke<'_>]| -> Result<Vec<FeatureStroke>, FeatureError> {
        strokes.iter().map(|s| to_feature_stroke(s, cfg.m)).collect()
    };
    Ok(WordFeatures {
        pen_down: convert(&seg.pen_down)?,
        pen_up: convert(&seg.pen_up)?,
        dropped: seg.dropped.len(),
    })
}

/// Precomputed features for every recording of a dataset, along with the
/// writers' gender labels.
#[derive(Debug, Clone, Default)]
pub struct FeatureStore {
    pub config: PipelineConfig,
    writers: BTreeMap<String, Gender>,
    features: BTreeMap<RecordingKey, WordFeatures>,
}

impl FeatureStore {
    pub fn extract(ds: &Dataset, config: PipelineConfig) -> Result<Self, FeatureError> {
        use rayon::prelude::*;
        let entries: Vec<(&RecordingKey, &WordRecording)> = ds.recordings().iter().collect();
        let features = entries
            .par_iter()
            .map(|(k, r)| extract_features(r, &config).map(|f| ((*k).clone(), f)))
            .collect::<Result<BTreeMap<_, _>, _>>()?;
        Ok(Self {
            config,
            writers: ds.writers().clone(),
            features,
        })
    }

    /// An empty store, filled with [`FeatureStore::insert`].
    pub fn new(config: PipelineConfig) -> Self {
        Self {
            config,
            ..Self::default()
        }
    }

    pub fn insert(&mut self, key: RecordingKey, gender: Gender, features: WordFeatures) {
        self.writers.insert(key.writer.clone(), gender);
        self.features.insert(key, features);
    }

    pub fn writers(&self) -> &BTreeMap<String, Gender> {
        &self.writers
    }

    pub fn gender_of(&self, writer: &str) -> Option<Gender> {
        self.writers.get(writer).copied()
    }

    pub fn get(&self, key: &RecordingKey) -> Option<&WordFeatures> {
        self.features.get(key)
    }

    /// Per-session features of one writer for one word, in session order.
    pub fn sessions_for<'a>(
        &'a self,
        writer: &'a str,
        word: &'a str,
    ) -> impl Iterator<Item = (u32, &'a WordFeatures)> + 'a {
        let lo = RecordingKey::new(writer, 0, "");
        self.features
            .range(lo..)
            .take_while(move |(k, _)| k.writer == writer)
            .filter(move |(k, _)| k.word == word)
            .map(|(k, f)| (k.session, f))
    }

    pub fn words(&self) -> Vec<String> {
        let mut words: Vec<String> = self.features.keys().map(|k| k.word.clone()).collect();
        words.sort();
        words.dedup();
        words
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}
