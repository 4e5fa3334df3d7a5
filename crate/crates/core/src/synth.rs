//! Seeded synthetic handwriting in SVC form.
//!
//! Every letter has fixed stroke templates (cubic Bézier curves inside a
//! glyph box), so all writers produce the same text with the same stroke
//! structure. Writers differ through a handful of latent traits, drawn once
//! per writer and perturbed per session:
//!
//! * roundness: how far each pen-down stroke bulges away from its chord;
//! * pressure skew: where along the stroke the pressure peak sits;
//! * lift curvature: how strongly pen-up transitions arc.
//!
//! The traits also vary between the words of one writer (`word_jitter`), so
//! each word carries partly independent evidence.
//!
//! Each trait is centred at `-separation/2` for male writers and
//! `+separation/2` for female writers, with `writer_jitter` as the
//! between-writer spread in the same units. At zero separation both
//! genders are identically distributed.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classifier::Channel;
use crate::experiment::{run_experiment, DataSource, ExperimentConfig, ExperimentError, ALL_LABEL, AVG_LABEL};
use crate::seeds::{label_tag, mix_all};
use crate::svc::{Dataset, Gender, PenSample, RecordingKey, WordRecording};

/// A word and the glyph count it is rendered with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSpec {
    pub word: String,
    pub glyphs: usize,
}

/// The sixteen uppercase words of the reference protocol with their
/// listed lengths.
pub fn default_words() -> Vec<WordSpec> {
    [
        ("BIODEGRADABLE", 12),
        ("DELEZNABLE", 10),
        ("DESAPROVECHAMIENTO", 18),
        ("DESBRIZNAR", 10),
        ("DESLUMBRAMIENTO", 15),
        ("DESPEDAZAMIENTO", 15),
        ("DESPRENDER", 10),
        ("ENGUALDRAPAR", 12),
        ("EXPRESIVIDAD", 12),
        ("IMPENETRABLE", 12),
        ("INEXPUGNABLE", 12),
        ("INFATIGABLE", 11),
        ("INGOBERNABLE", 12),
        ("MANSEDUMBRE", 11),
        ("ZAFARRANCHO", 11),
        ("ZARRAPASTROSA", 13),
    ]
    .into_iter()
    .map(|(word, glyphs)| WordSpec {
        word: word.to_string(),
        glyphs,
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub words: Vec<WordSpec>,
    pub writers_per_gender: usize,
    pub sessions: u32,
    /// Distance between the male and female trait means, in trait units.
    pub separation: f64,
    /// Between-writer standard deviation of each trait.
    pub writer_jitter: f64,
    /// Standard deviation of each trait between the words of one writer.
    pub word_jitter: f64,
    /// Between-session standard deviation of each trait, per writer and word.
    pub session_jitter: f64,
    /// Mean pen-down strokes per glyph (at least 1).
    pub strokes_per_glyph: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            words: default_words(),
            writers_per_gender: 171,
            sessions: 4,
            separation: 1.0,
            writer_jitter: 0.5,
            word_jitter: 0.3,
            session_jitter: 0.15,
            strokes_per_glyph: 1.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Keeps only the named words, in the given order.
    pub fn with_words(mut self, words: &[&str]) -> Self {
        self.words.retain(|w| words.contains(&w.word.as_str()));
        self.words
            .sort_by_key(|w| words.iter().position(|x| *x == w.word).unwrap_or(usize::MAX));
        self
    }

    /// Writer ids in generation order with their genders. Genders alternate
    /// so neither is favoured by id order.
    pub fn writers(&self) -> Vec<(String, Gender)> {
        (0..2 * self.writers_per_gender)
            .map(|i| {
                let gender = if i % 2 == 0 { Gender::Male } else { Gender::Female };
                (format!("u{i:04}"), gender)
            })
            .collect()
    }

    /// Pen-down stroke count of glyph `i`; evenly spreads the fractional
    /// part of `strokes_per_glyph` along the word.
    pub fn glyph_strokes(&self, i: usize) -> usize {
        let k = self.strokes_per_glyph.max(1.0);
        ((i + 1) as f64 * k + 1e-9).floor() as usize - (i as f64 * k + 1e-9).floor() as usize
    }

    pub fn pen_down_strokes(&self, glyphs: usize) -> usize {
        (0..glyphs).map(|i| self.glyph_strokes(i)).sum()
    }
}

const TEMPLATE_SEED: u64 = 0x5EED_0F1E_77E5;
const GLYPH_W: f64 = 700.0;
const GLYPH_H: f64 = 1200.0;
const ADVANCE: f64 = 900.0;
const MAX_XY: i32 = 20_000;
const MAX_PR: i32 = 1024;
const SAMPLE_DT: i64 = 10;

type Pt = (f64, f64);

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Control polygon of one template stroke, in glyph-box coordinates.
fn template_stroke(letter: char, strokes: usize, index: usize) -> [Pt; 4] {
    let tag = mix_all(TEMPLATE_SEED, &[letter as u64, strokes as u64, index as u64]);
    let mut rng = ChaCha8Rng::seed_from_u64(tag);
    loop {
        let mut pts = [(0.0, 0.0); 4];
        for p in pts.iter_mut() {
            *p = (rng.random_range(0.0..GLYPH_W), rng.random_range(0.0..GLYPH_H));
        }
        let chord = ((pts[3].0 - pts[0].0).powi(2) + (pts[3].1 - pts[0].1).powi(2)).sqrt();
        if chord >= 350.0 {
            return pts;
        }
    }
}

fn bezier(p: &[Pt; 4], s: f64) -> Pt {
    let u = 1.0 - s;
    let (a, b, c, d) = (u * u * u, 3.0 * u * u * s, 3.0 * u * s * s, s * s * s);
    (
        a * p[0].0 + b * p[1].0 + c * p[2].0 + d * p[3].0,
        a * p[0].1 + b * p[1].1 + c * p[2].1 + d * p[3].1,
    )
}

fn polygon_length(p: &[Pt]) -> f64 {
    p.windows(2)
        .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
        .sum()
}

/// Latent traits and habits of one writer.
#[derive(Debug, Clone)]
struct WriterStyle {
    roundness: f64,
    pressure_skew: f64,
    lift: f64,
    pressure_base: f64,
    pressure_amp: f64,
    slant: f64,
    size: f64,
    speed: f64,
    origin: Pt,
    azimuth: f64,
    altitude: f64,
}

impl WriterStyle {
    fn draw(cfg: &SynthConfig, index: usize, gender: Gender) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_all(cfg.seed, &[label_tag("writer"), index as u64]));
        let centre = match gender {
            Gender::Male => -0.5 * cfg.separation,
            Gender::Female => 0.5 * cfg.separation,
        };
        let trait_value = |rng: &mut ChaCha8Rng| centre + cfg.writer_jitter * normal(rng);
        let roundness = trait_value(&mut rng);
        let pressure_skew = trait_value(&mut rng);
        let lift = trait_value(&mut rng);
        Self {
            roundness,
            pressure_skew,
            lift,
            pressure_base: (350.0 + 60.0 * normal(&mut rng)).clamp(100.0, 600.0),
            pressure_amp: (300.0 + 50.0 * normal(&mut rng)).clamp(100.0, 420.0),
            slant: 0.1 * normal(&mut rng),
            size: (0.08 * normal(&mut rng)).exp().clamp(0.8, 1.2),
            speed: 35.0 * (0.15 * normal(&mut rng)).exp(),
            origin: (600.0 + 100.0 * normal(&mut rng), 3000.0 + 200.0 * normal(&mut rng)),
            azimuth: 1800.0 + 150.0 * normal(&mut rng),
            altitude: 600.0 + 60.0 * normal(&mut rng),
        }
    }

    fn for_word(&self, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut s = self.clone();
        s.roundness += cfg.word_jitter * normal(rng);
        s.pressure_skew += cfg.word_jitter * normal(rng);
        s.lift += cfg.word_jitter * normal(rng);
        s
    }

    fn for_session(&self, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut s = self.clone();
        s.roundness += cfg.session_jitter * normal(rng);
        s.pressure_skew += cfg.session_jitter * normal(rng);
        s.lift += cfg.session_jitter * normal(rng);
        s.origin.0 += 50.0 * normal(rng);
        s.origin.1 += 80.0 * normal(rng);
        s.speed *= (0.05 * normal(rng)).exp();
        s
    }
}

fn quantize(v: f64, max: i32) -> i32 {
    (v.round() as i64).clamp(0, max as i64) as i32
}

/// Renders one word execution.
fn render_word(
    cfg: &SynthConfig,
    spec: &WordSpec,
    writer_index: usize,
    session: u32,
    base: &WriterStyle,
) -> WordRecording {
    let word_tag = label_tag(&spec.word);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_all(
        cfg.seed,
        &[label_tag("session"), writer_index as u64, session as u64, word_tag],
    ));
    let mut word_rng = ChaCha8Rng::seed_from_u64(mix_all(
        cfg.seed,
        &[label_tag("word"), writer_index as u64, word_tag],
    ));
    let style = base.for_word(cfg, &mut word_rng).for_session(cfg, &mut rng);
    let letters: Vec<char> = spec.word.chars().collect();

    let mut samples: Vec<PenSample> = Vec::new();
    let mut ts = 0i64;
    let mut push = |x: f64, y: f64, bs: u8, pr: f64, rng: &mut ChaCha8Rng| {
        samples.push(PenSample {
            x: quantize(x + 2.0 * normal(rng), MAX_XY),
            y: quantize(y + 2.0 * normal(rng), MAX_XY),
            ts,
            bs,
            az: quantize(style.azimuth + 3.0 * normal(rng), 3600),
            al: quantize(style.altitude + 3.0 * normal(rng), 900),
            pr: if bs == 1 {
                quantize(pr + 4.0 * normal(rng), MAX_PR).max(1)
            } else {
                0
            },
        });
        ts += SAMPLE_DT;
    };

    let mut prev_end: Option<Pt> = None;
    for g in 0..spec.glyphs {
        let letter = letters[g % letters.len().max(1)];
        let n_strokes = cfg.glyph_strokes(g);
        let gx = style.origin.0 + g as f64 * ADVANCE * style.size;
        for k in 0..n_strokes {
            // The writer's own habitual variant of this stroke, stable over sessions.
            let mut habit = ChaCha8Rng::seed_from_u64(mix_all(
                cfg.seed,
                &[label_tag("habit"), writer_index as u64, word_tag, g as u64, k as u64],
            ));
            let mut ctrl = template_stroke(letter, n_strokes, k);
            for p in ctrl.iter_mut() {
                p.0 += 160.0 * cfg.writer_jitter * normal(&mut habit) + 40.0 * cfg.session_jitter * normal(&mut rng);
                p.1 += 160.0 * cfg.writer_jitter * normal(&mut habit) + 40.0 * cfg.session_jitter * normal(&mut rng);
                let (lx, ly) = (p.0 + style.slant * p.1, p.1);
                *p = (gx + lx * style.size, style.origin.1 + ly * style.size);
            }

            let (cx, cy) = (ctrl[3].0 - ctrl[0].0, ctrl[3].1 - ctrl[0].1);
            let chord = (cx * cx + cy * cy).sqrt().max(1.0);
            let normal_dir = (-cy / chord, cx / chord);
            let bulge = (0.12 + 0.12 * style.roundness) * chord;
            let peak = (0.5 + 0.12 * style.pressure_skew).clamp(0.1, 0.9);

            let length = polygon_length(&ctrl);
            let n = ((length / style.speed).round() as usize).clamp(6, 120);

            if let Some(from) = prev_end {
                let to = bezier(&ctrl, 0.0);
                let to = (to.0 + bulge * 0.0, to.1);
                let (dx, dy) = (to.0 - from.0, to.1 - from.1);
                let dist = (dx * dx + dy * dy).sqrt().max(1.0);
                let lift = (0.25 + 0.15 * style.lift) * dist;
                let mid = ((from.0 + to.0) / 2.0 - dy / dist * lift, (from.1 + to.1) / 2.0 + dx / dist * lift + 60.0);
                let m = ((dist / (1.5 * style.speed)).round() as usize).clamp(3, 60);
                for j in 1..=m {
                    let s = j as f64 / (m + 1) as f64;
                    let u = 1.0 - s;
                    let x = u * u * from.0 + 2.0 * u * s * mid.0 + s * s * to.0;
                    let y = u * u * from.1 + 2.0 * u * s * mid.1 + s * s * to.1;
                    push(x, y, 0, 0.0, &mut rng);
                }
            }

            let mut last = (0.0, 0.0);
            for j in 0..n {
                let s = j as f64 / (n - 1) as f64;
                let (bx, by) = bezier(&ctrl, s);
                let b = bulge * (PI * s).sin();
                let (x, y) = (bx + normal_dir.0 * b, by + normal_dir.1 * b);
                let pr = style.pressure_base
                    + style.pressure_amp * (-(s - peak).powi(2) / (2.0 * 0.18 * 0.18)).exp();
                push(x, y, 1, pr, &mut rng);
                last = (x, y);
            }
            prev_end = Some(last);
        }
    }
    WordRecording::new(spec.word.clone(), samples).expect("generated samples are valid")
}

/// Generates the full dataset described by `cfg`.
pub fn generate_dataset(cfg: &SynthConfig) -> Dataset {
    use rayon::prelude::*;
    let writers = cfg.writers();
    let rendered: Vec<Vec<(RecordingKey, WordRecording)>> = writers
        .par_iter()
        .enumerate()
        .map(|(index, (id, gender))| {
            let style = WriterStyle::draw(cfg, index, *gender);
            let mut out = Vec::with_capacity(cfg.sessions as usize * cfg.words.len());
            for session in 1..=cfg.sessions {
                for spec in &cfg.words {
                    out.push((
                        RecordingKey::new(id.as_str(), session, spec.word.as_str()),
                        render_word(cfg, spec, index, session, &style),
                    ));
                }
            }
            out
        })
        .collect();

    let mut ds = Dataset::new();
    for (id, gender) in &writers {
        ds.add_writer(id.as_str(), *gender).expect("writer ids are unique");
    }
    for (key, rec) in rendered.into_iter().flatten() {
        ds.add_recording(key, rec).expect("keys are unique");
    }
    ds
}

/// Accuracy of one channel at one separation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub separation: f64,
    pub channel: Channel,
    /// All-word decision rate, averaged over trials.
    pub fused: f64,
    /// Mean single-word rate, averaged over trials.
    pub word_mean: f64,
}

/// Runs the full protocol of `cfg` once per separation, keeping every seed
/// fixed so only the separation changes.
pub fn separation_sweep(cfg: &ExperimentConfig, deltas: &[f64]) -> Result<Vec<SweepPoint>, ExperimentError> {
    let DataSource::Synth(base) = &cfg.data else {
        return Err(ExperimentError::Config("a separation sweep needs synthetic data".into()));
    };
    if deltas.len() < 2 {
        return Err(ExperimentError::Config("a separation sweep needs at least two separations".into()));
    }
    if let Some(d) = deltas.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(ExperimentError::Config(format!("separation {d} is not a non-negative number")));
    }
    let mut out = Vec::new();
    for &delta in deltas {
        let run = ExperimentConfig {
            data: DataSource::Synth(SynthConfig {
                separation: delta,
                ..base.clone()
            }),
            ..cfg.clone()
        };
        let report = run_experiment(&run)?;
        for table in &report.tables {
            let avg = |label: &str| table.row(label).expect("row present").average.rate;
            out.push(SweepPoint {
                separation: delta,
                channel: table.channel,
                fused: avg(ALL_LABEL),
                word_mean: avg(AVG_LABEL),
            });
        }
    }
    Ok(out)
}
