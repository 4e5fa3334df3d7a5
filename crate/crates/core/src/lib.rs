//! Text-dependent gender classification of online handwriting.
//!
//! Word executions recorded in SVC form are split into pen-down and pen-up
//! strokes, each stroke becomes a fixed-length normalized feature vector,
//! and every (word, gender, stroke kind) triple is modelled by a
//! self-organizing-map codebook. An unknown writer is quantized against the
//! male and female codebooks and attributed the gender with the smaller
//! summed distortion. Rates are judged with an exact one-sided binomial
//! test.

pub mod classifier;
pub mod experiment;
pub mod model;
pub mod seeds;
pub mod som;
pub mod stats;
pub mod stroke;
pub mod svc;
pub mod synth;

pub use classifier::{Channel, ClassificationResult, Decision, SessionFusion};
pub use model::{Codebook, ModelSet, WordModel};
pub use som::{GridSpec, PrototypeSet, SomConfig, TrainingMode, TrainingSchedule};
pub use stats::BinomialReport;
pub use stroke::{FeatureStroke, FeatureStore, PipelineConfig, StrokeKind};
pub use svc::{Dataset, Gender, PenSample, RecordingKey, WordRecording};
pub use synth::SynthConfig;
