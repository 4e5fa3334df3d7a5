//! SVC trajectory files and labelled dataset trees.
//!
//! An SVC file holds one word execution: the first line is the decimal
//! point count `N`, followed by `N` lines of seven integers
//! `x y ts bs az al pr`. Datasets live on disk as
//! `<root>/<writer>/<session>/<word>.svc` next to a manifest of
//! `writer_id,gender` rows.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

/// One raw pen point as reported by the tablet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PenSample {
    pub x: i32,
    pub y: i32,
    pub ts: i64,
    /// Button status: 1 while the pen touches the surface, 0 in the air.
    pub bs: u8,
    pub az: i32,
    pub al: i32,
    pub pr: i32,
}

impl PenSample {
    pub fn is_down(&self) -> bool {
        self.bs == 1
    }
}

/// A complete execution of one word. Never empty, timestamps non-decreasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordRecording {
    word_id: String,
    samples: Vec<PenSample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordingError {
    #[error("a recording needs at least one sample")]
    Empty,
    #[error("sample {index}: button status {bs} is not 0 or 1")]
    ButtonStatus { index: usize, bs: u8 },
    #[error("sample {index}: negative pressure {pr}")]
    NegativePressure { index: usize, pr: i32 },
    #[error("sample {index}: timestamp {ts} precedes previous timestamp {prev}")]
    TimestampOrder { index: usize, ts: i64, prev: i64 },
}

impl WordRecording {
    pub fn new(word_id: impl Into<String>, samples: Vec<PenSample>) -> Result<Self, RecordingError> {
        if samples.is_empty() {
            return Err(RecordingError::Empty);
        }
        for (index, s) in samples.iter().enumerate() {
            if s.bs > 1 {
                return Err(RecordingError::ButtonStatus { index, bs: s.bs });
            }
            if s.pr < 0 {
                return Err(RecordingError::NegativePressure { index, pr: s.pr });
            }
            if index > 0 && s.ts < samples[index - 1].ts {
                return Err(RecordingError::TimestampOrder {
                    index,
                    ts: s.ts,
                    prev: samples[index - 1].ts,
                });
            }
        }
        Ok(Self {
            word_id: word_id.into(),
            samples,
        })
    }

    pub fn word_id(&self) -> &str {
        &self.word_id
    }

    pub fn samples(&self) -> &[PenSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line 1: missing point-count header")]
    MissingHeader,
    #[error("line 1: invalid point count {0:?}")]
    BadHeader(String),
    #[error("declared {declared} points, found {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error("line {line}: expected 7 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: {field} is not an integer: {token:?}")]
    NotInteger {
        line: usize,
        field: &'static str,
        token: String,
    },
    #[error("line {line}: button status {value} out of range (0 or 1)")]
    ButtonStatus { line: usize, value: i64 },
    #[error("line {line}: pressure {value} is negative")]
    NegativePressure { line: usize, value: i64 },
    #[error("line {line}: timestamp {ts} precedes previous timestamp {prev}")]
    TimestampOrder { line: usize, ts: i64, prev: i64 },
}

const FIELDS: [&str; 7] = ["x", "y", "ts", "bs", "az", "al", "pr"];

fn parse_field<T: FromStr>(token: &str, line: usize, field: &'static str) -> Result<T, ParseError> {
    token.parse().map_err(|_| ParseError::NotInteger {
        line,
        field,
        token: token.to_string(),
    })
}

/// Parses one SVC document. Blank lines after the last sample are accepted;
/// anything else beyond the declared count is a count mismatch.
pub fn parse_svc(word_id: &str, text: &str) -> Result<WordRecording, ParseError> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
    let header = lines.next().ok_or(ParseError::MissingHeader)?.trim();
    if header.is_empty() {
        return Err(ParseError::MissingHeader);
    }
    let declared: usize = header
        .parse()
        .map_err(|_| ParseError::BadHeader(header.to_string()))?;

    let body: Vec<&str> = lines.collect();
    let content_len = body
        .iter()
        .rposition(|l| !l.trim().is_empty())
        .map_or(0, |i| i + 1);
    let body = &body[..content_len];
    if body.len() != declared {
        return Err(ParseError::CountMismatch {
            declared,
            found: body.len(),
        });
    }
    if declared == 0 {
        return Err(ParseError::CountMismatch { declared, found: 0 });
    }

    let mut samples = Vec::with_capacity(declared);
    for (i, raw) in body.iter().enumerate() {
        let line = i + 2;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.len() != 7 {
            return Err(ParseError::FieldCount {
                line,
                found: tokens.len(),
            });
        }
        let x = parse_field(tokens[0], line, FIELDS[0])?;
        let y = parse_field(tokens[1], line, FIELDS[1])?;
        let ts: i64 = parse_field(tokens[2], line, FIELDS[2])?;
        let bs: i64 = parse_field(tokens[3], line, FIELDS[3])?;
        let az = parse_field(tokens[4], line, FIELDS[4])?;
        let al = parse_field(tokens[5], line, FIELDS[5])?;
        let pr: i64 = parse_field(tokens[6], line, FIELDS[6])?;
        if !(0..=1).contains(&bs) {
            return Err(ParseError::ButtonStatus { line, value: bs });
        }
        if pr < 0 {
            return Err(ParseError::NegativePressure { line, value: pr });
        }
        let pr = i32::try_from(pr).map_err(|_| ParseError::NotInteger {
            line,
            field: "pr",
            token: tokens[6].to_string(),
        })?;
        if let Some(prev) = samples.last().map(|s: &PenSample| s.ts) {
            if ts < prev {
                return Err(ParseError::TimestampOrder { line, ts, prev });
            }
        }
        samples.push(PenSample {
            x,
            y,
            ts,
            bs: bs as u8,
            az,
            al,
            pr,
        });
    }
    Ok(WordRecording {
        word_id: word_id.to_string(),
        samples,
    })
}

/// Renders a recording in SVC form, LF-terminated.
pub fn write_svc(recording: &WordRecording) -> String {
    use std::fmt::Write;
    let mut out = String::with_capacity(recording.len() * 32 + 8);
    let _ = writeln!(out, "{}", recording.len());
    for s in &recording.samples {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            s.x, s.y, s.ts, s.bs, s.az, s.al, s.pr
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub const BOTH: [Gender; 2] = [Gender::Male, Gender::Female];

    /// Single-letter manifest code.
    pub fn code(self) -> char {
        match self {
            Gender::Male => 'M',
            Gender::Female => 'F',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "M" | "m" | "male" | "Male" => Ok(Gender::Male),
            "F" | "f" | "female" | "Female" => Ok(Gender::Female),
            other => Err(format!("unknown gender {other:?}")),
        }
    }
}

/// Identifies one recording inside a dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecordingKey {
    pub writer: String,
    pub session: u32,
    pub word: String,
}

impl RecordingKey {
    pub fn new(writer: impl Into<String>, session: u32, word: impl Into<String>) -> Self {
        Self {
            writer: writer.into(),
            session,
            word: word.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("writer {0:?} is not registered in the dataset")]
    UnknownWriter(String),
    #[error("duplicate writer {0:?}")]
    DuplicateWriter(String),
    #[error("duplicate recording for writer {writer:?}, session {session}, word {word:?}")]
    DuplicateRecording {
        writer: String,
        session: u32,
        word: String,
    },
    #[error("word mismatch: key names {key:?} but recording holds {recording:?}")]
    WordMismatch { key: String, recording: String },
}

/// Writers with gender labels and their recordings keyed by
/// `(writer, session, word)`. Immutable once assembled.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    writers: BTreeMap<String, Gender>,
    recordings: BTreeMap<RecordingKey, WordRecording>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_writer(&mut self, writer: impl Into<String>, gender: Gender) -> Result<(), DatasetError> {
        let writer = writer.into();
        if self.writers.contains_key(&writer) {
            return Err(DatasetError::DuplicateWriter(writer));
        }
        self.writers.insert(writer, gender);
        Ok(())
    }

    pub fn add_recording(&mut self, key: RecordingKey, recording: WordRecording) -> Result<(), DatasetError> {
        if !self.writers.contains_key(&key.writer) {
            return Err(DatasetError::UnknownWriter(key.writer));
        }
        if key.word != recording.word_id {
            return Err(DatasetError::WordMismatch {
                key: key.word,
                recording: recording.word_id,
            });
        }
        if self.recordings.contains_key(&key) {
            return Err(DatasetError::DuplicateRecording {
                writer: key.writer,
                session: key.session,
                word: key.word,
            });
        }
        self.recordings.insert(key, recording);
        Ok(())
    }

    pub fn writers(&self) -> &BTreeMap<String, Gender> {
        &self.writers
    }

    pub fn gender_of(&self, writer: &str) -> Option<Gender> {
        self.writers.get(writer).copied()
    }

    pub fn writers_of(&self, gender: Gender) -> impl Iterator<Item = &str> {
        self.writers
            .iter()
            .filter(move |(_, g)| **g == gender)
            .map(|(w, _)| w.as_str())
    }

    pub fn recordings(&self) -> &BTreeMap<RecordingKey, WordRecording> {
        &self.recordings
    }

    pub fn get(&self, key: &RecordingKey) -> Option<&WordRecording> {
        self.recordings.get(key)
    }

    /// All recordings of one writer for one word, in session order.
    pub fn sessions_for<'a>(
        &'a self,
        writer: &'a str,
        word: &'a str,
    ) -> impl Iterator<Item = (u32, &'a WordRecording)> + 'a {
        let lo = RecordingKey::new(writer, 0, "");
        self.recordings
            .range(lo..)
            .take_while(move |(k, _)| k.writer == writer)
            .filter(move |(k, _)| k.word == word)
            .map(|(k, r)| (k.session, r))
    }

    /// Distinct word ids present, sorted.
    pub fn words(&self) -> Vec<String> {
        let mut words: Vec<String> = self.recordings.keys().map(|k| k.word.clone()).collect();
        words.sort();
        words.dedup();
        words
    }

    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }
}

/// A file that could not be turned into a dataset recording.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkipReport {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug)]
pub struct LoadOutcome {
    pub dataset: Dataset,
    pub skipped: Vec<SkipReport>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {message}")]
    ManifestRow { line: usize, message: String },
    #[error("cannot scan dataset root {path}: {message}")]
    Scan { path: PathBuf, message: String },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Parses manifest text: one `writer_id,gender` pair per line, `#` comments.
pub fn parse_manifest(text: &str) -> Result<Vec<(String, Gender)>, LoadError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<(String, Gender)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| LoadError::ManifestRow {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() != 2 {
            return Err(LoadError::ManifestRow {
                line,
                message: format!("expected writer_id,gender, found {} fields", record.len()),
            });
        }
        let writer = record[0].to_string();
        if writer.is_empty() {
            return Err(LoadError::ManifestRow {
                line,
                message: "empty writer id".into(),
            });
        }
        let gender = match &record[1] {
            "M" => Gender::Male,
            "F" => Gender::Female,
            other => {
                return Err(LoadError::ManifestRow {
                    line,
                    message: format!("gender {other:?} for writer {writer:?} is not M or F"),
                })
            }
        };
        if rows.iter().any(|(w, _)| *w == writer) {
            return Err(LoadError::ManifestRow {
                line,
                message: format!("duplicate writer {writer:?}"),
            });
        }
        rows.push((writer, gender));
    }
    Ok(rows)
}

pub fn render_manifest(dataset: &Dataset) -> String {
    let mut out = String::from("# writer_id,gender\n");
    for (w, g) in dataset.writers() {
        out.push_str(w);
        out.push(',');
        out.push(g.code());
        out.push('\n');
    }
    out
}

/// Loads `<root>/<writer>/<session>/<word>.svc` files for the writers named
/// in the manifest. Every `.svc` file under `root` ends up either in the
/// dataset or in the skip list.
pub fn load_dataset(root: &Path, manifest: &Path) -> Result<LoadOutcome, LoadError> {
    let text = fs::read_to_string(manifest).map_err(|source| LoadError::Manifest {
        path: manifest.to_path_buf(),
        source,
    })?;
    let mut dataset = Dataset::new();
    for (writer, gender) in parse_manifest(&text)? {
        dataset
            .add_writer(writer, gender)
            .expect("manifest parser rejects duplicates");
    }

    let mut skipped = Vec::new();
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| LoadError::Scan {
            path: root.to_path_buf(),
            message: e.to_string(),
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "svc") {
            files.push(entry.into_path());
        }
    }

    for path in files {
        let skip = |reason: String| SkipReport {
            path: path.clone(),
            reason,
        };
        let rel = path.strip_prefix(root).unwrap_or(&path);
        let parts: Vec<String> = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        if parts.len() != 3 {
            skipped.push(skip("not at <writer>/<session>/<word>.svc".into()));
            continue;
        }
        let writer = &parts[0];
        let Ok(session) = parts[1].parse::<u32>() else {
            skipped.push(skip(format!("session directory {:?} is not a number", parts[1])));
            continue;
        };
        let word = parts[2].trim_end_matches(".svc");
        if dataset.gender_of(writer).is_none() {
            skipped.push(skip(format!("writer {writer:?} is not in the manifest")));
            continue;
        }
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                skipped.push(skip(e.to_string()));
                continue;
            }
        };
        match parse_svc(word, &text) {
            Ok(rec) => {
                if let Err(e) = dataset.add_recording(RecordingKey::new(writer.as_str(), session, word), rec) {
                    skipped.push(skip(e.to_string()));
                }
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                skipped.push(skip(e.to_string()));
            }
        }
    }
    Ok(LoadOutcome { dataset, skipped })
}

/// Writes the dataset tree and `manifest.csv` under `root`.
pub fn write_dataset(dataset: &Dataset, root: &Path) -> Result<PathBuf, LoadError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| LoadError::Write { path, source }
    };
    fs::create_dir_all(root).map_err(io(root))?;
    for (key, rec) in dataset.recordings() {
        let dir = root.join(&key.writer).join(key.session.to_string());
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        let path = dir.join(format!("{}.svc", key.word));
        fs::write(&path, write_svc(rec)).map_err(io(&path))?;
    }
    let manifest = root.join("manifest.csv");
    fs::write(&manifest, render_manifest(dataset)).map_err(io(&manifest))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smallest_file() {
        let rec = parse_svc("w", "2\n0 0 0 1 0 0 300\n10 10 10 1 0 0 310").unwrap();
        assert_eq!(rec.len(), 2);
        assert!(rec.samples().iter().all(|s| s.bs == 1));
        assert_eq!(rec.samples()[1].pr, 310);
    }

    #[test]
    fn count_mismatch() {
        let err = parse_svc("w", "3\n0 0 0 1 0 0 5\n1 1 1 0 0 0 0").unwrap_err();
        assert_eq!(err, ParseError::CountMismatch { declared: 3, found: 2 });
    }

    #[test]
    fn button_status_out_of_range() {
        let err = parse_svc("w", "1\n0 0 0 2 0 0 0").unwrap_err();
        assert_eq!(err, ParseError::ButtonStatus { line: 2, value: 2 });
    }

    #[test]
    fn field_errors_carry_line_numbers() {
        assert_eq!(
            parse_svc("w", "2\n0 0 0 1 0 0 1\n0 0 1 1 0 0").unwrap_err(),
            ParseError::FieldCount { line: 3, found: 6 }
        );
        assert!(matches!(
            parse_svc("w", "1\n0 a 0 1 0 0 1").unwrap_err(),
            ParseError::NotInteger { line: 2, field: "y", .. }
        ));
        assert!(matches!(
            parse_svc("w", "2\n0 0 5 1 0 0 1\n0 0 4 1 0 0 1").unwrap_err(),
            ParseError::TimestampOrder { line: 3, .. }
        ));
        assert_eq!(parse_svc("w", "").unwrap_err(), ParseError::MissingHeader);
        assert!(matches!(parse_svc("w", "x\n").unwrap_err(), ParseError::BadHeader(_)));
        assert!(matches!(
            parse_svc("w", "0\n").unwrap_err(),
            ParseError::CountMismatch { declared: 0, .. }
        ));
    }

    #[test]
    fn crlf_and_trailing_newline_accepted() {
        let a = parse_svc("w", "1\r\n3 4 5 0 1 2 0\r\n").unwrap();
        let b = parse_svc("w", "1\n3 4 5 0 1 2 0").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_recording_refused() {
        assert_eq!(WordRecording::new("w", vec![]).unwrap_err(), RecordingError::Empty);
    }

    #[test]
    fn writer_output_is_exact() {
        let rec = parse_svc("w", "2\n0 0 0 1 0 0 300\n10 10 10 1 0 0 310").unwrap();
        assert_eq!(write_svc(&rec), "2\n0 0 0 1 0 0 300\n10 10 10 1 0 0 310\n");
    }

    fn arb_recording(max: usize) -> impl Strategy<Value = WordRecording> {
        prop::collection::vec(
            (any::<i32>(), any::<i32>(), 0i64..1000, 0u8..=1, any::<i32>(), any::<i32>(), 0i32..=i32::MAX),
            1..max,
        )
        .prop_map(|rows| {
            let mut ts = 0i64;
            let samples = rows
                .into_iter()
                .map(|(x, y, dt, bs, az, al, pr)| {
                    ts += dt;
                    PenSample { x, y, ts, bs, az, al, pr }
                })
                .collect();
            WordRecording::new("word", samples).unwrap()
        })
    }

    proptest! {
        #[test]
        fn round_trip(rec in arb_recording(1000)) {
            let back = parse_svc("word", &write_svc(&rec)).unwrap();
            prop_assert_eq!(back, rec);
        }

        #[test]
        fn parser_is_total(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
            let text = String::from_utf8_lossy(&bytes);
            if let Ok(rec) = parse_svc("w", &text) {
                prop_assert!(!rec.samples().is_empty());
            }
        }
    }

    #[test]
    fn manifest_rows() {
        let rows = parse_manifest("# comment\nw1,M\n\nw2, F\n").unwrap();
        assert_eq!(rows, vec![("w1".into(), Gender::Male), ("w2".into(), Gender::Female)]);
        let err = parse_manifest("w1,M\nw2,X\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("\"X\""), "{msg}");
        assert!(parse_manifest("w1,M\nw1,F\n").unwrap_err().to_string().contains("duplicate"));
    }

    fn tiny_recording(word: &str) -> WordRecording {
        parse_svc(word, "3\n0 0 0 1 0 0 10\n5 5 10 1 0 0 20\n9 9 20 0 0 0 0\n").unwrap()
    }

    #[test]
    fn load_two_writers() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = Dataset::new();
        ds.add_writer("a", Gender::Male).unwrap();
        ds.add_writer("b", Gender::Female).unwrap();
        for w in ["a", "b"] {
            ds.add_recording(RecordingKey::new(w, 1, "HOLA"), tiny_recording("HOLA")).unwrap();
        }
        let manifest = write_dataset(&ds, dir.path()).unwrap();
        let out = load_dataset(dir.path(), &manifest).unwrap();
        assert!(out.skipped.is_empty());
        assert_eq!(out.dataset, ds);
    }

    #[test]
    fn load_skips_corrupt_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = Dataset::new();
        ds.add_writer("a", Gender::Male).unwrap();
        for s in 1..=10 {
            ds.add_recording(RecordingKey::new("a", s, "W"), tiny_recording("W")).unwrap();
        }
        let manifest = write_dataset(&ds, dir.path()).unwrap();
        fs::write(dir.path().join("a/7/W.svc"), "3\n1 2 3\n").unwrap();
        fs::create_dir_all(dir.path().join("ghost/1")).unwrap();
        fs::write(dir.path().join("ghost/1/W.svc"), write_svc(&tiny_recording("W"))).unwrap();
        let out = load_dataset(dir.path(), &manifest).unwrap();
        assert_eq!(out.dataset.len(), 9);
        assert_eq!(out.skipped.len(), 2);
        assert!(out.skipped.iter().any(|s| s.path.ends_with("a/7/W.svc")));
        assert!(out.skipped.iter().any(|s| s.reason.contains("ghost")));
    }

    #[test]
    fn missing_manifest_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_dataset(dir.path(), &dir.path().join("nope.csv")),
            Err(LoadError::Manifest { .. })
        ));
    }

    #[test]
    fn sessions_for_filters_writer_and_word() {
        let mut ds = Dataset::new();
        ds.add_writer("a", Gender::Male).unwrap();
        ds.add_writer("ab", Gender::Male).unwrap();
        for (w, s, word) in [("a", 2, "X"), ("a", 1, "X"), ("a", 1, "Y"), ("ab", 1, "X")] {
            ds.add_recording(RecordingKey::new(w, s, word), tiny_recording(word)).unwrap();
        }
        let sessions: Vec<u32> = ds.sessions_for("a", "X").map(|(s, _)| s).collect();
        assert_eq!(sessions, vec![1, 2]);
        assert!(ds.add_recording(RecordingKey::new("zz", 1, "X"), tiny_recording("X")).is_err());
        assert_eq!(ds.words(), vec!["X".to_string(), "Y".to_string()]);
    }
}
