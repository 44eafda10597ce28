//! Digitizer recordings: sample parsing and validation, subject metadata,
//! stroke segmentation and manifest-driven dataset loading.
//!
//! A recording file is plain text with one sample per line and seven
//! whitespace-separated numeric columns. Lines starting with `#` are
//! comments. The column layout is declared by a [`ColumnMap`], so any
//! source order can be read without code changes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub x: f64,
    pub y: f64,
    /// Seconds.
    pub t: f64,
    /// Surface contact: `true` on the tablet, `false` in the air.
    pub button: bool,
    pub pressure: f64,
    pub tilt: f64,
    pub elevation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    /// Parkinson's disease.
    Pd,
    /// Healthy control.
    Hc,
}

impl Label {
    /// SVM target: PD is the positive class.
    pub fn sign(self) -> f64 {
        match self {
            Label::Pd => 1.0,
            Label::Hc => -1.0,
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::Male => "M",
            Sex::Female => "F",
        })
    }
}

impl FromStr for Sex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "m" | "male" => Ok(Sex::Male),
            "f" | "female" => Ok(Sex::Female),
            other => Err(format!("unknown sex `{other}`")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Pd => "PD",
            Label::Hc => "HC",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "PD" => Ok(Label::Pd),
            "HC" => Ok(Label::Hc),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMeta {
    pub id: String,
    pub age: u32,
    pub sex: Sex,
    pub label: Label,
    pub updrs: Option<f64>,
}

impl SubjectMeta {
    pub fn new(id: impl Into<String>, age: u32, sex: Sex, label: Label) -> Result<Self> {
        if !(1..=130).contains(&age) {
            return Err(Error::InvalidArgument(format!("age {age} outside [1, 130]")));
        }
        Ok(SubjectMeta {
            id: id.into(),
            age,
            sex,
            label,
            updrs: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject: SubjectMeta,
    /// Writing task, 1..=7.
    pub task: u8,
    pub samples: Vec<SamplePoint>,
}

impl Recording {
    pub fn new(subject: SubjectMeta, task: u8, samples: Vec<SamplePoint>) -> Result<Self> {
        check_task(task)?;
        for (i, w) in samples.windows(2).enumerate() {
            if w[1].t <= w[0].t {
                return Err(Error::Validation {
                    line: i + 2,
                    message: format!("timestamp {} does not increase past {}", w[1].t, w[0].t),
                });
            }
        }
        Ok(Recording {
            subject,
            task,
            samples,
        })
    }
}

pub(crate) fn check_task(task: u8) -> Result<()> {
    if (1..=7).contains(&task) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("task {task} outside 1..=7")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    X,
    Y,
    T,
    Button,
    Pressure,
    Tilt,
    Elevation,
}

impl Channel {
    pub const ALL: [Channel; 7] = [
        Channel::X,
        Channel::Y,
        Channel::T,
        Channel::Button,
        Channel::Pressure,
        Channel::Tilt,
        Channel::Elevation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::X => "x",
            Channel::Y => "y",
            Channel::T => "t",
            Channel::Button => "button",
            Channel::Pressure => "pressure",
            Channel::Tilt => "tilt",
            Channel::Elevation => "elevation",
        }
    }

    fn parse(name: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.name() == name)
    }
}

/// Position of each channel among a file's columns. Columns named `_` in
/// [`ColumnMap::from_names`] are skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    index: [usize; 7],
    width: usize,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            index: [0, 1, 2, 3, 4, 5, 6],
            width: 7,
        }
    }
}

impl ColumnMap {
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut index = [usize::MAX; 7];
        for (col, name) in names.iter().enumerate() {
            let name = name.as_ref();
            if name == "_" {
                continue;
            }
            let ch = Channel::parse(name)
                .ok_or_else(|| Error::Manifest(format!("unknown column `{name}`")))?;
            if index[ch as usize] != usize::MAX {
                return Err(Error::Manifest(format!("column `{name}` listed twice")));
            }
            index[ch as usize] = col;
        }
        if let Some(ch) = Channel::ALL.iter().find(|c| index[**c as usize] == usize::MAX) {
            return Err(Error::Manifest(format!("column map lacks `{}`", ch.name())));
        }
        Ok(ColumnMap {
            index,
            width: names.len(),
        })
    }

    pub fn column(&self, ch: Channel) -> usize {
        self.index[ch as usize]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut out = vec!["_"; self.width];
        for ch in Channel::ALL {
            out[self.column(ch)] = ch.name();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOptions {
    pub columns: ColumnMap,
    /// Seconds per timestamp unit in the file.
    pub tick_seconds: f64,
    /// Leading non-comment lines to ignore (e.g. a sample-count header).
    pub skip_lines: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            columns: ColumnMap::default(),
            tick_seconds: 1.0,
            skip_lines: 0,
        }
    }
}

/// Parses and validates the samples of one recording file.
pub fn parse_samples(text: &str, opts: &ParseOptions) -> Result<Vec<SamplePoint>> {
    let map = &opts.columns;
    let mut samples: Vec<SamplePoint> = Vec::new();
    let mut skipped = 0;
    let mut fields = vec![0.0; map.width()];
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if skipped < opts.skip_lines {
            skipped += 1;
            continue;
        }
        let mut n = 0;
        for tok in trimmed.split_whitespace() {
            if n == fields.len() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("more than {} columns", fields.len()),
                });
            }
            fields[n] = tok.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("non-numeric token `{tok}`"),
            })?;
            n += 1;
        }
        if n != fields.len() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} columns, found {n}", fields.len()),
            });
        }
        if let Some(v) = fields.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation {
                line: line_no,
                message: format!("non-finite value {v}"),
            });
        }
        let get = |ch: Channel| fields[map.column(ch)];
        let button = match get(Channel::Button) {
            b if b == 0.0 => false,
            b if b == 1.0 => true,
            b => {
                return Err(Error::Validation {
                    line: line_no,
                    message: format!("button value {b} not in {{0, 1}}"),
                })
            }
        };
        let pressure = get(Channel::Pressure);
        if pressure < 0.0 {
            return Err(Error::Validation {
                line: line_no,
                message: format!("negative pressure {pressure}"),
            });
        }
        let t = get(Channel::T) * opts.tick_seconds;
        if let Some(prev) = samples.last() {
            if t <= prev.t {
                return Err(Error::Validation {
                    line: line_no,
                    message: format!("timestamp {t} s does not increase past {} s", prev.t),
                });
            }
        }
        samples.push(SamplePoint {
            x: get(Channel::X),
            y: get(Channel::Y),
            t,
            button,
            pressure,
            tilt: get(Channel::Tilt),
            elevation: get(Channel::Elevation),
        });
    }
    Ok(samples)
}

pub fn parse_recording(
    text: &str,
    opts: &ParseOptions,
    subject: SubjectMeta,
    task: u8,
) -> Result<Recording> {
    let samples = parse_samples(text, opts)?;
    Recording::new(subject, task, samples)
}

/// Writes samples in the default column order with timestamps in seconds.
/// Values use the shortest exact decimal form, so parsing the output with
/// default options reproduces the samples bit for bit.
pub fn serialize_samples(samples: &[SamplePoint]) -> String {
    let mut out = String::from("# x y t button pressure tilt elevation\n");
    for s in samples {
        out.push_str(&format!(
            "{} {} {} {} {} {} {}\n",
            s.x,
            s.y,
            s.t,
            u8::from(s.button),
            s.pressure,
            s.tilt,
            s.elevation
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrokeKind {
    OnSurface,
    InAir,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stroke {
    pub kind: StrokeKind,
    pub span: Range<usize>,
}

/// Splits samples into maximal runs of constant button state.
pub fn segment_strokes(samples: &[SamplePoint]) -> Vec<Stroke> {
    let mut strokes = Vec::new();
    let mut start = 0;
    for i in 1..=samples.len() {
        if i == samples.len() || samples[i].button != samples[start].button {
            strokes.push(Stroke {
                kind: if samples[start].button {
                    StrokeKind::OnSurface
                } else {
                    StrokeKind::InAir
                },
                span: start..i,
            });
            start = i;
        }
    }
    strokes
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub subject: SubjectMeta,
    pub recordings: BTreeMap<u8, PathBuf>,
}

/// Subjects, their per-task recording files and the shared file layout.
///
/// Text form:
///
/// ```text
/// columns = x y t button pressure tilt elevation
/// tick_seconds = 0.001
/// skip_lines = 0
///
/// [subjects]
/// # id  age  sex  label  updrs
/// S001  70   F    PD     23
/// S002  61   M    HC     -
///
/// [recordings]
/// # id  task  path
/// S001  1     recordings/S001_t1.txt
/// ```
///
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub options: ParseOptions,
    pub base_dir: PathBuf,
}

#[derive(PartialEq)]
enum Section {
    Header,
    Subjects,
    Recordings,
}

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut section = Section::Header;
        let mut options = ParseOptions::default();
        let mut entries: Vec<ManifestEntry> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let err = |line: usize, msg: String| Error::Manifest(format!("line {line}: {msg}"));

        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "[subjects]" => {
                    section = Section::Subjects;
                    continue;
                }
                "[recordings]" => {
                    section = Section::Recordings;
                    continue;
                }
                _ => {}
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            match section {
                Section::Header => {
                    let (key, value) = line
                        .split_once('=')
                        .ok_or_else(|| err(line_no, format!("expected `key = value`, got `{line}`")))?;
                    let value = value.trim();
                    match key.trim() {
                        "columns" => {
                            let names: Vec<&str> = value.split_whitespace().collect();
                            options.columns = ColumnMap::from_names(&names)?;
                        }
                        "tick_seconds" => {
                            let v: f64 = value
                                .parse()
                                .map_err(|_| err(line_no, format!("bad tick_seconds `{value}`")))?;
                            if !(v.is_finite() && v > 0.0) {
                                return Err(err(line_no, "tick_seconds must be > 0".into()));
                            }
                            options.tick_seconds = v;
                        }
                        "skip_lines" => {
                            options.skip_lines = value
                                .parse()
                                .map_err(|_| err(line_no, format!("bad skip_lines `{value}`")))?;
                        }
                        other => return Err(err(line_no, format!("unknown key `{other}`"))),
                    }
                }
                Section::Subjects => {
                    if cols.len() != 5 {
                        return Err(err(line_no, "subject rows need: id age sex label updrs".into()));
                    }
                    let age: u32 = cols[1]
                        .parse()
                        .map_err(|_| err(line_no, format!("bad age `{}`", cols[1])))?;
                    let sex: Sex = cols[2].parse().map_err(|m| err(line_no, m))?;
                    let label: Label = cols[3].parse().map_err(|m| err(line_no, m))?;
                    let mut subject = SubjectMeta::new(cols[0], age, sex, label)
                        .map_err(|e| err(line_no, e.to_string()))?;
                    subject.updrs = match cols[4] {
                        "-" => None,
                        v => Some(v.parse().map_err(|_| err(line_no, format!("bad updrs `{v}`")))?),
                    };
                    if index.contains_key(&subject.id) {
                        return Err(err(line_no, format!("duplicate subject `{}`", subject.id)));
                    }
                    index.insert(subject.id.clone(), entries.len());
                    entries.push(ManifestEntry {
                        subject,
                        recordings: BTreeMap::new(),
                    });
                }
                Section::Recordings => {
                    if cols.len() != 3 {
                        return Err(err(line_no, "recording rows need: id task path".into()));
                    }
                    let slot = *index
                        .get(cols[0])
                        .ok_or_else(|| err(line_no, format!("undeclared subject `{}`", cols[0])))?;
                    let task: u8 = cols[1]
                        .parse()
                        .map_err(|_| err(line_no, format!("bad task `{}`", cols[1])))?;
                    check_task(task).map_err(|e| err(line_no, e.to_string()))?;
                    let recs = &mut entries[slot].recordings;
                    if recs.insert(task, PathBuf::from(cols[2])).is_some() {
                        return Err(err(
                            line_no,
                            format!("duplicate recording for `{}` task {task}", cols[0]),
                        ));
                    }
                }
            }
        }
        Ok(DatasetManifest {
            entries,
            options,
            base_dir: base_dir.into(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("columns = {}\n", self.options.columns.names().join(" ")));
        out.push_str(&format!("tick_seconds = {}\n", self.options.tick_seconds));
        out.push_str(&format!("skip_lines = {}\n", self.options.skip_lines));
        out.push_str("\n[subjects]\n# id age sex label updrs\n");
        for e in &self.entries {
            let s = &e.subject;
            let updrs = s.updrs.map_or_else(|| "-".to_string(), |u| u.to_string());
            out.push_str(&format!("{} {} {} {} {}\n", s.id, s.age, s.sex, s.label, updrs));
        }
        out.push_str("\n[recordings]\n# id task path\n");
        for e in &self.entries {
            for (task, path) in &e.recordings {
                out.push_str(&format!("{} {} {}\n", e.subject.id, task, path.display()));
            }
        }
        out
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

/// All recordings of a manifest, ordered by (subject id, task).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub subjects: Vec<SubjectMeta>,
    pub recordings: Vec<Recording>,
}

impl Dataset {
    pub fn label_tally(&self) -> (usize, usize) {
        let pd = self.subjects.iter().filter(|s| s.label == Label::Pd).count();
        (pd, self.subjects.len() - pd)
    }

    /// Tasks recorded per subject.
    pub fn coverage(&self) -> BTreeMap<&str, BTreeSet<u8>> {
        let mut out: BTreeMap<&str, BTreeSet<u8>> = BTreeMap::new();
        for s in &self.subjects {
            out.entry(s.id.as_str()).or_default();
        }
        for r in &self.recordings {
            out.entry(r.subject.id.as_str()).or_default().insert(r.task);
        }
        out
    }

    pub fn recordings_for_task(&self, task: u8) -> impl Iterator<Item = &Recording> {
        self.recordings.iter().filter(move |r| r.task == task)
    }
}

pub fn load_dataset(manifest: &DatasetManifest) -> Result<Dataset> {
    let mut jobs: Vec<(&SubjectMeta, u8, PathBuf)> = manifest
        .entries
        .iter()
        .flat_map(|e| {
            e.recordings
                .iter()
                .map(move |(task, p)| (&e.subject, *task, manifest.resolve(p)))
        })
        .collect();
    jobs.sort_by(|a, b| (&a.0.id, a.1).cmp(&(&b.0.id, b.1)));

    let recordings = jobs
        .par_iter()
        .map(|(subject, task, path)| {
            let load_err = |message: String| Error::Load {
                subject: subject.id.clone(),
                task: *task,
                message,
            };
            let text = std::fs::read_to_string(path)
                .map_err(|e| load_err(format!("cannot read {}: {e}", path.display())))?;
            parse_recording(&text, &manifest.options, (*subject).clone(), *task)
                .map_err(|e| load_err(format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut subjects: Vec<SubjectMeta> = manifest.entries.iter().map(|e| e.subject.clone()).collect();
    subjects.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Dataset {
        subjects,
        recordings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subject() -> SubjectMeta {
        SubjectMeta::new("S1", 70, Sex::Female, Label::Pd).unwrap()
    }

    fn pt(t: f64, button: bool) -> SamplePoint {
        SamplePoint {
            x: t,
            y: 0.0,
            t,
            button,
            pressure: 0.0,
            tilt: 0.0,
            elevation: 0.0,
        }
    }

    #[test]
    fn parses_default_order() {
        let text = "1 2 0.0 1 100 40 50\n3 4 0.01 1 120 41 51\n5 6 0.02 0 0 42 52\n";
        let rec = parse_recording(text, &ParseOptions::default(), subject(), 1).unwrap();
        assert_eq!(rec.samples.len(), 3);
        let s = rec.samples[1];
        assert_eq!((s.x, s.y, s.t, s.button), (3.0, 4.0, 0.01, true));
        assert_eq!((s.pressure, s.tilt, s.elevation), (120.0, 41.0, 51.0));
        assert!(!rec.samples[2].button);
    }

    #[test]
    fn repeated_timestamp_names_line() {
        let text = "0 0 0.0 1 1 0 0\n0 0 0.5 1 1 0 0\n0 0 0.5 1 1 0 0\n";
        match parse_samples(text, &ParseOptions::default()) {
            Err(Error::Validation { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_tokens_and_buttons() {
        let opts = ParseOptions::default();
        assert!(matches!(
            parse_samples("0 0 0 1 1 0 0\n0 x 1 1 1 0 0\n", &opts),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_samples("0 0 0 2 1 0 0\n", &opts),
            Err(Error::Validation { line: 1, .. })
        ));
        assert!(matches!(
            parse_samples("0 0 0 1 -1 0 0\n", &opts),
            Err(Error::Validation { line: 1, .. })
        ));
    }

    #[test]
    fn permuted_columns_match_default_parse() {
        let default = "1 2 0.0 1 100 40 50\n3 4 0.01 0 0 41 51\n";
        // elevation pressure y t x tilt button
        let permuted = "50 100 2 0.0 1 40 1\n51 0 4 0.01 3 41 0\n";
        let opts = ParseOptions {
            columns: ColumnMap::from_names(&["elevation", "pressure", "y", "t", "x", "tilt", "button"])
                .unwrap(),
            ..ParseOptions::default()
        };
        assert_eq!(
            parse_samples(default, &ParseOptions::default()).unwrap(),
            parse_samples(permuted, &opts).unwrap()
        );
    }

    #[test]
    fn ticks_and_skipped_header() {
        let text = "# pahaw-like\n2\n10 20 1000 1 5 0 0\n11 21 1010 1 5 0 0\n";
        let opts = ParseOptions {
            tick_seconds: 0.001,
            skip_lines: 1,
            ..ParseOptions::default()
        };
        let s = parse_samples(text, &opts).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s[1].t - 1.01).abs() < 1e-12);
    }

    #[test]
    fn segmentation_examples() {
        let samples: Vec<_> = [1, 1, 0, 0, 1]
            .iter()
            .enumerate()
            .map(|(i, b)| pt(i as f64, *b == 1))
            .collect();
        let strokes = segment_strokes(&samples);
        assert_eq!(
            strokes,
            vec![
                Stroke { kind: StrokeKind::OnSurface, span: 0..2 },
                Stroke { kind: StrokeKind::InAir, span: 2..4 },
                Stroke { kind: StrokeKind::OnSurface, span: 4..5 },
            ]
        );
        let all_down: Vec<_> = (0..4).map(|i| pt(i as f64, true)).collect();
        assert_eq!(segment_strokes(&all_down).len(), 1);
        assert!(segment_strokes(&[]).is_empty());
    }

    #[test]
    fn manifest_rejects_duplicates() {
        let dup_task = "[subjects]\nS1 70 F PD -\n[recordings]\nS1 1 a.txt\nS1 1 b.txt\n";
        assert!(DatasetManifest::parse(dup_task, ".").is_err());
        let dup_subject = "[subjects]\nS1 70 F PD -\nS1 60 M HC -\n";
        assert!(DatasetManifest::parse(dup_subject, ".").is_err());
        let undeclared = "[subjects]\nS1 70 F PD -\n[recordings]\nS2 1 a.txt\n";
        assert!(DatasetManifest::parse(undeclared, ".").is_err());
        let bad_age = "[subjects]\nS1 0 F PD -\n";
        assert!(DatasetManifest::parse(bad_age, ".").is_err());
    }

    #[test]
    fn manifest_text_round_trip() {
        let text = "columns = y x t button _ tilt elevation pressure\ntick_seconds = 0.001\nskip_lines = 1\n\n\
                    [subjects]\nS2 61 M HC -\nS1 70 F PD 23.5\n\n[recordings]\nS2 1 r/S2_1.txt\nS1 7 r/S1_7.txt\n";
        let m = DatasetManifest::parse(text, "/data").unwrap();
        assert_eq!(m.entries[1].subject.updrs, Some(23.5));
        assert_eq!(m.options.columns.column(Channel::Pressure), 7);
        let again = DatasetManifest::parse(&m.to_text(), "/data").unwrap();
        assert_eq!(m, again);
    }
}
