//! Feature registry and per-recording feature vectors.
//!
//! Every time series produced by the kinematic and EMD stages is reduced to
//! scalars by a battery of statistical functionals. Each resulting value is
//! named by a [`FeatureId`] whose string form (`t7.air.vel_x.p90`) is the
//! column key of the feature matrix.
//!
//! The full registry holds 357 features per task:
//!
//! | group                                             | streams      | count |
//! |---------------------------------------------------|--------------|-------|
//! | speed, vel/acc/jerk magnitude and x/y components  | on, air      | 9 × 15 × 2 = 270 |
//! | pressure rate                                     | on           | 15    |
//! | NCV/NCA counts and per-second rates (mag, x, y)   | on, air      | 12 × 2 = 24 |
//! | x/y Shannon, Rényi-2/3, CE, TKE                   | on           | 10    |
//! | x/y SNR of CE, TKE, intrinsic CE, intrinsic TKE   | on           | 8     |
//! | x/y IMF 1–3 CE, TKE, Shannon, Rényi-2/3           | on           | 30    |
//!
//! The compact profile keeps mean, std and p90 of the 19 series plus the
//! eight SNR features (65 per task).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::emd::{decompose, ImfSet, MAX_IMFS};
use crate::error::{Error, Result};
use crate::ink::{check_task, segment_strokes, Dataset, Label, Recording, Sex, StrokeKind, SubjectMeta};
use crate::kinematics::{stream_kinematics, StreamKinematics};
use crate::measures::{
    conventional_energy, energy_snr, intrinsic_energy_snr, intrinsic_measures, renyi_from_probabilities,
    shannon_from_probabilities, teager_kaiser_energy, EnergyKind, HistogramEstimate, RenyiOrder,
    DEFAULT_BINS,
};

const GEOMEAN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Functional {
    Mean,
    GeoMean,
    Median,
    Mode,
    Std,
    Moment2,
    Moment3,
    Kurtosis,
    Range,
    RobustRange,
    Percentile(u8),
    Trimmed(u8),
    /// Scalar pass-through for counts, rates, entropies and energies.
    Value,
}

pub const PERCENTILES: [u8; 9] = [1, 5, 10, 20, 30, 50, 90, 95, 99];
pub const TRIMS: [u8; 3] = [20, 30, 40];

impl Functional {
    pub fn all() -> Vec<Functional> {
        let mut out = vec![
            Functional::Mean,
            Functional::GeoMean,
            Functional::Median,
            Functional::Mode,
            Functional::Std,
            Functional::Moment2,
            Functional::Moment3,
            Functional::Kurtosis,
            Functional::Range,
            Functional::RobustRange,
        ];
        out.extend(PERCENTILES.map(Functional::Percentile));
        out.extend(TRIMS.map(Functional::Trimmed));
        out.push(Functional::Value);
        out
    }

    /// `None` for an empty sequence or an undefined statistic (kurtosis of a
    /// constant, `Value` of a sequence longer than one).
    pub fn apply(self, s: &[f64]) -> Option<f64> {
        if s.is_empty() {
            return None;
        }
        let n = s.len() as f64;
        let mean = || s.iter().sum::<f64>() / n;
        let central = |k: i32| {
            let m = mean();
            s.iter().map(|v| (v - m).powi(k)).sum::<f64>() / n
        };
        let sorted = || {
            let mut v = s.to_vec();
            v.sort_by(f64::total_cmp);
            v
        };
        match self {
            Functional::Mean => Some(mean()),
            Functional::GeoMean => {
                Some((s.iter().map(|v| v.abs().max(GEOMEAN_FLOOR).ln()).sum::<f64>() / n).exp())
            }
            Functional::Median => Some(percentile_sorted(&sorted(), 50.0)),
            Functional::Mode => HistogramEstimate::equal_width(s, DEFAULT_BINS).ok().map(|h| h.mode()),
            Functional::Std => Some(central(2).sqrt()),
            Functional::Moment2 => Some(central(2)),
            Functional::Moment3 => Some(central(3)),
            Functional::Kurtosis => {
                let m2 = central(2);
                (m2 > 0.0).then(|| central(4) / (m2 * m2))
            }
            Functional::Range => {
                let v = sorted();
                Some(v[v.len() - 1] - v[0])
            }
            Functional::RobustRange => {
                let v = sorted();
                Some(percentile_sorted(&v, 95.0) - percentile_sorted(&v, 5.0))
            }
            Functional::Percentile(p) => Some(percentile_sorted(&sorted(), f64::from(p))),
            Functional::Trimmed(pct) => {
                let v = sorted();
                let cut = (v.len() as f64 * f64::from(pct) / 200.0).round() as usize;
                let kept = &v[cut..v.len() - cut];
                Some(kept.iter().sum::<f64>() / kept.len() as f64)
            }
            Functional::Value => (s.len() == 1).then_some(s[0]),
        }
    }
}

/// Linear interpolation between closest ranks: position `(n - 1) p / 100`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::Mean => f.write_str("mean"),
            Functional::GeoMean => f.write_str("geomean"),
            Functional::Median => f.write_str("median"),
            Functional::Mode => f.write_str("mode"),
            Functional::Std => f.write_str("std"),
            Functional::Moment2 => f.write_str("m2"),
            Functional::Moment3 => f.write_str("m3"),
            Functional::Kurtosis => f.write_str("kurtosis"),
            Functional::Range => f.write_str("range"),
            Functional::RobustRange => f.write_str("robust_range"),
            Functional::Percentile(p) => write!(f, "p{p}"),
            Functional::Trimmed(t) => write!(f, "trim{t}"),
            Functional::Value => f.write_str("value"),
        }
    }
}

impl FromStr for Functional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Functional::all()
            .into_iter()
            .find(|f| f.to_string() == s)
            .ok_or_else(|| Error::UnknownFunctional(s.to_string()))
    }
}

/// Applies a functional by registry name.
pub fn functional(name: &str, s: &[f64]) -> Result<Option<f64>> {
    Ok(name.parse::<Functional>()?.apply(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stream {
    OnSurface,
    InAir,
}

impl Stream {
    fn tag(self) -> &'static str {
        match self {
            Stream::OnSurface => "on",
            Stream::InAir => "air",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureId {
    pub task: u8,
    pub stream: Stream,
    pub base: String,
    pub functional: Functional,
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}.{}.{}.{}", self.task, self.stream.tag(), self.base, self.functional)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegistryProfile {
    #[default]
    Full,
    Compact,
}

impl FromStr for RegistryProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(RegistryProfile::Full),
            "compact" => Ok(RegistryProfile::Compact),
            other => Err(Error::InvalidArgument(format!("unknown registry profile `{other}`"))),
        }
    }
}

const KINEMATIC_SERIES: [&str; 9] = [
    "speed", "vel_x", "vel_y", "acc", "acc_x", "acc_y", "jerk", "jerk_x", "jerk_y",
];
const COUNT_BASES: [&str; 6] = ["ncv", "ncv_x", "ncv_y", "nca", "nca_x", "nca_y"];
const COORD_MEASURES: [&str; 5] = ["shannon", "renyi2", "renyi3", "ce", "tke"];
const SNR_KINDS: [&str; 4] = ["snr_ce", "snr_tke", "snr_ice", "snr_itke"];

fn battery(profile: RegistryProfile) -> Vec<Functional> {
    use Functional::*;
    match profile {
        RegistryProfile::Full => vec![
            Mean,
            GeoMean,
            Median,
            Mode,
            Std,
            Moment3,
            Kurtosis,
            Range,
            RobustRange,
            Percentile(1),
            Percentile(20),
            Percentile(30),
            Percentile(90),
            Percentile(95),
            Trimmed(40),
        ],
        RegistryProfile::Compact => vec![Mean, Std, Percentile(90)],
    }
}

/// Feature ids of one task, in registry order. Depends only on its arguments.
pub fn registry(task: u8, profile: RegistryProfile) -> Vec<FeatureId> {
    let id = |stream, base: String, functional| FeatureId {
        task,
        stream,
        base,
        functional,
    };
    let fns = battery(profile);
    let mut out = Vec::new();
    for stream in [Stream::OnSurface, Stream::InAir] {
        let mut series: Vec<&str> = KINEMATIC_SERIES.to_vec();
        if stream == Stream::OnSurface {
            series.push("pressure_rate");
        }
        for base in series {
            for f in &fns {
                out.push(id(stream, base.to_string(), *f));
            }
        }
        if profile == RegistryProfile::Full {
            for base in COUNT_BASES {
                out.push(id(stream, base.to_string(), Functional::Value));
            }
            for base in COUNT_BASES {
                out.push(id(stream, format!("{base}_rel"), Functional::Value));
            }
        }
    }
    for coord in ["x", "y"] {
        if profile == RegistryProfile::Full {
            for m in COORD_MEASURES {
                out.push(id(Stream::OnSurface, format!("{coord}_{m}"), Functional::Value));
            }
        }
        for s in SNR_KINDS {
            out.push(id(Stream::OnSurface, format!("{coord}_{s}"), Functional::Value));
        }
        if profile == RegistryProfile::Full {
            for k in 1..=3 {
                for m in COORD_MEASURES {
                    out.push(id(Stream::OnSurface, format!("{coord}_imf{k}_{m}"), Functional::Value));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub subject: String,
    pub task: u8,
    pub ids: Vec<FeatureId>,
    /// Aligned with `ids`; `None` marks a feature that could not be computed.
    pub values: Vec<Option<f64>>,
}

struct CoordinateMeasures {
    scalars: HashMap<String, f64>,
}

impl CoordinateMeasures {
    fn compute(coord: &str, s: &[f64]) -> Self {
        let mut scalars = HashMap::new();
        let mut put = |name: String, v: Option<f64>| {
            if let Some(v) = v.filter(|v| v.is_finite()) {
                scalars.insert(name, v);
            }
        };
        if let Ok(h) = HistogramEstimate::equal_width(s, DEFAULT_BINS) {
            put(format!("{coord}_shannon"), Some(shannon_from_probabilities(&h.probabilities)));
            put(format!("{coord}_renyi2"), Some(renyi_from_probabilities(&h.probabilities, RenyiOrder::Two)));
            put(format!("{coord}_renyi3"), Some(renyi_from_probabilities(&h.probabilities, RenyiOrder::Three)));
            put(format!("{coord}_ce"), Some(conventional_energy(s)));
        }
        put(format!("{coord}_tke"), teager_kaiser_energy(s).ok());

        let imfs: Option<ImfSet> = decompose(s, MAX_IMFS).ok();
        if let Some(imfs) = &imfs {
            let kinds = [EnergyKind::Conventional, EnergyKind::TeagerKaiser];
            for (name, kind) in ["snr_ce", "snr_tke"].iter().zip(kinds) {
                put(format!("{coord}_{name}"), energy_snr(s, imfs, kind).ok().map(|p| p.snr_db));
            }
            for (name, kind) in ["snr_ice", "snr_itke"].iter().zip(kinds) {
                put(format!("{coord}_{name}"), intrinsic_energy_snr(imfs, kind).ok().map(|p| p.snr_db));
            }
            for (k, m) in intrinsic_measures(imfs).iter().enumerate() {
                if let Some(m) = m {
                    let k = k + 1;
                    put(format!("{coord}_imf{k}_ce"), Some(m.ce));
                    put(format!("{coord}_imf{k}_tke"), Some(m.tke));
                    put(format!("{coord}_imf{k}_shannon"), Some(m.shannon));
                    put(format!("{coord}_imf{k}_renyi2"), Some(m.renyi2));
                    put(format!("{coord}_imf{k}_renyi3"), Some(m.renyi3));
                }
            }
        }
        CoordinateMeasures { scalars }
    }
}

fn series<'a>(k: &'a StreamKinematics, base: &str) -> Option<&'a [f64]> {
    Some(match base {
        "speed" => &k.speed,
        "vel_x" => &k.vel_x,
        "vel_y" => &k.vel_y,
        "acc" => &k.acc,
        "acc_x" => &k.acc_x,
        "acc_y" => &k.acc_y,
        "jerk" => &k.jerk,
        "jerk_x" => &k.jerk_x,
        "jerk_y" => &k.jerk_y,
        "pressure_rate" => &k.pressure_rate,
        _ => return None,
    })
}

fn count(k: &StreamKinematics, base: &str) -> Option<f64> {
    let (stem, relative) = match base.strip_suffix("_rel") {
        Some(stem) => (stem, true),
        None => (base, false),
    };
    let component = match stem.split_once('_').map(|(_, axis)| axis) {
        None => 0,
        Some("x") => 1,
        Some("y") => 2,
        Some(_) => return None,
    };
    let is_ncv = stem.starts_with("ncv");
    if k.strokes == 0 {
        return None;
    }
    if relative {
        let c = k.counts(component)?;
        Some(if is_ncv { c.relative_ncv } else { c.relative_nca })
    } else if is_ncv {
        Some(k.ncv[component] as f64)
    } else {
        Some(k.nca[component] as f64)
    }
}

pub fn build_feature_vector(rec: &Recording, profile: RegistryProfile) -> FeatureVector {
    let strokes = segment_strokes(&rec.samples);
    let on = stream_kinematics(&rec.samples, &strokes, StrokeKind::OnSurface);
    let air = stream_kinematics(&rec.samples, &strokes, StrokeKind::InAir);
    let coords = [("x", &on.x), ("y", &on.y)].map(|(c, s)| CoordinateMeasures::compute(c, s));

    let ids = registry(rec.task, profile);
    let values = ids
        .iter()
        .map(|id| {
            let k = match id.stream {
                Stream::OnSurface => &on,
                Stream::InAir => &air,
            };
            let v = if id.functional != Functional::Value {
                series(k, &id.base).and_then(|s| id.functional.apply(s))
            } else if let Some(c) = count(k, &id.base) {
                Some(c)
            } else {
                coords.iter().find_map(|c| c.scalars.get(&id.base).copied())
            };
            v.filter(|v| v.is_finite())
        })
        .collect();
    FeatureVector {
        subject: rec.subject.id.clone(),
        task: rec.task,
        ids,
        values,
    }
}

/// Subjects × features with labels and cohort tags. Missing entries are
/// filled with the column median and flagged in `imputed`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub subjects: Vec<SubjectMeta>,
    /// Row-major, `subjects.len() × columns.len()`.
    pub values: Vec<f64>,
    pub imputed: Vec<bool>,
}

impl FeatureMatrix {
    /// Builds a matrix from rows that may contain missing values. Columns
    /// missing for every row are dropped; the rest are median-imputed.
    pub fn from_raw(columns: Vec<String>, subjects: Vec<SubjectMeta>, raw: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::Degenerate("feature matrix without subjects".into()));
        }
        let keep: Vec<usize> = (0..columns.len())
            .filter(|&c| {
                let any = raw.iter().any(|r| r[c].is_some());
                if !any {
                    log::info!("dropping feature {} (missing for every subject)", columns[c]);
                }
                any
            })
            .collect();
        let ncols = keep.len();
        let mut values = Vec::with_capacity(subjects.len() * ncols);
        let mut imputed = Vec::with_capacity(subjects.len() * ncols);
        for row in &raw {
            for &c in &keep {
                values.push(row[c].unwrap_or(f64::NAN));
                imputed.push(row[c].is_none());
            }
        }
        let mut m = FeatureMatrix {
            columns: keep.iter().map(|&c| columns[c].clone()).collect(),
            subjects,
            values,
            imputed,
        };
        let all: Vec<usize> = (0..m.nrows()).collect();
        m.impute_from_rows(&all);
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.subjects.len()
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.ncols();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.nrows()).map(|r| self.get(r, col)).collect()
    }

    /// ±1 targets, PD positive.
    pub fn targets(&self) -> Vec<f64> {
        self.subjects.iter().map(|s| s.label.sign()).collect()
    }

    pub fn label_counts(&self) -> (usize, usize) {
        let pd = self.subjects.iter().filter(|s| s.label == Label::Pd).count();
        (pd, self.nrows() - pd)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Replaces every imputed cell with the median of the observed values of
    /// its column over `rows` (falling back to all observed values when none
    /// of `rows` is observed).
    pub fn impute_from_rows(&mut self, rows: &[usize]) {
        let ncols = self.ncols();
        for c in 0..ncols {
            let observed = |rs: &mut dyn Iterator<Item = usize>| -> Vec<f64> {
                rs.filter(|&r| !self.imputed[r * ncols + c]).map(|r| self.values[r * ncols + c]).collect()
            };
            let mut vals = observed(&mut rows.iter().copied());
            if vals.is_empty() {
                vals = observed(&mut (0..self.nrows()));
            }
            if vals.is_empty() || vals.len() == self.nrows() {
                continue;
            }
            vals.sort_by(f64::total_cmp);
            let median = percentile_sorted(&vals, 50.0);
            for r in 0..self.nrows() {
                if self.imputed[r * ncols + c] {
                    self.values[r * ncols + c] = median;
                }
            }
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.ncols());
        let mut imputed = Vec::with_capacity(rows.len() * self.ncols());
        for &r in rows {
            values.extend_from_slice(self.row(r));
            imputed.extend_from_slice(&self.imputed[r * self.ncols()..(r + 1) * self.ncols()]);
        }
        FeatureMatrix {
            columns: self.columns.clone(),
            subjects: rows.iter().map(|&r| self.subjects[r].clone()).collect(),
            values,
            imputed,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(self.nrows() * cols.len());
        let mut imputed = Vec::with_capacity(self.nrows() * cols.len());
        for r in 0..self.nrows() {
            for &c in cols {
                values.push(self.get(r, c));
                imputed.push(self.imputed[r * self.ncols() + c]);
            }
        }
        FeatureMatrix {
            columns: cols.iter().map(|&c| self.columns[c].clone()).collect(),
            subjects: self.subjects.clone(),
            values,
            imputed,
        }
    }

    /// Tab-separated text: `id label sex age <features...>`, imputed cells as
    /// `NA`. Values use the shortest exact decimal form.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("id\tlabel\tsex\tage");
        for c in &self.columns {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');
        for (r, s) in self.subjects.iter().enumerate() {
            out.push_str(&format!("{}\t{}\t{}\t{}", s.id, s.label, s.sex, s.age));
            for c in 0..self.ncols() {
                out.push('\t');
                if self.imputed[r * self.ncols() + c] {
                    out.push_str("NA");
                } else {
                    out.push_str(&self.get(r, c).to_string());
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            message: "empty feature table".into(),
        })?;
        let head: Vec<&str> = header.split('\t').collect();
        if head.len() < 4 || head[..4] != ["id", "label", "sex", "age"] {
            return Err(Error::Parse {
                line: 1,
                message: "header must start with id, label, sex, age".into(),
            });
        }
        let columns: Vec<String> = head[4..].iter().map(|s| s.to_string()).collect();
        let mut subjects = Vec::new();
        let mut raw = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let perr = |message: String| Error::Parse { line: line_no, message };
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != head.len() {
                return Err(perr(format!("expected {} cells, found {}", head.len(), cells.len())));
            }
            let label: Label = cells[1].parse().map_err(perr)?;
            let sex: Sex = cells[2].parse().map_err(perr)?;
            let age: u32 = cells[3].parse().map_err(|_| perr(format!("bad age `{}`", cells[3])))?;
            subjects.push(SubjectMeta::new(cells[0], age, sex, label).map_err(|e| perr(e.to_string()))?);
            raw.push(
                cells[4..]
                    .iter()
                    .map(|c| match *c {
                        "NA" => Ok(None),
                        v => v.parse::<f64>().map(Some).map_err(|_| perr(format!("bad value `{v}`"))),
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        FeatureMatrix::from_raw(columns, subjects, raw)
    }
}

/// Feature matrix over the given tasks (columns concatenated in task order).
/// Subjects lacking any of the tasks are excluded.
pub fn assemble_matrix(dataset: &Dataset, tasks: &[u8], profile: RegistryProfile) -> Result<FeatureMatrix> {
    for &t in tasks {
        check_task(t)?;
    }
    let coverage = dataset.coverage();
    let subjects: Vec<SubjectMeta> = dataset
        .subjects
        .iter()
        .filter(|s| {
            let ok = tasks.iter().all(|t| coverage[s.id.as_str()].contains(t));
            if !ok {
                log::warn!("excluding subject {}: missing one of tasks {:?}", s.id, tasks);
            }
            ok
        })
        .cloned()
        .collect();
    if subjects.is_empty() {
        return Err(Error::Degenerate(format!("no subject has all of tasks {tasks:?}")));
    }
    let columns: Vec<String> = tasks
        .iter()
        .flat_map(|&t| registry(t, profile))
        .map(|id| id.to_string())
        .collect();
    let raw: Vec<Vec<Option<f64>>> = subjects
        .par_iter()
        .map(|s| {
            tasks
                .iter()
                .flat_map(|&t| {
                    let rec = dataset
                        .recordings
                        .iter()
                        .find(|r| r.subject.id == s.id && r.task == t)
                        .expect("coverage checked");
                    build_feature_vector(rec, profile).values
                })
                .collect()
        })
        .collect();
    FeatureMatrix::from_raw(columns, subjects, raw)
}
