//! Seeded synthetic handwriting cohorts.
//!
//! Each recording is a looping cursive-like trajectory (two coupled tones
//! plus horizontal progression), a slow random-walk drift and white noise,
//! sampled at 100 Hz with alternating on-surface and in-air strokes. Label
//! effects enter the signal itself: a ~5.5 Hz tremor tone added to the pen
//! position and a downward pressure drift, so they reach the features
//! through the ordinary extraction code.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ink::{
    check_task, serialize_samples, Dataset, DatasetManifest, Label, ManifestEntry, ParseOptions, Recording, SamplePoint,
    Sex, SubjectMeta,
};
use crate::io::write_atomic;

pub const SAMPLE_RATE_HZ: f64 = 100.0;
pub const TREMOR_HZ: f64 = 5.5;
/// Tremor amplitude per unit effect, as a fraction of the loop radius.
pub const TREMOR_UNIT: f64 = 0.1;
/// Pressure lost over a recording per unit effect, as a fraction of the
/// subject's base pressure.
pub const DRIFT_UNIT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgeBand {
    Young,
    Old,
}

impl AgeBand {
    fn ages(self) -> (u32, u32) {
        match self {
            AgeBand::Young => (45, 64),
            AgeBand::Old => (65, 82),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellCount {
    pub label: Label,
    pub sex: Sex,
    pub band: AgeBand,
    pub count: usize,
}

/// Label effect applied to PD subjects matching the optional filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectRule {
    pub sex: Option<Sex>,
    pub band: Option<AgeBand>,
    /// Tremor amplitude in units of [`TREMOR_UNIT`].
    pub tremor: f64,
    /// Pressure decline in units of [`DRIFT_UNIT`].
    pub pressure_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub cells: Vec<CellCount>,
    pub effects: Vec<EffectRule>,
    pub tasks: Vec<u8>,
    /// White-noise standard deviation on x/y, tablet units.
    pub noise: f64,
    pub seed: u64,
}

fn cells(counts: &[(Label, Sex, AgeBand, usize)]) -> Vec<CellCount> {
    counts
        .iter()
        .map(|&(label, sex, band, count)| CellCount { label, sex, band, count })
        .collect()
}

impl SynthConfig {
    /// Subject counts of the published cohort by sex, age band and label,
    /// seven tasks, a stronger tremor for female patients and a pressure
    /// drift for older ones.
    pub fn reference_cohort(seed: u64) -> Self {
        use AgeBand::*;
        use Label::*;
        use Sex::*;
        SynthConfig {
            cells: cells(&[
                (Pd, Male, Young, 7),
                (Hc, Male, Young, 11),
                (Pd, Male, Old, 12),
                (Hc, Male, Old, 9),
                (Pd, Female, Young, 4),
                (Hc, Female, Young, 12),
                (Pd, Female, Old, 14),
                (Hc, Female, Old, 6),
            ]),
            effects: vec![
                EffectRule {
                    sex: Some(Female),
                    band: None,
                    tremor: 1.0,
                    pressure_drift: 0.0,
                },
                EffectRule {
                    sex: Some(Male),
                    band: None,
                    tremor: 0.3,
                    pressure_drift: 0.0,
                },
                EffectRule {
                    sex: None,
                    band: Some(Old),
                    tremor: 0.0,
                    pressure_drift: 0.5,
                },
            ],
            tasks: (1..=7).collect(),
            noise: 0.5,
            seed,
        }
    }

    /// 80 subjects, 20 per label × sex (half young, half old), one task,
    /// tremor in female patients only.
    pub fn sex_effect(seed: u64) -> Self {
        SynthConfig {
            effects: vec![EffectRule {
                sex: Some(Sex::Female),
                band: None,
                tremor: 1.0,
                pressure_drift: 0.0,
            }],
            ..SynthConfig::null(seed)
        }
    }

    /// The [`SynthConfig::sex_effect`] layout without any label effect.
    pub fn null(seed: u64) -> Self {
        let mut counts = Vec::new();
        for label in [Label::Pd, Label::Hc] {
            for sex in [Sex::Male, Sex::Female] {
                for band in [AgeBand::Young, AgeBand::Old] {
                    counts.push((label, sex, band, 10));
                }
            }
        }
        SynthConfig {
            cells: cells(&counts),
            effects: Vec::new(),
            tasks: vec![1],
            noise: 0.5,
            seed,
        }
    }

    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name {
            "reference-cohort" => Ok(Self::reference_cohort(seed)),
            "sex-effect" => Ok(Self::sex_effect(seed)),
            "null" => Ok(Self::null(seed)),
            _ => Err(Error::InvalidArgument(format!(
                "unknown preset `{name}` (expected reference-cohort, sex-effect or null)"
            ))),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.effects.iter().any(|e| !(e.tremor >= 0.0 && e.pressure_drift >= 0.0)) {
            return Err(Error::InvalidArgument("effect sizes must be ≥ 0".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::InvalidArgument("noise must be ≥ 0".into()));
        }
        if self.tasks.is_empty() {
            return Err(Error::InvalidArgument("no tasks to synthesize".into()));
        }
        for &t in &self.tasks {
            check_task(t)?;
        }
        Ok(())
    }

    fn effect_for(&self, s: &SubjectMeta, band: AgeBand) -> (f64, f64) {
        if s.label != Label::Pd {
            return (0.0, 0.0);
        }
        self.effects
            .iter()
            .filter(|e| e.sex.is_none_or(|x| x == s.sex) && e.band.is_none_or(|b| b == band))
            .fold((0.0, 0.0), |(t, d), e| (t + e.tremor, d + e.pressure_drift))
    }
}

/// Writing style fixed per subject across tasks.
struct Style {
    radius: f64,
    loop_hz: f64,
    aspect: f64,
    advance: f64,
    base_pressure: f64,
    tilt: f64,
    elevation: f64,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix-style scrambling of (seed, a, b)
    let mut z = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

fn task_duration(task: u8) -> f64 {
    // longer prompts for the sentence-like tasks
    [4.0, 4.0, 3.0, 5.0, 5.0, 6.0, 7.0][usize::from(task - 1)]
}

fn synth_recording(cfg: &SynthConfig, style: &Style, tremor: f64, drift: f64, task: u8, rng: &mut ChaCha8Rng) -> Vec<SamplePoint> {
    let n = (task_duration(task) * SAMPLE_RATE_HZ) as usize;
    let white = Normal::new(0.0, cfg.noise.max(f64::MIN_POSITIVE)).expect("valid sd");
    let step = Normal::new(0.0, 0.6).expect("valid sd");
    let phase = rng.random_range(0.0..TAU);
    let tremor_phase = rng.random_range(0.0..TAU);
    let amp = tremor * TREMOR_UNIT * style.radius;
    let loop_hz = style.loop_hz * rng.random_range(0.95..1.05);

    // stroke schedule: on-surface 0.8–1.6 s, in-air 0.2–0.5 s
    let mut contact = Vec::with_capacity(n);
    let mut on = true;
    while contact.len() < n {
        let len = if on {
            rng.random_range(0.8..1.6)
        } else {
            rng.random_range(0.2..0.5)
        };
        let k = ((len * SAMPLE_RATE_HZ) as usize).max(2);
        contact.extend(std::iter::repeat_n(on, k));
        on = !on;
    }
    contact.truncate(n);

    let (mut wx, mut wy) = (0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    for (i, &button) in contact.iter().enumerate() {
        let t = i as f64 / SAMPLE_RATE_HZ;
        wx += step.sample(rng);
        wy += step.sample(rng);
        let w = TAU * loop_hz * t + phase;
        let trem = TAU * TREMOR_HZ * t + tremor_phase;
        let noise = cfg.noise > 0.0;
        let (nx, ny) = if noise {
            (white.sample(rng), white.sample(rng))
        } else {
            (0.0, 0.0)
        };
        let x = style.advance * t + style.radius * w.cos() + 0.3 * style.radius * (2.0 * w).sin() + wx + amp * trem.sin() + nx;
        let y = style.aspect * style.radius * w.sin() + wy + amp * (trem + 0.7).cos() + ny;
        let frac = t / task_duration(task);
        let pressure = if button {
            let wobble = 0.08 * (TAU * 0.7 * t + phase).sin();
            (style.base_pressure * (1.0 + wobble - drift * DRIFT_UNIT * frac) + rng.random_range(-4.0..4.0)).max(1.0)
        } else {
            0.0
        };
        out.push(SamplePoint {
            x: round_to(x, 2),
            y: round_to(y, 2),
            t,
            button,
            pressure: round_to(pressure, 1),
            tilt: round_to(style.tilt + 2.0 * (TAU * 0.3 * t).sin(), 1),
            elevation: round_to(style.elevation + 1.5 * (TAU * 0.2 * t).cos(), 1),
        });
    }
    out
}

/// Subjects sorted by id and their recordings sorted by (id, task), exactly
/// as [`crate::ink::load_dataset`] returns them after a round trip through
/// disk.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut plan = Vec::new();
    for cell in &cfg.cells {
        for _ in 0..cell.count {
            plan.push(*cell);
        }
    }
    let subjects: Vec<(SubjectMeta, AgeBand)> = plan
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, i as u64, 0));
            let (lo, hi) = cell.band.ages();
            let age = rng.random_range(lo..=hi);
            Ok((SubjectMeta::new(format!("S{:03}", i + 1), age, cell.sex, cell.label)?, cell.band))
        })
        .collect::<Result<_>>()?;

    let recordings: Vec<Vec<Recording>> = subjects
        .par_iter()
        .enumerate()
        .map(|(i, (s, band))| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, i as u64, 1));
            let style = Style {
                radius: rng.random_range(250.0..350.0),
                loop_hz: rng.random_range(1.8..2.4),
                aspect: rng.random_range(0.9..1.3),
                advance: rng.random_range(90.0..130.0),
                base_pressure: rng.random_range(450.0..650.0),
                tilt: rng.random_range(40.0..60.0),
                elevation: rng.random_range(50.0..70.0),
            };
            let (tremor, drift) = cfg.effect_for(s, *band);
            cfg.tasks
                .iter()
                .map(|&task| {
                    let mut trng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, i as u64, 100 + u64::from(task)));
                    let samples = synth_recording(cfg, &style, tremor, drift, task, &mut trng);
                    Recording::new(s.clone(), task, samples)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut subjects: Vec<SubjectMeta> = subjects.into_iter().map(|(s, _)| s).collect();
    let mut recordings: Vec<Recording> = recordings.into_iter().flatten().collect();
    subjects.sort_by(|a, b| a.id.cmp(&b.id));
    recordings.sort_by(|a, b| (&a.subject.id, a.task).cmp(&(&b.subject.id, b.task)));
    Ok(Dataset { subjects, recordings })
}

/// Generates the cohort and writes `recordings/<id>_t<task>.txt` plus
/// `manifest.txt` under `dir`. Returns the manifest path.
pub fn write_dataset(cfg: &SynthConfig, dir: &Path) -> Result<PathBuf> {
    let data = generate(cfg)?;
    let rec_dir = dir.join("recordings");
    std::fs::create_dir_all(&rec_dir).map_err(|e| Error::io(&rec_dir, e))?;
    let mut entries: Vec<ManifestEntry> = data
        .subjects
        .iter()
        .map(|s| ManifestEntry {
            subject: s.clone(),
            recordings: Default::default(),
        })
        .collect();
    for (k, r) in data.recordings.iter().enumerate() {
        let rel = PathBuf::from("recordings").join(format!("{}_t{}.txt", r.subject.id, r.task));
        write_atomic(&dir.join(&rel), serialize_samples(&r.samples).as_bytes())?;
        let slot = entries
            .iter()
            .position(|e| e.subject.id == r.subject.id)
            .ok_or_else(|| Error::Degenerate(format!("recording {k} without subject")))?;
        entries[slot].recordings.insert(r.task, rel);
    }
    let manifest = DatasetManifest {
        entries,
        options: ParseOptions::default(),
        base_dir: dir.to_path_buf(),
    };
    let path = dir.join("manifest.txt");
    write_atomic(&path, manifest.to_text().as_bytes())?;
    Ok(path)
}
