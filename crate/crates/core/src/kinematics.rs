//! Kinematic series from pen trajectories: velocity, acceleration and jerk
//! (magnitude plus horizontal/vertical components), direction-change counts
//! and pressure rate.
//!
//! Derivatives are forward differences over the recorded (nonuniform)
//! timestamps. They are taken per stroke and concatenated per stream, never
//! across a pen-up/pen-down boundary.

use crate::error::{Error, Result};
use crate::ink::{SamplePoint, Stroke, StrokeKind};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSeries {
    pub values: Vec<f64>,
    /// Seconds, strictly increasing.
    pub timestamps: Vec<f64>,
    pub tag: String,
}

impl ChannelSeries {
    pub fn new(values: Vec<f64>, timestamps: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        if values.len() != timestamps.len() {
            return Err(Error::Alignment {
                left: values.len(),
                right: timestamps.len(),
            });
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("timestamps must strictly increase".into()));
        }
        Ok(ChannelSeries {
            values,
            timestamps,
            tag: tag.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `d[i] = (v[i+1] - v[i]) / (t[i+1] - t[i])`, stamped at interval midpoints.
pub fn derivative(s: &ChannelSeries) -> Result<ChannelSeries> {
    if s.len() < 2 {
        return Err(Error::Degenerate(format!(
            "derivative of `{}` needs 2 samples, got {}",
            s.tag,
            s.len()
        )));
    }
    let (values, timestamps) = s
        .values
        .windows(2)
        .zip(s.timestamps.windows(2))
        .map(|(v, t)| ((v[1] - v[0]) / (t[1] - t[0]), 0.5 * (t[0] + t[1])))
        .unzip();
    Ok(ChannelSeries {
        values,
        timestamps,
        tag: format!("d/dt {}", s.tag),
    })
}

pub fn trajectory_speed(vx: &ChannelSeries, vy: &ChannelSeries) -> Result<ChannelSeries> {
    if vx.len() != vy.len() {
        return Err(Error::Alignment {
            left: vx.len(),
            right: vy.len(),
        });
    }
    Ok(ChannelSeries {
        values: vx.values.iter().zip(&vy.values).map(|(a, b)| a.hypot(*b)).collect(),
        timestamps: vx.timestamps.clone(),
        tag: "speed".into(),
    })
}

pub fn pressure_rate(p: &ChannelSeries) -> Result<ChannelSeries> {
    derivative(p)
}

/// Number of sign changes in the first difference of `s`, i.e. the count of
/// interior local extrema. Zero differences are skipped, so a flat step
/// between a rise and a fall still counts once.
pub fn extremum_count(s: &[f64]) -> usize {
    let mut prev = 0.0f64;
    let mut changes = 0;
    for w in s.windows(2) {
        let d = w[1] - w[0];
        if d == 0.0 {
            continue;
        }
        if prev != 0.0 && d.signum() != prev.signum() {
            changes += 1;
        }
        prev = d;
    }
    changes
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionCounts {
    pub ncv: usize,
    pub nca: usize,
    pub duration: f64,
    pub relative_ncv: f64,
    pub relative_nca: f64,
}

impl DirectionCounts {
    pub fn from_counts(ncv: usize, nca: usize, duration: f64) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::InvalidArgument(format!("duration {duration} must be > 0")));
        }
        Ok(DirectionCounts {
            ncv,
            nca,
            duration,
            relative_ncv: ncv as f64 / duration,
            relative_nca: nca as f64 / duration,
        })
    }
}

pub fn direction_counts(vel: &[f64], acc: &[f64], duration: f64) -> Result<DirectionCounts> {
    if vel.is_empty() || acc.is_empty() {
        return Err(Error::Degenerate("direction counts of an empty series".into()));
    }
    DirectionCounts::from_counts(extremum_count(vel), extremum_count(acc), duration)
}

/// Kinematics of every stroke of one kind, concatenated in time order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StreamKinematics {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub pressure: Vec<f64>,
    pub speed: Vec<f64>,
    pub vel_x: Vec<f64>,
    pub vel_y: Vec<f64>,
    pub acc: Vec<f64>,
    pub acc_x: Vec<f64>,
    pub acc_y: Vec<f64>,
    pub jerk: Vec<f64>,
    pub jerk_x: Vec<f64>,
    pub jerk_y: Vec<f64>,
    pub pressure_rate: Vec<f64>,
    /// Extremum counts summed over strokes: (speed, x-velocity, y-velocity)
    /// for NCV and (acceleration, x, y) for NCA.
    pub ncv: [usize; 3],
    pub nca: [usize; 3],
    /// Summed stroke durations in seconds.
    pub duration: f64,
    pub strokes: usize,
}

impl StreamKinematics {
    /// Direction counts for component 0 (magnitude), 1 (x) or 2 (y); `None`
    /// when the stream has no duration.
    pub fn counts(&self, component: usize) -> Option<DirectionCounts> {
        DirectionCounts::from_counts(self.ncv[component], self.nca[component], self.duration).ok()
    }
}

fn series_of(samples: &[SamplePoint], f: impl Fn(&SamplePoint) -> f64, tag: &str) -> ChannelSeries {
    ChannelSeries {
        values: samples.iter().map(f).collect(),
        timestamps: samples.iter().map(|s| s.t).collect(),
        tag: tag.into(),
    }
}

fn extend_derivative(out: &mut Vec<f64>, s: &ChannelSeries) -> Option<ChannelSeries> {
    let d = derivative(s).ok()?;
    out.extend_from_slice(&d.values);
    Some(d)
}

pub fn stream_kinematics(samples: &[SamplePoint], strokes: &[Stroke], kind: StrokeKind) -> StreamKinematics {
    let mut k = StreamKinematics::default();
    for stroke in strokes.iter().filter(|s| s.kind == kind) {
        let pts = &samples[stroke.span.clone()];
        k.strokes += 1;
        k.x.extend(pts.iter().map(|p| p.x));
        k.y.extend(pts.iter().map(|p| p.y));
        k.pressure.extend(pts.iter().map(|p| p.pressure));
        if pts.len() < 2 {
            continue;
        }
        k.duration += pts[pts.len() - 1].t - pts[0].t;

        let x = series_of(pts, |p| p.x, "x");
        let y = series_of(pts, |p| p.y, "y");
        let p = series_of(pts, |p| p.pressure, "pressure");
        if kind == StrokeKind::OnSurface {
            if let Ok(rate) = pressure_rate(&p) {
                k.pressure_rate.extend_from_slice(&rate.values);
            }
        }
        let (Some(vx), Some(vy)) = (extend_derivative(&mut k.vel_x, &x), extend_derivative(&mut k.vel_y, &y))
        else {
            continue;
        };
        let speed = trajectory_speed(&vx, &vy).expect("aligned by construction");
        k.speed.extend_from_slice(&speed.values);
        k.ncv[0] += extremum_count(&speed.values);
        k.ncv[1] += extremum_count(&vx.values);
        k.ncv[2] += extremum_count(&vy.values);

        let acc = extend_derivative(&mut k.acc, &speed);
        let ax = extend_derivative(&mut k.acc_x, &vx);
        let ay = extend_derivative(&mut k.acc_y, &vy);
        for (slot, a) in [&acc, &ax, &ay].into_iter().enumerate() {
            if let Some(a) = a {
                k.nca[slot] += extremum_count(&a.values);
            }
        }
        if let Some(a) = &acc {
            extend_derivative(&mut k.jerk, a);
        }
        if let Some(a) = &ax {
            extend_derivative(&mut k.jerk_x, a);
        }
        if let Some(a) = &ay {
            extend_derivative(&mut k.jerk_y, a);
        }
    }
    k
}
