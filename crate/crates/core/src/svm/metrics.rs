use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary confusion counts with PD (+1) as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn new(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    pub fn from_predictions(truth: &[f64], predicted: &[f64]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Alignment {
                left: truth.len(),
                right: predicted.len(),
            });
        }
        let mut c = ConfusionCounts::default();
        for (t, p) in truth.iter().zip(predicted) {
            match (*t > 0.0, *p > 0.0) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::InvalidArgument("no predictions to score".into())),
            n => Ok((self.tp + self.tn) as f64 / n as f64),
        }
    }

    /// `None` when nothing was predicted positive.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// `None` when there are no positive cases.
    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// Accuracy, precision and recall in percent.
    pub fn metrics(&self) -> Result<Metrics> {
        let pct = |num: usize, den: usize| (den > 0).then(|| 100.0 * num as f64 / den as f64);
        Ok(Metrics {
            accuracy: pct(self.tp + self.tn, self.total())
                .ok_or_else(|| Error::InvalidArgument("no predictions to score".into()))?,
            precision: pct(self.tp, self.tp + self.fp),
            recall: pct(self.tp, self.tp + self.fn_),
        })
    }
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;
    fn add(self, o: Self) -> Self {
        ConfusionCounts::new(self.tp + o.tp, self.fp + o.fp, self.tn + o.tn, self.fn_ + o.fn_)
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let m = ConfusionCounts::new(9, 1, 8, 2).metrics().unwrap();
        assert_eq!(m.accuracy, 85.0);
        assert_eq!(m.precision, Some(90.0));
        assert!((m.recall.unwrap() - 81.82).abs() < 0.005);
        let all_neg = ConfusionCounts::new(0, 0, 8, 2).metrics().unwrap();
        assert_eq!((all_neg.precision, all_neg.recall), (None, Some(0.0)));
    }

    #[test]
    fn undefined_ratios() {
        let c = ConfusionCounts::new(0, 0, 5, 0);
        assert_eq!(c.precision(), None);
        assert_eq!(c.recall(), None);
        assert_eq!(c.accuracy().unwrap(), 1.0);
        assert!(ConfusionCounts::default().accuracy().is_err());
    }

    #[test]
    fn from_predictions_counts() {
        let c = ConfusionCounts::from_predictions(&[1.0, 1.0, -1.0, -1.0], &[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(c, ConfusionCounts::new(1, 1, 1, 1));
    }
}
