use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::svm::kernel::Samples;

/// Per-column zero-mean / unit-std scaling fitted on training rows.
///
/// Columns with zero spread map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn fit(x: &Samples) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(Error::InvalidArgument("cannot standardize zero rows".into()));
        }
        let mut mean = vec![0.0; x.dim];
        for row in x.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; x.dim];
        for row in x.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > f64::EPSILON * 16.0 { sd } else { 0.0 }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[f64], out: &mut Vec<f64>) {
        for ((v, m), s) in row.iter().zip(&self.mean).zip(&self.scale) {
            out.push(if *s > 0.0 { (v - m) / s } else { 0.0 });
        }
    }

    pub fn transform(&self, x: &Samples) -> Result<Samples> {
        if x.dim != self.dim() {
            return Err(Error::Alignment {
                left: self.dim(),
                right: x.dim,
            });
        }
        let mut data = Vec::with_capacity(x.data.len());
        for row in x.rows() {
            self.transform_row(row, &mut data);
        }
        Ok(Samples { data, dim: x.dim })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_rows_become_standard() {
        let x = Samples::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0], vec![5.0, 5.0]]).unwrap();
        let s = Standardizer::fit(&x).unwrap();
        let t = s.transform(&x).unwrap();
        let col0: Vec<f64> = t.rows().map(|r| r[0]).collect();
        let mean: f64 = col0.iter().sum::<f64>() / 3.0;
        let var: f64 = col0.iter().map(|v| v * v).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        assert!(t.rows().all(|r| r[1] == 0.0));
    }

    #[test]
    fn three_point_column() {
        let x = Samples::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let t = Standardizer::fit(&x).unwrap().transform(&x).unwrap();
        let expected = 1.5f64.sqrt();
        let got: Vec<f64> = t.rows().map(|r| r[0]).collect();
        assert!((got[0] + expected).abs() < 1e-12 && got[1].abs() < 1e-12 && (got[2] - expected).abs() < 1e-12);
        assert!((expected - 1.2247).abs() < 1e-4);
    }
}
