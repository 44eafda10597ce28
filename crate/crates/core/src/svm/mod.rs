//! RBF-kernel support vector machine: dual solver, scaling, cross-validated
//! grid search and model persistence.

mod cv;
mod kernel;
mod metrics;
mod smo;
mod standardize;

pub use cv::{grid_search, stratified_kfold, FoldAssignment, GridCell, GridResult, GridSpec, C_GRID, DEFAULT_FOLDS, Z_GRID};
pub use kernel::{distance_matrix, kernel_from_distances, rbf_from_distance, rbf_kernel, squared_distance, Samples};
pub use metrics::{ConfusionCounts, Metrics};
pub use smo::{dual_objective, solve_dual, DualSolution, SmoOptions};
pub use standardize::Standardizer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "inkmark-svm/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub objective: f64,
    pub kkt_gap: f64,
    pub converged: bool,
}

/// Trained classifier. Support vectors are stored already standardized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub format: String,
    pub slack: f64,
    pub kernel_width: f64,
    pub standardizer: Standardizer,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub solver: SolverStats,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: f64,
    pub decision: f64,
}

fn check_labels(y: &[f64]) -> Result<()> {
    if let Some(v) = y.iter().find(|v| **v != 1.0 && **v != -1.0) {
        return Err(Error::InvalidArgument(format!("labels must be +1 or -1, got {v}")));
    }
    let pos = y.iter().filter(|v| **v > 0.0).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass("training labels contain one class".into()));
    }
    Ok(())
}

/// Trains on rows that are already scaled; the model carries an identity
/// standardizer.
pub fn train_smo(x: &Samples, y: &[f64], c: f64, z: f64, opts: &SmoOptions) -> Result<SvmModel> {
    train_scaled(x, y, c, z, opts, Standardizer::identity(x.dim))
}

/// Fits a standardizer on `x`, then trains.
pub fn fit(x: &Samples, y: &[f64], c: f64, z: f64, opts: &SmoOptions) -> Result<SvmModel> {
    let scaler = Standardizer::fit(x)?;
    let scaled = scaler.transform(x)?;
    train_scaled(&scaled, y, c, z, opts, scaler)
}

fn train_scaled(x: &Samples, y: &[f64], c: f64, z: f64, opts: &SmoOptions, standardizer: Standardizer) -> Result<SvmModel> {
    if x.len() != y.len() {
        return Err(Error::Alignment {
            left: x.len(),
            right: y.len(),
        });
    }
    check_labels(y)?;
    if !(c > 0.0) || !(z > 0.0) {
        return Err(Error::InvalidArgument(format!("C = {c} and z = {z} must both be > 0")));
    }
    let gram = kernel_from_distances(&distance_matrix(x, x), z);
    let sol = solve_dual(&gram, y, c, opts, None);
    if !sol.converged {
        log::warn!("SMO hit its iteration cap with KKT gap {:.3e}", sol.kkt_gap);
    }
    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x.row(i).to_vec());
            coefficients.push(a * y[i]);
        }
    }
    Ok(SvmModel {
        format: MODEL_FORMAT.to_string(),
        slack: c,
        kernel_width: z,
        standardizer,
        support_vectors,
        coefficients,
        bias: -sol.rho,
        solver: SolverStats {
            iterations: sol.iterations,
            objective: sol.objective,
            kkt_gap: sol.kkt_gap,
            converged: sol.converged,
        },
        feature_names: Vec::new(),
    })
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    /// Decision value for a raw (unscaled) row.
    pub fn decision(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.dim() {
            return Err(Error::Alignment {
                left: self.dim(),
                right: row.len(),
            });
        }
        let mut scaled = Vec::with_capacity(row.len());
        self.standardizer.transform_row(row, &mut scaled);
        let s: f64 = self
            .support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, c)| c * rbf_from_distance(squared_distance(sv, &scaled), self.kernel_width))
            .sum();
        Ok(s + self.bias)
    }

    /// Decision value 0 is assigned to the positive (PD) class.
    pub fn predict(&self, x: &Samples) -> Result<Vec<Prediction>> {
        x.rows()
            .map(|row| {
                let decision = self.decision(row)?;
                Ok(Prediction {
                    label: if decision >= 0.0 { 1.0 } else { -1.0 },
                    decision,
                })
            })
            .collect()
    }

    pub fn predict_labels(&self, x: &Samples) -> Result<Vec<f64>> {
        Ok(self.predict(x)?.into_iter().map(|p| p.label).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: SvmModel = serde_json::from_str(text)?;
        if model.format != MODEL_FORMAT {
            return Err(Error::Format(format!("unsupported model format {:?}", model.format)));
        }
        let d = model.dim();
        if model.support_vectors.len() != model.coefficients.len()
            || model.support_vectors.iter().any(|sv| sv.len() != d)
            || model.standardizer.scale.len() != d
        {
            return Err(Error::Format("inconsistent model dimensions".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Samples, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..16)
            .map(|i| {
                let t = i as f64 * 0.4;
                vec![t.sin() * 3.0 + 10.0, t.cos() * 0.01]
            })
            .collect();
        let y = (0..16).map(|i| if (i / 2) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        (Samples::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let (x, y) = toy();
        let model = fit(&x, &y, 10.0, 1.0, &SmoOptions::default()).unwrap();
        let back = SvmModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
        let a = model.predict(&x).unwrap();
        let b = back.predict(&x).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.label, q.label);
            assert!((p.decision - q.decision).abs() <= 1e-12);
        }
    }

    #[test]
    fn rejects_unknown_format_and_bad_input() {
        let (x, y) = toy();
        let mut model = fit(&x, &y, 1.0, 1.0, &SmoOptions::default()).unwrap();
        model.format = "other/9".into();
        assert!(matches!(SvmModel::from_json(&model.to_json().unwrap()), Err(Error::Format(_))));
        assert!(fit(&x, &vec![1.0; 16], 1.0, 1.0, &SmoOptions::default()).is_err());
        assert!(model.decision(&[1.0]).is_err());
    }

    #[test]
    fn dual_feasibility_after_training() {
        let (x, y) = toy();
        let c = 3.0;
        let m = fit(&x, &y, c, 0.5, &SmoOptions::default()).unwrap();
        let balance: f64 = m.coefficients.iter().sum();
        assert!(balance.abs() < 1e-9);
        assert!(m.coefficients.iter().all(|a| a.abs() <= c + 1e-12));
        assert!(m.solver.kkt_gap <= 1e-3);
    }

    #[test]
    fn xor_is_fitted_exactly() {
        let x = Samples::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let y = [-1.0, -1.0, 1.0, 1.0];
        let m = train_smo(&x, &y, 100.0, 1.0, &SmoOptions::default()).unwrap();
        assert_eq!(m.predict_labels(&x).unwrap(), y);
    }

    #[test]
    fn free_vectors_sit_on_the_margin() {
        let (x, y) = toy();
        let c = 50.0;
        let m = fit(&x, &y, c, 1.0, &SmoOptions::default()).unwrap();
        let mut free = 0;
        for (sv, a) in m.support_vectors.iter().zip(&m.coefficients) {
            if a.abs() < c - 1e-9 {
                free += 1;
                let label = a.signum();
                let raw: Vec<f64> = sv.iter().zip(&m.standardizer.mean).zip(&m.standardizer.scale)
                    .map(|((v, mu), s)| if *s == 0.0 { *mu } else { v * s + mu })
                    .collect();
                assert!((m.decision(&raw).unwrap() - label).abs() <= 1e-2);
            }
        }
        assert!(free > 0);
    }
}
