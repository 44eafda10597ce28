use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::svm::kernel::{distance_matrix, kernel_from_distances, Samples};
use crate::svm::smo::{solve_dual, SmoOptions};
use crate::svm::standardize::Standardizer;

pub const C_GRID: [f64; 13] = [
    0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0,
];
pub const Z_GRID: [f64; 11] = [0.03, 0.06, 0.12, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub c_values: Vec<f64>,
    pub z_values: Vec<f64>,
    pub folds: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            c_values: C_GRID.to_vec(),
            z_values: Z_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
        }
    }
}

impl GridSpec {
    pub fn cells(&self) -> usize {
        self.c_values.len() * self.z_values.len()
    }

    fn validate(&self) -> Result<()> {
        if self.c_values.is_empty() || self.z_values.is_empty() {
            return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
        }
        if self.c_values.iter().chain(&self.z_values).any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument("grid values must be > 0".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 folds, got {}", self.folds)));
        }
        Ok(())
    }
}

/// Fold index per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut held = Vec::new();
        for (i, &f) in self.fold_of.iter().enumerate() {
            if f == fold { held.push(i) } else { train.push(i) }
        }
        (train, held)
    }
}

/// Stratified k-fold assignment. `k` is lowered to the minority class size
/// when needed.
pub fn stratified_kfold(labels: &[f64], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] > 0.0).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] <= 0.0).collect();
    let minority = pos.len().min(neg.len());
    if minority < 2 {
        return Err(Error::SingleClass(format!(
            "cross-validation needs two samples per class, got {} PD and {} HC",
            pos.len(),
            neg.len()
        )));
    }
    let k = if minority < k {
        log::warn!("lowering folds from {k} to {minority} (minority class size)");
        minority
    } else {
        k
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; labels.len()];
    let mut slot = 0;
    for mut class in [pos, neg] {
        class.shuffle(&mut rng);
        for i in class {
            fold_of[i] = slot % k;
            slot += 1;
        }
    }
    Ok(FoldAssignment { k, fold_of })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub c: f64,
    pub z: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: GridCell,
    pub cells: Vec<GridCell>,
    pub folds: usize,
    pub cells_evaluated: usize,
    pub fits: usize,
}

/// Fold-averaged validation accuracy over the whole grid. Each fold is
/// standardized on its own training part. Ties go to the smaller C, then
/// the smaller z.
pub fn grid_search(x: &Samples, y: &[f64], grid: &GridSpec, seed: u64, opts: &SmoOptions) -> Result<GridResult> {
    grid.validate()?;
    if x.len() != y.len() {
        return Err(Error::Alignment {
            left: x.len(),
            right: y.len(),
        });
    }
    let folds = stratified_kfold(y, grid.folds, seed)?;
    let mut c_order: Vec<usize> = (0..grid.c_values.len()).collect();
    c_order.sort_by(|&a, &b| grid.c_values[a].total_cmp(&grid.c_values[b]));
    let nz = grid.z_values.len();

    let per_fold: Vec<Result<Vec<f64>>> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let (tr, va) = folds.split(f);
            let scaler = Standardizer::fit(&x.select(&tr))?;
            let xtr = scaler.transform(&x.select(&tr))?;
            let xva = scaler.transform(&x.select(&va))?;
            let ytr: Vec<f64> = tr.iter().map(|&i| y[i]).collect();
            let yva: Vec<f64> = va.iter().map(|&i| y[i]).collect();
            let d_tr = distance_matrix(&xtr, &xtr);
            let d_va = distance_matrix(&xva, &xtr);
            let mut acc = vec![0.0; grid.c_values.len() * nz];
            for (zi, &z) in grid.z_values.iter().enumerate() {
                let k_tr = kernel_from_distances(&d_tr, z);
                let k_va = kernel_from_distances(&d_va, z);
                let mut warm: Option<Vec<f64>> = None;
                for &ci in &c_order {
                    let sol = solve_dual(&k_tr, &ytr, grid.c_values[ci], opts, warm.as_deref());
                    let coef: Vec<f64> = sol.alpha.iter().zip(&ytr).map(|(a, y)| a * y).collect();
                    let correct = yva
                        .iter()
                        .enumerate()
                        .filter(|&(r, &t)| {
                            let row = &k_va[r * ytr.len()..(r + 1) * ytr.len()];
                            let f: f64 = coef.iter().zip(row).map(|(c, k)| c * k).sum::<f64>() - sol.rho;
                            (f >= 0.0) == (t > 0.0)
                        })
                        .count();
                    acc[ci * nz + zi] = correct as f64 / yva.len() as f64;
                    warm = Some(sol.alpha);
                }
            }
            Ok(acc)
        })
        .collect();

    let mut total = vec![0.0; grid.c_values.len() * nz];
    for fold in per_fold {
        for (t, a) in total.iter_mut().zip(fold?) {
            *t += a;
        }
    }
    let mut cells = Vec::with_capacity(total.len());
    for (ci, &c) in grid.c_values.iter().enumerate() {
        for (zi, &z) in grid.z_values.iter().enumerate() {
            cells.push(GridCell {
                c,
                z,
                accuracy: total[ci * nz + zi] / folds.k as f64,
            });
        }
    }
    let mut best = cells[0];
    for cell in &cells[1..] {
        let better = cell.accuracy > best.accuracy
            || (cell.accuracy == best.accuracy && (cell.c, cell.z) < (best.c, best.z));
        if better {
            best = *cell;
        }
    }
    Ok(GridResult {
        best,
        cells_evaluated: cells.len(),
        fits: cells.len() * folds.k,
        folds: folds.k,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_stratified_and_balanced() {
        let labels: Vec<f64> = (0..37).map(|_| 1.0).chain((0..38).map(|_| -1.0)).collect();
        let a = stratified_kfold(&labels, 10, 3).unwrap();
        assert_eq!(a.k, 10);
        for f in 0..10 {
            let (_, held) = a.split(f);
            let pos = held.iter().filter(|&&i| labels[i] > 0.0).count();
            let neg = held.len() - pos;
            assert!((3..=4).contains(&pos) && (3..=4).contains(&neg));
            assert!((7..=8).contains(&held.len()));
        }
        assert_eq!(a, stratified_kfold(&labels, 10, 3).unwrap());
    }

    #[test]
    fn folds_lowered_for_small_classes() {
        let labels = [1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0];
        assert_eq!(stratified_kfold(&labels, 10, 0).unwrap().k, 3);
        assert!(stratified_kfold(&[1.0, -1.0, -1.0], 10, 0).is_err());
    }

    #[test]
    fn grid_counts_and_separable_data() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![if i < 10 { -2.0 } else { 2.0 } + 0.01 * i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i < 10 { -1.0 } else { 1.0 }).collect();
        let x = Samples::from_rows(&rows).unwrap();
        let r = grid_search(&x, &y, &GridSpec::default(), 1, &SmoOptions::default()).unwrap();
        assert_eq!(r.cells_evaluated, 143);
        assert_eq!(r.folds, 10);
        assert_eq!(r.fits, 1430);
        assert_eq!(r.best.accuracy, 1.0);
        // every cell separates perfectly, so the tie rule picks the corner
        assert_eq!((r.best.c, r.best.z), (C_GRID[0], Z_GRID[0]));
    }

    #[test]
    fn unequal_classes_spread_evenly() {
        let labels: Vec<f64> = (0..11).map(|_| 1.0).chain((0..23).map(|_| -1.0)).collect();
        let a = stratified_kfold(&labels, 10, 8).unwrap();
        let mut seen = vec![0; labels.len()];
        for f in 0..10 {
            let (train, held) = a.split(f);
            assert_eq!(train.len() + held.len(), 34);
            let pos = held.iter().filter(|&&i| labels[i] > 0.0).count();
            assert!((1..=2).contains(&pos), "fold {f}: {pos} positives");
            assert!((2..=3).contains(&(held.len() - pos)));
            for i in held {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
    }
}
