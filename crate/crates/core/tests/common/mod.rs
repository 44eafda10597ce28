//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

/// Two-sided rank-sum p value by enumerating every way to draw `n1` of the
/// ranks `1..=n` (tie-free data): `min(1, 2 · min(P(W ≤ w), P(W ≥ w)))`.
pub fn enumerated_rank_sum_p(n: usize, n1: usize, observed: u32) -> f64 {
    let mut hist: BTreeMap<u32, u64> = BTreeMap::new();
    let mut total = 0u64;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let w: u32 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| i as u32 + 1).sum();
        *hist.entry(w).or_insert(0) += 1;
        total += 1;
    }
    let le: u64 = hist.range(..=observed).map(|(_, c)| c).sum();
    let ge: u64 = hist.range(observed..).map(|(_, c)| c).sum();
    let p = 2.0 * (le.min(ge) as f64) / total as f64;
    p.min(1.0)
}

pub fn dual_objective(q: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * q[i * n + j] * alpha[j];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// Euclidean projection onto `{0 ≤ a ≤ c, y·a = 0}` via the breakpoints of
/// the piecewise-linear multiplier equation.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let g = |lam: f64| -> f64 { v.iter().zip(y).map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c) * yi).sum() };
    let mut bps: Vec<f64> = Vec::with_capacity(2 * v.len());
    for (vi, yi) in v.iter().zip(y) {
        bps.push(vi / yi);
        bps.push((vi - c) / yi);
    }
    // g is non-increasing in lambda
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for &b in &bps {
        if g(b) > 0.0 {
            lo = lo.max(b);
        } else {
            hi = hi.min(b);
        }
    }
    let lam = if lo == f64::NEG_INFINITY {
        hi
    } else if hi == f64::INFINITY {
        lo
    } else {
        let (glo, ghi) = (g(lo), g(hi));
        if glo == ghi { lo } else { lo + (hi - lo) * glo / (glo - ghi) }
    };
    v.iter().zip(y).map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c)).collect()
}

/// Accelerated projected gradient (FISTA with adaptive restart) on the SVM
/// dual `min 1/2 a'Qa - sum a`. Every few thousand steps the face picked out
/// by the iterate is solved exactly; the first face solution that is
/// feasible and KKT-certified (gap below `1e-10`) is returned. Otherwise the
/// last iterate is. Returns the multipliers and objective.
pub fn projected_gradient_qp(q: &[f64], y: &[f64], c: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    let lip = (0..n)
        .map(|i| (0..n).map(|j| q[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-12);
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| q[i * n + j] * a[j]).sum::<f64>() - 1.0)
            .collect()
    };
    let mut x = vec![0.0; n];
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut f_prev = dual_objective(q, &x);
    for it in 1..=2_000_000 {
        let g = grad(&z);
        let step: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - gi / lip).collect();
        let x_new = project(&step, y, c);
        let f_new = dual_objective(q, &x_new);
        if f_new > f_prev {
            // restart momentum
            t = 1.0;
            z = x.clone();
        } else {
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            z = x_new
                .iter()
                .zip(&x)
                .map(|(a, b)| a + (t - 1.0) / t_new * (a - b))
                .collect();
            x = x_new;
            t = t_new;
            f_prev = f_new;
        }
        if it % 2000 == 0 {
            if let Some(exact) = face_solve(q, y, c, &x) {
                if kkt_gap(q, y, c, &exact) <= 1e-10 {
                    let f = dual_objective(q, &exact);
                    return (exact, f);
                }
            }
        }
    }
    let f = dual_objective(q, &x);
    (x, f)
}

/// Stationary point of the objective restricted to the face of the box that
/// contains `x` (coordinates within `1e-9 C` of a bound are pinned there).
fn face_solve(q: &[f64], y: &[f64], c: f64, x: &[f64]) -> Option<Vec<f64>> {
    let n = y.len();
    let eps = 1e-9 * c;
    let pinned: Vec<Option<f64>> = x
        .iter()
        .map(|&v| if v <= eps { Some(0.0) } else if v >= c - eps { Some(c) } else { None })
        .collect();
    let free: Vec<usize> = (0..n).filter(|&i| pinned[i].is_none()).collect();
    let mut out: Vec<f64> = pinned.iter().map(|p| p.unwrap_or(0.0)).collect();
    let f = free.len();
    if f == 0 {
        let balance: f64 = out.iter().zip(y).map(|(a, b)| a * b).sum();
        return (balance.abs() <= 1e-12 * c.max(1.0)).then_some(out);
    }
    // unknowns: free multipliers, then the equality multiplier
    let m = f + 1;
    let mut mat = vec![vec![0.0; m + 1]; m];
    for (r, &i) in free.iter().enumerate() {
        for (k, &j) in free.iter().enumerate() {
            mat[r][k] = q[i * n + j];
        }
        mat[r][f] = y[i];
        mat[r][m] = 1.0 - (0..n).filter(|j| pinned[*j].is_some()).map(|j| q[i * n + j] * out[j]).sum::<f64>();
        mat[f][r] = y[i];
    }
    mat[f][m] = -(0..n).filter(|j| pinned[*j].is_some()).map(|j| y[j] * out[j]).sum::<f64>();
    for col in 0..m {
        let piv = (col..m).max_by(|&a, &b| mat[a][col].abs().total_cmp(&mat[b][col].abs()))?;
        if mat[piv][col].abs() < 1e-13 {
            return None;
        }
        mat.swap(col, piv);
        for r in 0..m {
            if r != col {
                let factor = mat[r][col] / mat[col][col];
                for k in col..=m {
                    mat[r][k] -= factor * mat[col][k];
                }
            }
        }
    }
    for (r, &i) in free.iter().enumerate() {
        let v = mat[r][m] / mat[r][r];
        if !(0.0..=c).contains(&v) {
            return None;
        }
        out[i] = v;
    }
    Some(out)
}

/// Maximal KKT violation `max_{I_up} -yG - min_{I_low} -yG`.
pub fn kkt_gap(q: &[f64], y: &[f64], c: f64, alpha: &[f64]) -> f64 {
    let n = y.len();
    let g: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| q[i * n + j] * alpha[j]).sum::<f64>() - 1.0)
        .collect();
    let tol = 1e-12 * c.max(1.0);
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for t in 0..n {
        let v = -y[t] * g[t];
        let (lower, upper) = (alpha[t] <= tol, alpha[t] >= c - tol);
        let in_up = if y[t] > 0.0 { !upper } else { !lower };
        let in_low = if y[t] > 0.0 { !lower } else { !upper };
        if in_up {
            up = up.max(v);
        }
        if in_low {
            low = low.min(v);
        }
    }
    (up - low).max(0.0)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Gram matrix `exp(-|u-v|^2 / (2 z^2))` computed directly, and the label
/// weighted `Q_ij = y_i y_j K_ij`.
pub fn rbf_q(points: &[Vec<f64>], y: &[f64], z: f64) -> (Vec<f64>, Vec<f64>) {
    let n = points.len();
    let mut k = vec![0.0; n * n];
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum();
            k[i * n + j] = (-d2 / (2.0 * z * z)).exp();
            q[i * n + j] = y[i] * y[j] * k[i * n + j];
        }
    }
    (k, q)
}
