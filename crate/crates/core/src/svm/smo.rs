//! Sequential minimal optimization for the soft-margin SVM dual
//!
//! ```text
//! min  1/2 a'Qa - e'a   s.t.  0 <= a_i <= C,  y'a = 0,   Q_ij = y_i y_j K_ij
//! ```
//!
//! on a precomputed Gram matrix. Working pairs use second-order selection
//! (maximal violating `i`, then the `j` with the largest guaranteed objective
//! decrease). The solver stops when the maximal KKT violation
//! `max_{I_up} -y G - min_{I_low} -y G` drops below the tolerance. Bounded
//! multipliers that are unlikely to move are periodically shrunk out of the
//! active set; the full gradient is rebuilt before stopping.

/// Curvature floor for non-positive-definite pairs.
const TAU: f64 = 1e-12;
/// Largest free set refined by the final linear solve.
const POLISH_MAX_FREE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoOptions {
    /// Stopping bound on the maximal pair violation, scaled by `min(1, C)`
    /// because gradient differences shrink with the box.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SmoOptions {
    fn default() -> Self {
        SmoOptions {
            tolerance: 1e-3,
            max_iterations: 0,
        }
    }
}

impl SmoOptions {
    fn iteration_cap(&self, n: usize) -> usize {
        if self.max_iterations > 0 {
            self.max_iterations
        } else {
            (1000 * n).max(100_000)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    /// Multipliers in `[0, C]` (unsigned).
    pub alpha: Vec<f64>,
    /// Decision offset: `f(x) = sum alpha_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub objective: f64,
    pub iterations: usize,
    /// Maximal KKT violation at exit.
    pub kkt_gap: f64,
    pub converged: bool,
}

/// Dual objective `1/2 a'Qa - sum a` for a given `alpha`.
pub fn dual_objective(gram: &[f64], y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        let row = &gram[i * n..(i + 1) * n];
        let mut s = 0.0;
        for j in 0..n {
            s += alpha[j] * y[j] * row[j];
        }
        quad += alpha[i] * y[i] * s;
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

struct State<'a> {
    q: Vec<f64>,
    diag: Vec<f64>,
    y: &'a [f64],
    c: f64,
    n: usize,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    /// `sum_{alpha_j = C} C Q_ij`, used to rebuild shrunk gradients.
    grad_bar: Vec<f64>,
    active: Vec<usize>,
}

impl State<'_> {
    fn row(&self, i: usize) -> &[f64] {
        &self.q[i * self.n..(i + 1) * self.n]
    }

    fn at_upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.c
    }

    fn at_lower(&self, t: usize) -> bool {
        self.alpha[t] <= 0.0
    }

    fn in_up(&self, t: usize) -> bool {
        if self.y[t] > 0.0 { !self.at_upper(t) } else { !self.at_lower(t) }
    }

    fn in_low(&self, t: usize) -> bool {
        if self.y[t] > 0.0 { !self.at_lower(t) } else { !self.at_upper(t) }
    }

    /// Working pair over the active set plus the current violation
    /// `max_{I_up} -yG + max_{I_low} yG`.
    fn select(&self) -> (Option<(usize, usize)>, f64) {
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = None;
        for &t in &self.active {
            if self.in_up(t) {
                let v = -self.y[t] * self.grad[t];
                if v >= g_max {
                    g_max = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut g_max2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_drop = f64::INFINITY;
        if let Some(i) = i_sel {
            let row_i = self.row(i);
            for &t in &self.active {
                if !self.in_low(t) {
                    continue;
                }
                let v = self.y[t] * self.grad[t];
                if v >= g_max2 {
                    g_max2 = v;
                }
                let b = g_max + v;
                if b > 0.0 {
                    let a = self.diag[i] + self.diag[t] - 2.0 * self.y[i] * self.y[t] * row_i[t];
                    let drop = -(b * b) / if a > 0.0 { a } else { TAU };
                    if drop <= best_drop {
                        best_drop = drop;
                        j_sel = Some(t);
                    }
                }
            }
        }
        (i_sel.zip(j_sel), g_max + g_max2)
    }

    fn reconstruct_gradient(&mut self) {
        if self.active.len() == self.n {
            return;
        }
        let mut is_active = vec![false; self.n];
        for &t in &self.active {
            is_active[t] = true;
        }
        let free: Vec<usize> = (0..self.n).filter(|&t| !self.at_upper(t) && !self.at_lower(t)).collect();
        for k in (0..self.n).filter(|&k| !is_active[k]) {
            let mut g = self.grad_bar[k] - 1.0;
            for &i in &free {
                g += self.alpha[i] * self.q[i * self.n + k];
            }
            self.grad[k] = g;
        }
        self.active = (0..self.n).collect();
    }

    fn shrinkable(&self, t: usize, g_max1: f64, g_max2: f64) -> bool {
        let g = self.grad[t];
        if self.at_upper(t) {
            if self.y[t] > 0.0 { -g > g_max1 } else { -g > g_max2 }
        } else if self.at_lower(t) {
            if self.y[t] > 0.0 { g > g_max2 } else { g > g_max1 }
        } else {
            false
        }
    }

    fn shrink(&mut self, tolerance: f64, unshrunk: &mut bool) {
        let (mut g_max1, mut g_max2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &t in &self.active {
            let yg = self.y[t] * self.grad[t];
            if self.in_up(t) {
                g_max1 = g_max1.max(-yg);
            }
            if self.in_low(t) {
                g_max2 = g_max2.max(yg);
            }
        }
        if !*unshrunk && g_max1 + g_max2 <= tolerance * 10.0 {
            *unshrunk = true;
            self.reconstruct_gradient();
        }
        let keep: Vec<usize> = self
            .active
            .iter()
            .copied()
            .filter(|&t| !self.shrinkable(t, g_max1, g_max2))
            .collect();
        self.active = keep;
    }

    fn update_pair(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (was_upper_i, was_upper_j) = (self.at_upper(i), self.at_upper(j));
        let qij = self.q[i * self.n + j];
        let (gi, gj) = (self.grad[i], self.grad[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if self.y[i] != self.y[j] {
            let quad = (self.diag[i] + self.diag[j] + 2.0 * qij).max(TAU);
            let delta = (-gi - gj) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (self.diag[i] + self.diag[j] - 2.0 * qij).max(TAU);
            let delta = (gi - gj) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        let n = self.n;
        let (row_i, row_j) = (&self.q[i * n..(i + 1) * n], &self.q[j * n..(j + 1) * n]);
        for &t in &self.active {
            self.grad[t] += row_i[t] * di + row_j[t] * dj;
        }
        for (k, was_upper) in [(i, was_upper_i), (j, was_upper_j)] {
            let now_upper = self.alpha[k] >= c;
            if now_upper != was_upper {
                let sign = if now_upper { c } else { -c };
                let row = &self.q[k * n..(k + 1) * n];
                for (g, q) in self.grad_bar.iter_mut().zip(row) {
                    *g += sign * q;
                }
            }
        }
    }
}

/// Maximal pair violation over all indices.
fn violation(y: &[f64], c: f64, alpha: &[f64], grad: &[f64]) -> f64 {
    let (mut up, mut low) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        let (lower, upper) = (alpha[t] <= 0.0, alpha[t] >= c);
        if (y[t] > 0.0 && !upper) || (y[t] < 0.0 && !lower) {
            up = up.max(-yg);
        }
        if (y[t] > 0.0 && !lower) || (y[t] < 0.0 && !upper) {
            low = low.max(yg);
        }
    }
    (up + low).max(0.0)
}

/// Refines a converged point by solving the equality-constrained problem on
/// the free multipliers with the bounded ones held fixed. When that solution
/// leaves the box, steps toward it up to the first bound, pins the blocking
/// coordinate and solves again. Returns the refined point only when it
/// improves both objective and violation.
fn polish(q: &[f64], y: &[f64], c: f64, alpha: &[f64], grad: &[f64], gap: f64) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let n = y.len();
    let mut cur = alpha.to_vec();
    loop {
        let free: Vec<usize> = (0..n).filter(|&t| cur[t] > 0.0 && cur[t] < c).collect();
        if free.is_empty() || free.len() > POLISH_MAX_FREE {
            return None;
        }
        let target = face_solution(q, y, &cur, &free)?;
        let mut step = 1.0;
        let mut blocking = None;
        for (&i, &v) in free.iter().zip(&target) {
            let limit = if v < 0.0 {
                cur[i] / (cur[i] - v)
            } else if v > c {
                (c - cur[i]) / (v - cur[i])
            } else {
                continue;
            };
            if limit < step {
                step = limit;
                blocking = Some((i, if v < 0.0 { 0.0 } else { c }));
            }
        }
        for (&i, &v) in free.iter().zip(&target) {
            cur[i] += step * (v - cur[i]);
        }
        match blocking {
            Some((i, bound)) => cur[i] = bound,
            None => break,
        }
    }
    let g: Vec<f64> = (0..n)
        .map(|t| q[t * n..(t + 1) * n].iter().zip(&cur).map(|(qv, a)| qv * a).sum::<f64>() - 1.0)
        .collect();
    let obj = |a: &[f64], g: &[f64]| 0.5 * a.iter().zip(g).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
    let v = violation(y, c, &cur, &g);
    (obj(&cur, &g) <= obj(alpha, grad) && v <= gap).then_some((cur, g, v))
}

/// Minimizer over the affine set where only `free` may move and the
/// equality constraint holds.
fn face_solution(q: &[f64], y: &[f64], alpha: &[f64], free: &[usize]) -> Option<Vec<f64>> {
    let n = y.len();
    let f = free.len();
    let mut is_free = vec![false; n];
    for &i in free {
        is_free[i] = true;
    }
    let bounded: Vec<usize> = (0..n).filter(|&t| !is_free[t]).collect();
    let m = f + 1;
    let w = m + 1;
    let mut a = vec![0.0; m * w];
    for (r, &i) in free.iter().enumerate() {
        for (k, &j) in free.iter().enumerate() {
            a[r * w + k] = q[i * n + j];
        }
        a[r * w + f] = y[i];
        let fixed: f64 = bounded.iter().map(|&j| q[i * n + j] * alpha[j]).sum();
        a[r * w + m] = 1.0 - fixed;
        a[f * w + r] = y[i];
    }
    a[f * w + m] = -bounded.iter().map(|&j| y[j] * alpha[j]).sum::<f64>();
    let mut x = gauss_solve(&mut a, m)?;
    x.truncate(f);
    Some(x)
}

/// Gaussian elimination with partial pivoting on an augmented `m × (m+1)`
/// row-major system.
fn gauss_solve(a: &mut [f64], m: usize) -> Option<Vec<f64>> {
    let w = m + 1;
    let scale = (0..m)
        .flat_map(|r| a[r * w..r * w + m].iter())
        .fold(0.0f64, |s, v| s.max(v.abs()))
        .max(1.0);
    for col in 0..m {
        let piv = (col..m).max_by(|&r, &s| a[r * w + col].abs().total_cmp(&a[s * w + col].abs()))?;
        if a[piv * w + col].abs() <= 1e-12 * scale {
            return None;
        }
        if piv != col {
            for k in 0..w {
                a.swap(col * w + k, piv * w + k);
            }
        }
        for r in col + 1..m {
            let factor = a[r * w + col] / a[col * w + col];
            if factor != 0.0 {
                for k in col..w {
                    a[r * w + k] -= factor * a[col * w + k];
                }
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|k| a[r * w + k] * x[k]).sum();
        x[r] = (a[r * w + m] - s) / a[r * w + r];
    }
    Some(x)
}

/// Solves the dual on an `n × n` Gram matrix. `warm` must be feasible for
/// `c` (e.g. the solution for a smaller C).
pub fn solve_dual(gram: &[f64], y: &[f64], c: f64, opts: &SmoOptions, warm: Option<&[f64]>) -> DualSolution {
    let n = y.len();
    debug_assert_eq!(gram.len(), n * n);
    let mut q = Vec::with_capacity(n * n);
    for i in 0..n {
        q.extend((0..n).map(|j| y[i] * y[j] * gram[i * n + j]));
    }
    let diag = (0..n).map(|i| q[i * n + i]).collect();
    let alpha = warm.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut grad = vec![-1.0; n];
    let mut grad_bar = vec![0.0; n];
    for j in 0..n {
        if alpha[j] != 0.0 {
            let row = &q[j * n..(j + 1) * n];
            for k in 0..n {
                grad[k] += alpha[j] * row[k];
            }
            if alpha[j] >= c {
                for k in 0..n {
                    grad_bar[k] += c * row[k];
                }
            }
        }
    }
    let mut st = State {
        q,
        diag,
        y,
        c,
        n,
        alpha,
        grad,
        grad_bar,
        active: (0..n).collect(),
    };

    let tol = opts.tolerance * c.min(1.0);
    let cap = opts.iteration_cap(n);
    let shrink_every = n.clamp(1, 1000);
    let mut countdown = shrink_every;
    let mut unshrunk = false;
    let mut iterations = 0;
    let mut gap;
    let mut converged = false;
    loop {
        countdown -= 1;
        if countdown == 0 {
            countdown = shrink_every;
            st.shrink(tol, &mut unshrunk);
        }
        let (mut pair, mut g) = st.select();
        if pair.is_none() || g < tol {
            // confirm on the full set before stopping
            st.reconstruct_gradient();
            (pair, g) = st.select();
            countdown = 1;
        }
        gap = g;
        let Some((i, j)) = pair.filter(|_| g >= tol) else {
            converged = true;
            break;
        };
        if iterations >= cap {
            break;
        }
        iterations += 1;
        st.update_pair(i, j);
    }
    st.reconstruct_gradient();
    let State { q, mut alpha, mut grad, .. } = st;
    if converged {
        if let Some((a, g, v)) = polish(&q, y, c, &alpha, &grad, gap) {
            alpha = a;
            grad = g;
            gap = v;
        }
    }

    // Offset from free vectors, else the midpoint of the feasible interval.
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut free_sum, mut free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                hi = hi.min(yg);
            } else {
                lo = lo.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                hi = hi.min(yg);
            } else {
                lo = lo.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { 0.5 * (lo + hi) };
    let objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
    DualSolution {
        alpha,
        rho,
        objective,
        iterations,
        kkt_gap: if gap.is_finite() { gap.max(0.0) } else { 0.0 },
        converged,
    }
}
