//! Empirical mode decomposition.
//!
//! A signal is sifted into intrinsic mode functions (IMF 1 carries the
//! highest frequencies) plus a residual trend. Envelopes are natural cubic
//! splines through the local extrema, with the two extrema nearest each end
//! mirrored across that end. Sifting stops on the Cauchy criterion
//! `sum (h_prev - h)^2 / sum h_prev^2 < 0.2` or after 10 iterations; the
//! decomposition stops at 10 IMFs or once the residual has fewer than two
//! maxima or two minima. Samples are treated as equally spaced.

use crate::error::{Error, Result};

pub const SIFT_THRESHOLD: f64 = 0.2;
pub const MAX_SIFT_ITERATIONS: usize = 10;
pub const MAX_IMFS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ImfSet {
    pub imfs: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
    pub source_len: usize,
}

impl ImfSet {
    /// IMF by 1-based index.
    pub fn imf(&self, k: usize) -> Option<&[f64]> {
        k.checked_sub(1).and_then(|i| self.imfs.get(i)).map(Vec::as_slice)
    }

    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residual.clone();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(imf) {
                *o += v;
            }
        }
        out
    }
}

/// Interior local maxima and minima. A plateau contributes its midpoint;
/// runs touching either end are never extrema.
pub fn find_extrema(s: &[f64]) -> Result<(Vec<usize>, Vec<usize>)> {
    if s.len() < 3 {
        return Err(Error::Degenerate(format!("extrema need 3 samples, got {}", s.len())));
    }
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    let mut start = 0;
    while start < s.len() {
        let mut end = start;
        while end + 1 < s.len() && s[end + 1] == s[start] {
            end += 1;
        }
        if start > 0 && end + 1 < s.len() {
            let (left, v, right) = (s[start - 1], s[start], s[end + 1]);
            let mid = (start + end) / 2;
            if v > left && v > right {
                maxima.push(mid);
            } else if v < left && v < right {
                minima.push(mid);
            }
        }
        start = end + 1;
    }
    Ok((maxima, minima))
}

/// Natural cubic spline through `(xs, ys)` (`xs` strictly increasing),
/// evaluated at the sorted positions `at`.
pub fn natural_spline(xs: &[f64], ys: &[f64], at: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let n = xs.len();
    debug_assert!(n >= 2 && ys.len() == n);
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();

    // Second derivatives; natural ends pin m[0] = m[n-1] = 0. Thomas algorithm
    // on the interior system.
    let mut m = vec![0.0; n];
    if n > 2 {
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
        }
        for i in 1..k {
            let w = h[i] / diag[i - 1];
            diag[i] -= w * h[i];
            rhs[i] -= w * rhs[i - 1];
        }
        m[k] = rhs[k - 1] / diag[k - 1];
        for i in (0..k - 1).rev() {
            m[i + 1] = (rhs[i] - h[i + 1] * m[i + 2]) / diag[i];
        }
    }

    let mut seg = 0;
    at.into_iter()
        .map(|x| {
            while seg + 2 < n && x > xs[seg + 1] {
                seg += 1;
            }
            let (x0, x1, hh) = (xs[seg], xs[seg + 1], h[seg]);
            let (a, b) = ((x1 - x) / hh, (x - x0) / hh);
            a * ys[seg]
                + b * ys[seg + 1]
                + ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * hh * hh / 6.0
        })
        .collect()
}

/// Spline envelope through `s[extrema]`, evaluated at every sample index.
pub fn envelope(s: &[f64], extrema: &[usize]) -> Result<Vec<f64>> {
    if extrema.len() < 2 {
        return Err(Error::Degenerate("envelope needs at least 2 extrema".into()));
    }
    let last = (s.len() - 1) as f64;
    let (p1, p2) = (extrema[0], extrema[1]);
    let (q1, q2) = (extrema[extrema.len() - 2], extrema[extrema.len() - 1]);

    let mut xs = Vec::with_capacity(extrema.len() + 4);
    let mut ys = Vec::with_capacity(extrema.len() + 4);
    for p in [p2, p1] {
        xs.push(-(p as f64));
        ys.push(s[p]);
    }
    for &p in extrema {
        xs.push(p as f64);
        ys.push(s[p]);
    }
    for q in [q2, q1] {
        xs.push(2.0 * last - q as f64);
        ys.push(s[q]);
    }
    Ok(natural_spline(&xs, &ys, (0..s.len()).map(|i| i as f64)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiftStop {
    Converged,
    IterationLimit,
    /// Extrema ran out part-way through sifting.
    EnvelopeUndefined,
}

/// Extracts one IMF. Fails when `s` has too few extrema to sift at all,
/// i.e. when `s` is already a residual.
pub fn sift(s: &[f64]) -> Result<(Vec<f64>, SiftStop)> {
    if s.len() < 4 {
        return Err(Error::Degenerate(format!("sifting needs 4 samples, got {}", s.len())));
    }
    let mut h = s.to_vec();
    for iteration in 0..MAX_SIFT_ITERATIONS {
        let (maxima, minima) = find_extrema(&h)?;
        if maxima.len() < 2 || minima.len() < 2 {
            if iteration == 0 {
                return Err(Error::Degenerate("signal is already a residual".into()));
            }
            return Ok((h, SiftStop::EnvelopeUndefined));
        }
        let upper = envelope(&h, &maxima)?;
        let lower = envelope(&h, &minima)?;
        let mut change = 0.0;
        let mut norm = 0.0;
        for ((v, u), l) in h.iter_mut().zip(&upper).zip(&lower) {
            let mean = 0.5 * (u + l);
            change += mean * mean;
            norm += *v * *v;
            *v -= mean;
        }
        if norm == 0.0 || change / norm < SIFT_THRESHOLD {
            return Ok((h, SiftStop::Converged));
        }
    }
    Ok((h, SiftStop::IterationLimit))
}

fn is_residual(s: &[f64]) -> bool {
    match find_extrema(s) {
        Ok((maxima, minima)) => maxima.len() < 2 || minima.len() < 2,
        Err(_) => true,
    }
}

pub fn decompose(s: &[f64], max_imfs: usize) -> Result<ImfSet> {
    if s.len() < 4 {
        return Err(Error::Degenerate(format!("decomposition needs 4 samples, got {}", s.len())));
    }
    if max_imfs == 0 {
        return Err(Error::InvalidArgument("max_imfs must be >= 1".into()));
    }
    let mut imfs: Vec<Vec<f64>> = Vec::new();
    let mut remainder = s.to_vec();
    while imfs.len() < max_imfs.min(MAX_IMFS) && !is_residual(&remainder) {
        let (imf, _) = sift(&remainder)?;
        for (r, v) in remainder.iter_mut().zip(&imf) {
            *r -= v;
        }
        imfs.push(imf);
    }
    let residual = (0..s.len())
        .map(|i| s[i] - imfs.iter().map(|imf| imf[i]).sum::<f64>())
        .collect();
    Ok(ImfSet {
        imfs,
        residual,
        source_len: s.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    fn tone(n: usize, period: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * i as f64 / period).sin()).collect()
    }

    #[test]
    fn extrema_examples() {
        let (mx, mn) = find_extrema(&[0.0, 1.0, 0.0, -1.0, 0.0]).unwrap();
        assert_eq!((mx, mn), (vec![1], vec![3]));
        let (mx, mn) = find_extrema(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(mx.is_empty() && mn.is_empty());
        let (mx, mn) = find_extrema(&tone(300, 100.0)).unwrap();
        assert_eq!((mx.len(), mn.len()), (3, 3));
        // plateau of 3 contributes its middle sample
        let (mx, _) = find_extrema(&[0.0, 2.0, 2.0, 2.0, 0.0]).unwrap();
        assert_eq!(mx, vec![2]);
        // runs touching an end are not extrema
        let (mx, mn) = find_extrema(&[5.0, 5.0, 1.0, 3.0]).unwrap();
        assert!(mx.is_empty());
        assert_eq!(mn, vec![2]);
        assert!(find_extrema(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn spline_through_two_knots_is_a_line() {
        let v = natural_spline(&[1.0, 5.0], &[2.0, 10.0], [1.0, 2.0, 3.0, 5.0]);
        assert_eq!(v, vec![2.0, 4.0, 6.0, 10.0]);
    }

    #[test]
    fn spline_interpolates_knots() {
        let xs = [-2.0, 0.0, 1.0, 4.0, 6.0];
        let ys = [1.0, -1.0, 3.0, 0.5, 2.0];
        let v = natural_spline(&xs, &ys, xs);
        for (a, b) in v.iter().zip(&ys) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_examples() {
        let mut s = vec![0.0; 12];
        for i in [2, 5, 9] {
            s[i] = 1.0;
        }
        let env = envelope(&s, &[2, 5, 9]).unwrap();
        assert!(env.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(envelope(&s, &[2]).is_err());

        // period 50 with phase so that sampled peaks miss the true crest
        let sig: Vec<f64> = (0..500).map(|i| (2.0 * PI * (i as f64 + 0.3) / 47.0).sin()).collect();
        let (mx, _) = find_extrema(&sig).unwrap();
        let env = envelope(&sig, &mx).unwrap();
        for v in &env[mx[0]..=mx[mx.len() - 1]] {
            assert!((v - 1.0).abs() < 0.05, "{v}");
        }
    }

    #[test]
    fn sift_tone_and_constant() {
        let s: Vec<f64> = (0..400).map(|i| (2.0 * PI * (i as f64 + 0.3) / 37.0).sin()).collect();
        let (imf, _) = sift(&s).unwrap();
        assert!(corr(&imf, &s) >= 0.99);
        assert!(sift(&[2.0; 16]).is_err());
    }

    #[test]
    fn sift_idempotent_on_tones() {
        for period in [20.0, 40.0, 64.0] {
            let s = tone(640, period);
            let (once, _) = sift(&s).unwrap();
            let (twice, _) = sift(&once).unwrap();
            let diff: f64 = once.iter().zip(&twice).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = once.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(diff / norm < 1e-6, "period {period}: {}", diff / norm);
        }
    }

    #[test]
    fn decompose_tone_and_constant() {
        let s: Vec<f64> = (0..500).map(|i| (2.0 * PI * (i as f64 + 0.3) / 43.0).sin()).collect();
        let set = decompose(&s, MAX_IMFS).unwrap();
        assert!(corr(set.imf(1).unwrap(), &s) >= 0.95);
        let rest: Vec<f64> = (0..s.len())
            .map(|i| set.residual[i] + set.imfs[1..].iter().map(|m| m[i]).sum::<f64>())
            .collect();
        let rest_norm = rest.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(rest_norm / norm < 0.2, "{}", rest_norm / norm);

        let flat = decompose(&[3.0; 32], 5).unwrap();
        assert!(flat.imfs.is_empty());
        assert_eq!(flat.residual, vec![3.0; 32]);
        assert!(decompose(&[1.0, 2.0, 3.0], 3).is_err());
        assert!(decompose(&[1.0; 8], 0).is_err());
    }

    fn two_tone() -> (Vec<f64>, Vec<f64>) {
        let fs = 1000.0;
        let t: Vec<f64> = (0..1000).map(|i| i as f64 / fs).collect();
        let high: Vec<f64> = t.iter().map(|t| (2.0 * PI * 50.0 * t).sin()).collect();
        let s = t.iter().zip(&high).map(|(t, h)| h + (2.0 * PI * 5.0 * t).sin()).collect();
        (s, high)
    }

    #[test]
    fn two_tone_separation() {
        let (s, high) = two_tone();
        let set = decompose(&s, MAX_IMFS).unwrap();
        let r = corr(set.imf(1).unwrap(), &high);
        assert!(r >= 0.95, "corr {r}");
    }

    fn zero_crossing_rate(s: &[f64]) -> f64 {
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let c = s.windows(2).filter(|w| (w[0] - mean) * (w[1] - mean) < 0.0).count();
        c as f64 / s.len() as f64
    }

    #[test]
    fn imfs_ordered_by_frequency_on_two_tones() {
        let (s, _) = two_tone();
        let set = decompose(&s, MAX_IMFS).unwrap();
        assert!(set.imfs.len() >= 2);
        for pair in set.imfs.windows(2) {
            assert!(zero_crossing_rate(&pair[0]) >= zero_crossing_rate(&pair[1]));
        }
    }

    #[test]
    fn scaling_is_linear() {
        let (s, _) = two_tone();
        let c = 3.7;
        let a = decompose(&s, MAX_IMFS).unwrap();
        let scaled: Vec<f64> = s.iter().map(|v| v * c).collect();
        let b = decompose(&scaled, MAX_IMFS).unwrap();
        assert_eq!(a.imfs.len(), b.imfs.len());
        for (x, y) in a.imfs.iter().zip(&b.imfs) {
            let diff: f64 = x.iter().zip(y).map(|(x, y)| (c * x - y).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = y.iter().map(|y| y * y).sum::<f64>().sqrt();
            assert!(diff / norm < 1e-6);
        }
    }
}
