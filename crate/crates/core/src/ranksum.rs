//! Mann-Whitney U screening of features (PD vs HC).
//!
//! Two-sided test on midranks. For pooled samples of at most
//! [`EXACT_MAX_POOLED`] values the p-value comes from the exact permutation
//! distribution of the rank sum (ties included); larger samples use the
//! normal approximation with tie-corrected variance and a 0.5 continuity
//! correction.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::ink::Label;

pub const EXACT_MAX_POOLED: usize = 12;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankSumResult {
    /// `min(U1, U2)`.
    pub u_statistic: f64,
    /// U of the first sample.
    pub u1: f64,
    pub z_score: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    pub exact: bool,
}

/// Average ranks (1-based) of `values`, ties sharing their mean rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Sum over tie groups of `t^3 - t`.
fn tie_term(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        total += t * t * t - t;
        i = j + 1;
    }
    total
}

/// Two-sided exact p-value of the first sample's rank sum. Midranks are
/// doubled to integers and the null distribution over all `C(n, n1)`
/// assignments is counted by dynamic programming.
pub fn exact_p_value(pooled_ranks: &[f64], n1: usize, observed_rank_sum: f64) -> f64 {
    let doubled: Vec<usize> = pooled_ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=n1).rev() {
            let (lower, upper) = ways.split_at_mut(k);
            let (from, to) = (&lower[k - 1], &mut upper[0]);
            for s in (r..=max_sum).rev() {
                to[s] += from[s - r];
            }
        }
    }
    let dist = &ways[n1];
    let total: f64 = dist.iter().sum();
    let obs = (2.0 * observed_rank_sum).round() as usize;
    let below: f64 = dist[..=obs.min(max_sum)].iter().sum();
    let above: f64 = dist[obs.min(max_sum + 1)..].iter().sum();
    (2.0 * below.min(above) / total).min(1.0)
}

/// Normal-approximation p-value and z-score for `u1`.
pub fn normal_p_value(u1: f64, n1: usize, n2: usize, ties: f64) -> (f64, f64) {
    let (a, b) = (n1 as f64, n2 as f64);
    let n = a + b;
    let mean = a * b / 2.0;
    let var = a * b / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= 0.0 {
        return (1.0, 0.0);
    }
    let diff = u1 - mean;
    let corrected = if diff == 0.0 { 0.0 } else { diff - 0.5 * diff.signum() };
    let z = corrected / var.sqrt();
    ((erfc(z.abs() / std::f64::consts::SQRT_2)).min(1.0), z)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<RankSumResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Degenerate("Mann-Whitney test needs two nonempty samples".into()));
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u1 = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let u2 = (n1 * n2) as f64 - u1;
    let ties = tie_term(&pooled);
    let (normal_p, z) = normal_p_value(u1, n1, n2, ties);
    let all_tied = pooled.iter().all(|v| *v == pooled[0]);
    let exact = n1 + n2 <= EXACT_MAX_POOLED;
    let p_value = if all_tied {
        1.0
    } else if exact {
        exact_p_value(&ranks, n1, r1)
    } else {
        normal_p
    };
    Ok(RankSumResult {
        u_statistic: u1.min(u2),
        u1,
        z_score: z,
        p_value,
        n1,
        n2,
        exact,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterReport {
    pub alpha: f64,
    pub results: Vec<RankSumResult>,
    /// Column indices with `p < alpha`, in column order.
    pub selected: Vec<usize>,
}

impl FilterReport {
    /// Passing features per task, keyed by the `t<task>.` column prefix.
    pub fn pass_counts(&self, columns: &[String]) -> BTreeMap<u8, usize> {
        let mut out = BTreeMap::new();
        for c in columns {
            if let Some(task) = task_of(c) {
                out.entry(task).or_insert(0);
            }
        }
        for &c in &self.selected {
            if let Some(task) = task_of(&columns[c]) {
                *out.entry(task).or_insert(0) += 1;
            }
        }
        out
    }
}

pub fn task_of(column: &str) -> Option<u8> {
    column.strip_prefix('t')?.split('.').next()?.parse().ok()
}

/// Tests every column PD vs HC and keeps those with `p < alpha`.
pub fn filter_features(m: &FeatureMatrix, alpha: f64) -> Result<FilterReport> {
    let (pd, hc) = m.label_counts();
    if pd == 0 || hc == 0 {
        return Err(Error::SingleClass(format!("{pd} PD and {hc} HC subjects")));
    }
    let pd_rows: Vec<usize> = (0..m.nrows()).filter(|&r| m.subjects[r].label == Label::Pd).collect();
    let hc_rows: Vec<usize> = (0..m.nrows()).filter(|&r| m.subjects[r].label == Label::Hc).collect();
    let results = (0..m.ncols())
        .into_par_iter()
        .map(|c| {
            let a: Vec<f64> = pd_rows.iter().map(|&r| m.get(r, c)).collect();
            let b: Vec<f64> = hc_rows.iter().map(|&r| m.get(r, c)).collect();
            mann_whitney_u(&a, &b)
        })
        .collect::<Result<Vec<_>>>()?;
    let selected = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.p_value < alpha)
        .map(|(c, _)| c)
        .collect();
    Ok(FilterReport {
        alpha,
        results,
        selected,
    })
}
