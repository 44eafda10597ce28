//! Entropy and energy measures on coordinate streams and their IMFs.
//!
//! Probabilities come from an equal-width histogram over the sequence's
//! min–max range (16 bins by default). Entropies are in bits.

use crate::emd::ImfSet;
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 16;
/// Bound on reported signal-to-noise ratios, in dB.
pub const SNR_CAP_DB: f64 = 300.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramEstimate {
    pub bin_count: usize,
    pub edges: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl HistogramEstimate {
    /// A constant sequence lands entirely in the first bin.
    pub fn equal_width(s: &[f64], bins: usize) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Degenerate("histogram of an empty sequence".into()));
        }
        if bins == 0 {
            return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
        }
        let (lo, hi) = s
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for v in s {
            let b = if width > 0.0 {
                (((v - lo) / (hi - lo)) * bins as f64) as usize
            } else {
                0
            };
            counts[b.min(bins - 1)] += 1;
        }
        let n = s.len() as f64;
        Ok(HistogramEstimate {
            bin_count: bins,
            edges: (0..=bins).map(|i| lo + width * i as f64).collect(),
            probabilities: counts.into_iter().map(|c| c as f64 / n).collect(),
        })
    }

    /// Center of the most populated bin (lowest bin on ties).
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for (i, p) in self.probabilities.iter().enumerate() {
            if *p > self.probabilities[best] {
                best = i;
            }
        }
        0.5 * (self.edges[best] + self.edges[best + 1])
    }
}

pub fn shannon_from_probabilities(p: &[f64]) -> f64 {
    -p.iter().filter(|p| **p > 0.0).map(|p| p * p.log2()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenyiOrder {
    Two,
    Three,
}

impl RenyiOrder {
    fn alpha(self) -> i32 {
        match self {
            RenyiOrder::Two => 2,
            RenyiOrder::Three => 3,
        }
    }
}

pub fn renyi_from_probabilities(p: &[f64], order: RenyiOrder) -> f64 {
    let a = order.alpha();
    let sum: f64 = p.iter().map(|p| p.powi(a)).sum();
    sum.log2() / (1 - a) as f64
}

pub fn shannon_entropy(s: &[f64], bins: usize) -> Result<f64> {
    Ok(shannon_from_probabilities(&HistogramEstimate::equal_width(s, bins)?.probabilities))
}

pub fn renyi_entropy(s: &[f64], order: RenyiOrder, bins: usize) -> Result<f64> {
    Ok(renyi_from_probabilities(
        &HistogramEstimate::equal_width(s, bins)?.probabilities,
        order,
    ))
}

pub fn conventional_energy(s: &[f64]) -> f64 {
    s.iter().map(|v| v * v).sum()
}

/// Interior operator values `s[n]^2 - s[n-1] s[n+1]`, one per interior sample.
pub fn teager_kaiser(s: &[f64]) -> Result<Vec<f64>> {
    if s.len() < 3 {
        return Err(Error::Degenerate(format!(
            "Teager-Kaiser operator needs 3 samples, got {}",
            s.len()
        )));
    }
    Ok(s.windows(3).map(|w| w[1] * w[1] - w[0] * w[2]).collect())
}

pub fn teager_kaiser_energy(s: &[f64]) -> Result<f64> {
    Ok(teager_kaiser(s)?.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyKind {
    Conventional,
    TeagerKaiser,
}

impl EnergyKind {
    /// Non-negative energy of `s`. A negative Teager-Kaiser total clamps to 0.
    pub fn energy(self, s: &[f64]) -> Result<f64> {
        match self {
            EnergyKind::Conventional => Ok(conventional_energy(s)),
            EnergyKind::TeagerKaiser => Ok(teager_kaiser_energy(s)?.max(0.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPair {
    pub signal_energy: f64,
    pub noise_energy: f64,
    pub snr_db: f64,
}

impl EnergyPair {
    pub fn new(signal_energy: f64, noise_energy: f64) -> Self {
        let snr_db = match (signal_energy > 0.0, noise_energy > 0.0) {
            (true, true) => (10.0 * (signal_energy / noise_energy).log10()).clamp(-SNR_CAP_DB, SNR_CAP_DB),
            (true, false) => SNR_CAP_DB,
            (false, true) => -SNR_CAP_DB,
            (false, false) => 0.0,
        };
        EnergyPair {
            signal_energy,
            noise_energy,
            snr_db,
        }
    }
}

/// SNR with IMF 1 as the noise estimate and `s - IMF 1` as the signal.
pub fn energy_snr(s: &[f64], imfs: &ImfSet, kind: EnergyKind) -> Result<EnergyPair> {
    let noise = imfs
        .imf(1)
        .ok_or_else(|| Error::Degenerate("SNR needs at least one IMF".into()))?;
    let signal: Vec<f64> = s.iter().zip(noise).map(|(s, n)| s - n).collect();
    Ok(EnergyPair::new(kind.energy(&signal)?, kind.energy(noise)?))
}

/// Intrinsic variant: the signal energy is the sum of the per-component
/// energies of IMFs 2.. and the residual rather than the energy of their sum.
pub fn intrinsic_energy_snr(imfs: &ImfSet, kind: EnergyKind) -> Result<EnergyPair> {
    let noise = imfs
        .imf(1)
        .ok_or_else(|| Error::Degenerate("SNR needs at least one IMF".into()))?;
    let mut signal = kind.energy(&imfs.residual)?;
    for imf in &imfs.imfs[1..] {
        signal += kind.energy(imf)?;
    }
    Ok(EnergyPair::new(signal, kind.energy(noise)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImfMeasures {
    pub ce: f64,
    pub tke: f64,
    pub shannon: f64,
    pub renyi2: f64,
    pub renyi3: f64,
}

/// Measures of IMFs 1–3; absent IMFs are `None`.
pub fn intrinsic_measures(imfs: &ImfSet) -> [Option<ImfMeasures>; 3] {
    std::array::from_fn(|i| {
        let imf = imfs.imf(i + 1)?;
        let hist = HistogramEstimate::equal_width(imf, DEFAULT_BINS).ok()?;
        Some(ImfMeasures {
            ce: conventional_energy(imf),
            tke: teager_kaiser_energy(imf).ok()?,
            shannon: shannon_from_probabilities(&hist.probabilities),
            renyi2: renyi_from_probabilities(&hist.probabilities, RenyiOrder::Two),
            renyi3: renyi_from_probabilities(&hist.probabilities, RenyiOrder::Three),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emd::decompose;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn shannon_examples() {
        assert_eq!(shannon_entropy(&[4.2; 10], DEFAULT_BINS).unwrap(), 0.0);
        let uniform: Vec<f64> = (0..16).map(f64::from).collect();
        assert!((shannon_entropy(&uniform, 16).unwrap() - 4.0).abs() < 1e-12);
        assert!((shannon_from_probabilities(&[0.5, 0.25, 0.25]) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn renyi_examples() {
        let four = [0.0, 1.0, 2.0, 3.0];
        assert!((renyi_entropy(&four, RenyiOrder::Two, 4).unwrap() - 2.0).abs() < 1e-12);
        assert!((renyi_from_probabilities(&[0.5, 0.5], RenyiOrder::Two) - 1.0).abs() < 1e-15);
        let r3 = renyi_from_probabilities(&[0.5, 0.25, 0.25], RenyiOrder::Three);
        assert!((r3 - (-0.5 * 0.15625f64.log2())).abs() < 1e-12);
        assert!((r3 - 1.3390).abs() < 1e-4);
    }

    #[test]
    fn energy_examples() {
        assert_eq!(conventional_energy(&[1.0, 2.0, 3.0]), 14.0);
        assert_eq!(conventional_energy(&[0.0; 5]), 0.0);
        assert!(teager_kaiser(&[2.5; 6]).unwrap().iter().all(|v| *v == 0.0));
        assert_eq!(teager_kaiser(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0]);
        assert!(teager_kaiser(&[1.0, 2.0]).is_err());

        let (a, w) = (2.5, 0.2);
        let s: Vec<f64> = (0..200).map(|n| a * (w * n as f64).sin()).collect();
        let expect = a * a * w.sin().powi(2);
        for psi in teager_kaiser(&s).unwrap() {
            assert!((psi - expect).abs() <= 0.01 * expect);
        }
    }

    #[test]
    fn snr_cap_rules() {
        assert!((EnergyPair::new(100.0, 1.0).snr_db - 20.0).abs() < 1e-12);
        assert_eq!(EnergyPair::new(5.0, 0.0).snr_db, 300.0);
        assert_eq!(EnergyPair::new(0.0, 5.0).snr_db, -300.0);
        assert_eq!(EnergyPair::new(0.0, 0.0).snr_db, 0.0);
        assert!(EnergyPair::new(1e-300, 1e300).snr_db >= -300.0);
    }

    #[test]
    fn snr_rises_as_dither_shrinks() {
        let low: Vec<f64> = (0..800).map(|i| (2.0 * PI * i as f64 / 160.0).sin()).collect();
        let mut last = f64::NEG_INFINITY;
        for amp in [0.3, 0.1, 0.03] {
            let s: Vec<f64> = low
                .iter()
                .enumerate()
                .map(|(i, v)| v + amp * (2.0 * PI * i as f64 / 6.0).sin())
                .collect();
            let imfs = decompose(&s, 10).unwrap();
            let snr = energy_snr(&s, &imfs, EnergyKind::Conventional).unwrap().snr_db;
            assert!(snr > 0.0 && snr > last, "amp {amp}: {snr}");
            last = snr;
        }
    }

    #[test]
    fn snr_needs_an_imf() {
        let flat = decompose(&[1.0; 16], 3).unwrap();
        assert!(energy_snr(&[1.0; 16], &flat, EnergyKind::Conventional).is_err());
        assert!(intrinsic_measures(&flat).iter().all(Option::is_none));
    }

    #[test]
    fn intrinsic_measure_definitions() {
        let s: Vec<f64> = (0..400).map(|i| (2.0 * PI * i as f64 / 40.0).sin()).collect();
        let set = ImfSet {
            imfs: vec![s.clone()],
            residual: vec![0.0; 400],
            source_len: 400,
        };
        let m = intrinsic_measures(&set);
        assert_eq!(m[0].unwrap().ce, conventional_energy(&s));
        assert!(m[1].is_none() && m[2].is_none());
    }

    #[test]
    fn two_tone_energy_split() {
        let s: Vec<f64> = (0..1000)
            .map(|i| {
                let t = i as f64 / 1000.0;
                (2.0 * PI * 50.0 * t).sin() + (2.0 * PI * 5.0 * t).sin()
            })
            .collect();
        let set = decompose(&s, 10).unwrap();
        let m = intrinsic_measures(&set);
        let split = m[0].unwrap().ce + m[1].unwrap().ce;
        let total = conventional_energy(&s);
        assert!((split - total).abs() <= 0.1 * total, "{split} vs {total}");
    }

    proptest! {
        #[test]
        fn entropy_bounds_and_order(v in prop::collection::vec(-100.0f64..100.0, 1..200)) {
            let p = HistogramEstimate::equal_width(&v, DEFAULT_BINS).unwrap().probabilities;
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let h = shannon_from_probabilities(&p);
            let r2 = renyi_from_probabilities(&p, RenyiOrder::Two);
            let r3 = renyi_from_probabilities(&p, RenyiOrder::Three);
            prop_assert!(h >= -1e-12 && h <= 4.0 + 1e-12);
            prop_assert!(h + 1e-12 >= r2 && r2 + 1e-12 >= r3);
        }

        #[test]
        fn entropy_invariant_to_binary_scaling(v in prop::collection::vec(-100.0f64..100.0, 1..200),
                                               k in -8i32..8) {
            let c = 2f64.powi(k);
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            prop_assert_eq!(shannon_entropy(&v, 16).unwrap(), shannon_entropy(&scaled, 16).unwrap());
        }

        #[test]
        fn ce_degree_two(v in prop::collection::vec(-10.0f64..10.0, 1..50), c in -5.0f64..5.0) {
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let lhs = conventional_energy(&scaled);
            let rhs = c * c * conventional_energy(&v);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs));
        }

        #[test]
        fn snr_antisymmetric(a in 1e-6f64..1e6, b in 1e-6f64..1e6) {
            prop_assert!((EnergyPair::new(a, b).snr_db + EnergyPair::new(b, a).snr_db).abs() < 1e-9);
        }
    }
}
