//! SVM-ranking wrapper selection: individual feature accuracies, forward
//! accumulation curves and the repeated train/test protocol.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::ranksum::{filter_features, FilterReport};
use crate::svm::{fit, grid_search, ConfusionCounts, GridSpec, Metrics, Samples, SmoOptions};

pub const DEFAULT_REPETITIONS: usize = 50;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

const FOLD_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
const ORDER_STREAM: u64 = 0xd1b5_4a32_d192_ed03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureOrder {
    Descending,
    Random,
}

impl fmt::Display for FeatureOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureOrder::Descending => "descending",
            FeatureOrder::Random => "random",
        })
    }
}

impl FromStr for FeatureOrder {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "descending" => Ok(FeatureOrder::Descending),
            "random" => Ok(FeatureOrder::Random),
            _ => Err(format!("unknown order `{s}` (expected descending or random)")),
        }
    }
}

/// Whether filtering and ranking see the whole cohort (as published) or
/// only each repetition's training split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeakMode {
    Paper,
    Clean,
}

impl fmt::Display for LeakMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LeakMode::Paper => "paper",
            LeakMode::Clean => "clean",
        })
    }
}

impl FromStr for LeakMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper" => Ok(LeakMode::Paper),
            "clean" => Ok(LeakMode::Clean),
            _ => Err(format!("unknown leak mode `{s}` (expected paper or clean)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub repetitions: usize,
    pub train_fraction: f64,
    pub grid: GridSpec,
    pub seed: u64,
    #[serde(skip)]
    pub smo: SmoOptions,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            repetitions: DEFAULT_REPETITIONS,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            grid: GridSpec::default(),
            seed: 0,
            smo: SmoOptions::default(),
        }
    }
}

impl ProtocolConfig {
    fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidArgument("repetitions must be ≥ 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        Ok(())
    }

    fn rep_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train_pd: usize,
    pub train_hc: usize,
    pub test_pd: usize,
    pub test_hc: usize,
}

/// Instrumentation of a protocol run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTrace {
    pub repetitions: usize,
    pub cells_per_repetition: Vec<usize>,
    pub folds_per_repetition: Vec<usize>,
    pub splits: Vec<SplitSizes>,
    /// Chosen `(C, z)` per repetition.
    pub chosen: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOutcome {
    /// Held-out accuracy per repetition, percent.
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Sample standard deviation across repetitions.
    pub std_accuracy: f64,
    /// Pooled over all repetitions.
    pub confusion: ConfusionCounts,
    pub metrics: Metrics,
    pub trace: ProtocolTrace,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 || v.iter().all(|x| *x == v[0]) {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Seeded stratified split; each class contributes `round(fraction · n_c)`
/// training samples (at least one on each side). Indices are returned sorted.
pub fn stratified_split(y: &[f64], train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut perm: Vec<usize> = (0..y.len()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = Vec::new();
    let mut test = Vec::new();
    for positive in [true, false] {
        let class: Vec<usize> = perm.iter().copied().filter(|&i| (y[i] > 0.0) == positive).collect();
        let n = class.len();
        if n < 2 {
            return Err(Error::SingleClass(format!(
                "{} {} subject(s); a train/test split needs at least 2 per class",
                n,
                if positive { "PD" } else { "HC" }
            )));
        }
        let k = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        train.extend_from_slice(&class[..k]);
        test.extend_from_slice(&class[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

struct RepResult {
    accuracy: f64,
    confusion: ConfusionCounts,
    cells: usize,
    folds: usize,
    split: SplitSizes,
    chosen: (f64, f64),
}

fn sizes(y: &[f64], train: &[usize], test: &[usize]) -> SplitSizes {
    let pd = |idx: &[usize]| idx.iter().filter(|&&i| y[i] > 0.0).count();
    SplitSizes {
        train_pd: pd(train),
        train_hc: train.len() - pd(train),
        test_pd: pd(test),
        test_hc: test.len() - pd(test),
    }
}

fn collect_outcome(reps: Vec<RepResult>) -> Result<ProtocolOutcome> {
    let accuracies: Vec<f64> = reps.iter().map(|r| r.accuracy).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&accuracies);
    let confusion = reps.iter().fold(ConfusionCounts::default(), |a, r| a + r.confusion);
    Ok(ProtocolOutcome {
        metrics: confusion.metrics()?,
        mean_accuracy,
        std_accuracy,
        confusion,
        trace: ProtocolTrace {
            repetitions: reps.len(),
            cells_per_repetition: reps.iter().map(|r| r.cells).collect(),
            folds_per_repetition: reps.iter().map(|r| r.folds).collect(),
            splits: reps.iter().map(|r| r.split).collect(),
            chosen: reps.iter().map(|r| r.chosen).collect(),
        },
        accuracies,
    })
}

/// Grid search on the training split, refit, score on held-out rows.
fn train_and_test(x: &Samples, y: &[f64], train: &[usize], test: &[usize], cfg: &ProtocolConfig, seed: u64) -> Result<RepResult> {
    let xtr = x.select(train);
    let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let g = grid_search(&xtr, &ytr, &cfg.grid, seed ^ FOLD_STREAM, &cfg.smo)?;
    let model = fit(&xtr, &ytr, g.best.c, g.best.z, &cfg.smo)?;
    let pred = model.predict_labels(&x.select(test))?;
    let truth: Vec<f64> = test.iter().map(|&i| y[i]).collect();
    let confusion = ConfusionCounts::from_predictions(&truth, &pred)?;
    Ok(RepResult {
        accuracy: 100.0 * confusion.accuracy()?,
        confusion,
        cells: g.cells_evaluated,
        folds: g.folds,
        split: sizes(y, train, test),
        chosen: (g.best.c, g.best.z),
    })
}

/// Repeated split / grid search / fit / test on fixed feature rows.
pub fn evaluate_samples(x: &Samples, y: &[f64], cfg: &ProtocolConfig) -> Result<ProtocolOutcome> {
    cfg.validate()?;
    if x.len() != y.len() {
        return Err(Error::Alignment {
            left: x.len(),
            right: y.len(),
        });
    }
    let reps = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.rep_seed(r);
            let (train, test) = stratified_split(y, cfg.train_fraction, seed)?;
            train_and_test(x, y, &train, &test, cfg, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    collect_outcome(reps)
}

fn columns_as_samples(m: &FeatureMatrix, cols: &[usize]) -> Samples {
    let mut data = Vec::with_capacity(m.nrows() * cols.len());
    for r in 0..m.nrows() {
        let row = m.row(r);
        data.extend(cols.iter().map(|&c| row[c]));
    }
    Samples { data, dim: cols.len() }
}

/// The protocol on every column of `m`.
pub fn evaluate_protocol(m: &FeatureMatrix, cfg: &ProtocolConfig) -> Result<ProtocolOutcome> {
    let cols: Vec<usize> = (0..m.ncols()).collect();
    evaluate_columns(m, &cols, cfg)
}

pub fn evaluate_columns(m: &FeatureMatrix, cols: &[usize], cfg: &ProtocolConfig) -> Result<ProtocolOutcome> {
    if cols.is_empty() {
        return Err(Error::InvalidArgument("no feature columns to evaluate".into()));
    }
    evaluate_samples(&columns_as_samples(m, cols), &m.targets(), cfg)
}

/// Single-feature mean held-out accuracy (percent) under the protocol.
pub fn individual_accuracy(m: &FeatureMatrix, col: usize, cfg: &ProtocolConfig) -> Result<f64> {
    if col >= m.ncols() {
        return Err(Error::InvalidArgument(format!("column {col} out of range")));
    }
    Ok(evaluate_columns(m, &[col], cfg)?.mean_accuracy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub column: usize,
    /// Percent; absent for random order.
    pub individual_accuracy: Option<f64>,
    /// 1-based position.
    pub rank: usize,
}

/// Orders `cols` by descending individual accuracy (ties by name) or by a
/// seeded permutation.
pub fn rank_features(m: &FeatureMatrix, cols: &[usize], order: FeatureOrder, cfg: &ProtocolConfig) -> Result<Vec<RankedFeature>> {
    let scored = match order {
        FeatureOrder::Descending => {
            let acc = cols
                .iter()
                .map(|&c| individual_accuracy(m, c, cfg))
                .collect::<Result<Vec<_>>>()?;
            let mut v: Vec<(usize, Option<f64>)> = cols.iter().copied().zip(acc.into_iter().map(Some)).collect();
            v.sort_by(|a, b| {
                b.1.unwrap()
                    .total_cmp(&a.1.unwrap())
                    .then_with(|| m.columns[a.0].cmp(&m.columns[b.0]))
            });
            v
        }
        FeatureOrder::Random => rank_randomly(m, cols, cfg.seed),
    };
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (column, individual_accuracy))| RankedFeature {
            feature: m.columns[column].clone(),
            column,
            individual_accuracy,
            rank: i + 1,
        })
        .collect())
}

fn rank_randomly(m: &FeatureMatrix, cols: &[usize], seed: u64) -> Vec<(usize, Option<f64>)> {
    // canonical starting order so the permutation depends only on the names
    let mut v: Vec<usize> = cols.to_vec();
    v.sort_by(|a, b| m.columns[*a].cmp(&m.columns[*b]));
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ ORDER_STREAM));
    v.into_iter().map(|c| (c, None)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurve {
    pub order: FeatureOrder,
    pub points: Vec<CurvePoint>,
    pub best_n: usize,
}

impl AccuracyCurve {
    fn from_points(order: FeatureOrder, points: Vec<CurvePoint>) -> Self {
        let mut best = 0;
        for (i, p) in points.iter().enumerate() {
            if p.mean_accuracy > points[best].mean_accuracy {
                best = i;
            }
        }
        AccuracyCurve {
            order,
            best_n: points.get(best).map_or(0, |p| p.n),
            points,
        }
    }

    pub fn max_accuracy(&self) -> f64 {
        self.points.iter().map(|p| p.mean_accuracy).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Evaluates the first `n` ranked features for `n = 1..=N` (N capped by
/// `limit`). Returns the curve and the protocol outcome at its argmax.
pub fn forward_accumulate(
    m: &FeatureMatrix,
    ranked: &[RankedFeature],
    order: FeatureOrder,
    limit: Option<usize>,
    cfg: &ProtocolConfig,
) -> Result<(AccuracyCurve, ProtocolOutcome)> {
    if ranked.is_empty() {
        return Err(Error::InvalidArgument("no ranked features to accumulate".into()));
    }
    let n_max = limit.map_or(ranked.len(), |l| l.clamp(1, ranked.len()));
    let mut outcomes = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let cols: Vec<usize> = ranked[..n].iter().map(|r| r.column).collect();
        outcomes.push(evaluate_columns(m, &cols, cfg)?);
    }
    let points = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| CurvePoint {
            n: i + 1,
            mean_accuracy: o.mean_accuracy,
            std_accuracy: o.std_accuracy,
        })
        .collect();
    let curve = AccuracyCurve::from_points(order, points);
    let best = outcomes.swap_remove(curve.best_n - 1);
    Ok((curve, best))
}

/// Knobs of the full filter → rank → accumulate pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub protocol: ProtocolConfig,
    pub alpha: f64,
    pub order: FeatureOrder,
    pub leak_mode: LeakMode,
    /// Keep only the `k` lowest-p filtered features before ranking.
    pub rank_limit: Option<usize>,
    /// Longest forward-accumulation prefix.
    pub curve_limit: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            protocol: ProtocolConfig::default(),
            alpha: crate::ranksum::DEFAULT_ALPHA,
            order: FeatureOrder::Descending,
            leak_mode: LeakMode::Paper,
            rank_limit: None,
            curve_limit: None,
        }
    }
}

/// Filter survivors, capped by `limit` (lowest p first, ties by name) and
/// returned in column order. Falls back to the single lowest-p column when
/// nothing passes.
pub fn candidate_columns(m: &FeatureMatrix, report: &FilterReport, limit: Option<usize>) -> Vec<usize> {
    let by_p = |a: &usize, b: &usize| {
        report.results[*a]
            .p_value
            .total_cmp(&report.results[*b].p_value)
            .then_with(|| m.columns[*a].cmp(&m.columns[*b]))
    };
    let mut cols = report.selected.clone();
    if cols.is_empty() {
        log::warn!("no feature passed the rank-sum filter; keeping the lowest-p feature");
        cols = (0..m.ncols()).min_by(by_p).into_iter().collect();
    }
    if let Some(k) = limit {
        cols.sort_by(by_p);
        cols.truncate(k.max(1));
        cols.sort_unstable();
    }
    cols
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub leak_mode: LeakMode,
    pub candidates: Vec<String>,
    /// Ranking (clean mode: the first repetition's).
    pub ranked: Vec<RankedFeature>,
    pub curve: AccuracyCurve,
    /// Features used by the reported model (clean mode: first repetition's).
    pub selected: Vec<String>,
    pub outcome: ProtocolOutcome,
}

/// Filter, rank, accumulate and report the protocol at the curve's argmax.
pub fn run_selection(m: &FeatureMatrix, cfg: &SelectionConfig) -> Result<SelectionOutcome> {
    match cfg.leak_mode {
        LeakMode::Paper => run_paper(m, cfg),
        LeakMode::Clean => run_clean(m, cfg),
    }
}

fn run_paper(m: &FeatureMatrix, cfg: &SelectionConfig) -> Result<SelectionOutcome> {
    let report = filter_features(m, cfg.alpha)?;
    let cands = candidate_columns(m, &report, cfg.rank_limit);
    let ranked = rank_features(m, &cands, cfg.order, &cfg.protocol)?;
    let (curve, outcome) = forward_accumulate(m, &ranked, cfg.order, cfg.curve_limit, &cfg.protocol)?;
    Ok(SelectionOutcome {
        leak_mode: LeakMode::Paper,
        candidates: cands.iter().map(|&c| m.columns[c].clone()).collect(),
        selected: ranked[..curve.best_n].iter().map(|r| r.feature.clone()).collect(),
        ranked,
        curve,
        outcome,
    })
}

struct CleanRep {
    /// Held-out result per prefix length.
    per_n: Vec<RepResult>,
    /// Index into `per_n` chosen by inner CV.
    chosen: usize,
    ranked: Vec<RankedFeature>,
    candidates: Vec<String>,
}

/// Inner CV accuracy of a column subset on the training rows.
fn cv_accuracy(x: &Samples, y: &[f64], train: &[usize], cfg: &ProtocolConfig, seed: u64) -> Result<f64> {
    let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    Ok(grid_search(&x.select(train), &ytr, &cfg.grid, seed ^ FOLD_STREAM, &cfg.smo)?.best.accuracy)
}

fn clean_rep(m: &FeatureMatrix, cfg: &SelectionConfig, r: usize) -> Result<CleanRep> {
    let pc = &cfg.protocol;
    let seed = pc.rep_seed(r);
    let y = m.targets();
    let (train, test) = stratified_split(&y, pc.train_fraction, seed)?;
    let mut local = m.clone();
    local.impute_from_rows(&train);
    let train_m = local.select_rows(&train);
    let report = filter_features(&train_m, cfg.alpha)?;
    let cands = candidate_columns(&train_m, &report, cfg.rank_limit);

    let order: Vec<(usize, Option<f64>)> = match cfg.order {
        FeatureOrder::Descending => {
            let mut v = cands
                .iter()
                .map(|&c| Ok((c, Some(cv_accuracy(&columns_as_samples(&local, &[c]), &y, &train, pc, seed)?))))
                .collect::<Result<Vec<_>>>()?;
            v.sort_by(|a, b| {
                b.1.unwrap()
                    .total_cmp(&a.1.unwrap())
                    .then_with(|| m.columns[a.0].cmp(&m.columns[b.0]))
            });
            v
        }
        FeatureOrder::Random => rank_randomly(m, &cands, seed),
    };
    let n_max = cfg.curve_limit.map_or(order.len(), |l| l.clamp(1, order.len()));
    let mut per_n = Vec::with_capacity(n_max);
    let mut best = (f64::NEG_INFINITY, 0);
    for n in 1..=n_max {
        let cols: Vec<usize> = order[..n].iter().map(|o| o.0).collect();
        let x = columns_as_samples(&local, &cols);
        let inner = cv_accuracy(&x, &y, &train, pc, seed)?;
        if inner > best.0 {
            best = (inner, n - 1);
        }
        per_n.push(train_and_test(&x, &y, &train, &test, pc, seed)?);
    }
    Ok(CleanRep {
        per_n,
        chosen: best.1,
        ranked: order
            .iter()
            .enumerate()
            .map(|(i, &(column, individual_accuracy))| RankedFeature {
                feature: m.columns[column].clone(),
                column,
                individual_accuracy: individual_accuracy.map(|a| 100.0 * a),
                rank: i + 1,
            })
            .collect(),
        candidates: cands.iter().map(|&c| m.columns[c].clone()).collect(),
    })
}

fn run_clean(m: &FeatureMatrix, cfg: &SelectionConfig) -> Result<SelectionOutcome> {
    cfg.protocol.validate()?;
    let mut reps = (0..cfg.protocol.repetitions)
        .into_par_iter()
        .map(|r| clean_rep(m, cfg, r))
        .collect::<Result<Vec<_>>>()?;
    // curve over prefix lengths available in every repetition
    let n_common = reps.iter().map(|r| r.per_n.len()).min().unwrap_or(0);
    let points = (0..n_common)
        .map(|i| {
            let acc: Vec<f64> = reps.iter().map(|r| r.per_n[i].accuracy).collect();
            let (mean_accuracy, std_accuracy) = mean_std(&acc);
            CurvePoint {
                n: i + 1,
                mean_accuracy,
                std_accuracy,
            }
        })
        .collect();
    let curve = AccuracyCurve::from_points(cfg.order, points);
    let first = &reps[0];
    let selected = first.ranked[..=first.chosen].iter().map(|r| r.feature.clone()).collect();
    let ranked = first.ranked.clone();
    let candidates = first.candidates.clone();
    let chosen: Vec<RepResult> = reps
        .iter_mut()
        .map(|r| {
            let i = r.chosen;
            r.per_n.swap_remove(i)
        })
        .collect();
    Ok(SelectionOutcome {
        leak_mode: LeakMode::Clean,
        candidates,
        ranked,
        curve,
        selected,
        outcome: collect_outcome(chosen)?,
    })
}
