//! On-disk pipeline stages and their artifacts.
//!
//! Every stage is a pure function from in-memory inputs to named output
//! files; the `*_stage` wrappers read inputs from an artifact directory and
//! write outputs atomically together with a provenance record. [`run_all`]
//! chains the pure functions without re-reading anything, so comparing its
//! directory with a stage-by-stage run checks composability byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cohorts::{
    evaluate_scheme, group_matrix, group_seed, pass_count_table, CohortReport, CohortScheme, SchemeKind, COMBINED,
    DEFAULT_AGE_THRESHOLD, PASS_COUNT_GROUPS,
};
use crate::error::{Error, Result};
use crate::features::{assemble_matrix, FeatureMatrix, RegistryProfile};
use crate::ink::{load_dataset, DatasetManifest};
use crate::io::{sha256_hex, write_atomic};
use crate::ranksum::{filter_features, task_of, DEFAULT_ALPHA};
use crate::selection::{
    candidate_columns, forward_accumulate, rank_features, stratified_split, FeatureOrder, LeakMode, ProtocolConfig, RankedFeature,
    SelectionConfig, DEFAULT_REPETITIONS, DEFAULT_TRAIN_FRACTION,
};
use crate::svm::{fit, grid_search, GridSpec, Samples, C_GRID, DEFAULT_FOLDS, Z_GRID};
use crate::synth::{write_dataset, SynthConfig};

pub const FEATURES_FILE: &str = "features.tsv";
pub const MW_FILE: &str = "mw_results.tsv";
pub const PASS_COUNTS_FILE: &str = "pass_counts.tsv";
pub const FILTERED_FILE: &str = "filtered.tsv";
pub const RANKING_FILE: &str = "ranking.tsv";
pub const CAPACITY_FILE: &str = "capacity.tsv";
pub const MODEL_FILE: &str = "model.json";
pub const COHORT_REPORT_FILE: &str = "cohort_report.json";
pub const COMPARISON_FILE: &str = "comparison.tsv";
pub const BARS_FILE: &str = "bars.tsv";
pub const CURVES_FILE: &str = "curves.tsv";

/// Parameters shared by all stages. Defaults follow the published protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Empty means every task present.
    pub tasks: Vec<u8>,
    pub scheme: SchemeKind,
    pub age_threshold: u32,
    pub alpha: f64,
    pub order: FeatureOrder,
    pub folds: usize,
    pub repetitions: usize,
    pub train_fraction: f64,
    pub leak_mode: LeakMode,
    pub seed: u64,
    pub profile: RegistryProfile,
    pub rank_limit: Option<usize>,
    pub curve_limit: Option<usize>,
    pub c_values: Vec<f64>,
    pub z_values: Vec<f64>,
    /// Also evaluate the other feature order and report its curve.
    #[serde(default = "default_true")]
    pub compare_orders: bool,
}

fn default_true() -> bool {
    true
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tasks: Vec::new(),
            scheme: SchemeKind::Combined,
            age_threshold: DEFAULT_AGE_THRESHOLD,
            alpha: DEFAULT_ALPHA,
            order: FeatureOrder::Descending,
            folds: DEFAULT_FOLDS,
            repetitions: DEFAULT_REPETITIONS,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            leak_mode: LeakMode::Paper,
            seed: 0,
            profile: RegistryProfile::Full,
            rank_limit: None,
            curve_limit: None,
            c_values: C_GRID.to_vec(),
            z_values: Z_GRID.to_vec(),
            compare_orders: true,
        }
    }
}

impl RunConfig {
    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            repetitions: self.repetitions,
            train_fraction: self.train_fraction,
            grid: GridSpec {
                c_values: self.c_values.clone(),
                z_values: self.z_values.clone(),
                folds: self.folds,
            },
            seed: self.seed,
            ..ProtocolConfig::default()
        }
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            protocol: self.protocol(),
            alpha: self.alpha,
            order: self.order,
            leak_mode: self.leak_mode,
            rank_limit: self.rank_limit,
            curve_limit: self.curve_limit,
        }
    }

    pub fn scheme(&self) -> CohortScheme {
        CohortScheme {
            kind: self.scheme,
            age_threshold: self.age_threshold,
        }
    }
}

/// Named output files of one stage, in write order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn push(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_slice())
    }
}

/// Input fingerprint: a basename and the SHA-256 of its bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Digest {
    pub name: String,
    pub sha256: String,
}

fn digest(name: &str, bytes: &[u8]) -> Digest {
    Digest {
        name: name.to_string(),
        sha256: sha256_hex(bytes),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn read(dir: &Path, name: &str) -> Result<Vec<u8>> {
    let p = dir.join(name);
    std::fs::read(&p).map_err(|e| Error::io(p, e))
}

fn read_text(dir: &Path, name: &str) -> Result<String> {
    String::from_utf8(read(dir, name)?).map_err(|_| Error::Format(format!("{name} is not UTF-8")))
}

/// Writes the stage outputs and `provenance_<stage>.json`.
pub fn write_stage(dir: &Path, stage: &str, cfg: &serde_json::Value, inputs: &[Digest], out: &Artifacts) -> Result<()> {
    for (name, bytes) in &out.files {
        write_atomic(&dir.join(name), bytes)?;
    }
    let outputs: Vec<Digest> = out.files.iter().map(|(n, b)| digest(n, b)).collect();
    let record = json!({
        "stage": stage,
        "tool": concat!("inkmark ", env!("CARGO_PKG_VERSION")),
        "config": cfg,
        "inputs": inputs,
        "outputs": outputs,
    });
    let mut text = serde_json::to_string_pretty(&record)?;
    text.push('\n');
    write_atomic(&dir.join(format!("provenance_{stage}.json")), text.as_bytes())
}

fn config_json(cfg: &RunConfig) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(cfg)?)
}

// ---------------------------------------------------------------- synth

pub fn synth_stage(cfg: &SynthConfig, dir: &Path) -> Result<PathBuf> {
    let manifest = write_dataset(cfg, dir)?;
    let inputs = [digest("manifest.txt", &read(dir, "manifest.txt")?)];
    write_stage(dir, "synth", &serde_json::to_value(cfg)?, &inputs, &Artifacts::default())?;
    Ok(manifest)
}

// -------------------------------------------------------------- extract

/// Digest over the manifest and every recording it references, in
/// manifest order.
pub fn dataset_digest(manifest_path: &Path) -> Result<Digest> {
    let bytes = std::fs::read(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Manifest("manifest is not UTF-8".into()))?;
    let base = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = DatasetManifest::parse(&text, base)?;
    let mut all = sha256_hex(&bytes);
    for e in &manifest.entries {
        for p in e.recordings.values() {
            let full = manifest.resolve(p);
            let rb = std::fs::read(&full).map_err(|err| Error::io(&full, err))?;
            all.push_str(&sha256_hex(&rb));
        }
    }
    Ok(Digest {
        name: "dataset".into(),
        sha256: sha256_hex(all.as_bytes()),
    })
}

pub fn extract(manifest_path: &Path, cfg: &RunConfig) -> Result<FeatureMatrix> {
    let manifest = DatasetManifest::read(manifest_path)?;
    let data = load_dataset(&manifest)?;
    let tasks: Vec<u8> = if cfg.tasks.is_empty() {
        let mut t: Vec<u8> = data.recordings.iter().map(|r| r.task).collect();
        t.sort_unstable();
        t.dedup();
        t
    } else {
        cfg.tasks.clone()
    };
    if tasks.is_empty() {
        return Err(Error::Manifest("manifest lists no recordings".into()));
    }
    assemble_matrix(&data, &tasks, cfg.profile)
}

pub fn extract_stage(manifest_path: &Path, cfg: &RunConfig, dir: &Path) -> Result<FeatureMatrix> {
    let m = extract(manifest_path, cfg)?;
    let mut out = Artifacts::default();
    out.push(FEATURES_FILE, m.to_tsv());
    write_stage(dir, "extract", &config_json(cfg)?, &[dataset_digest(manifest_path)?], &out)?;
    Ok(m)
}

// --------------------------------------------------------------- filter

/// Columns of the selected tasks (all when `tasks` is empty).
pub fn restrict_tasks(m: &FeatureMatrix, tasks: &[u8]) -> Result<FeatureMatrix> {
    if tasks.is_empty() {
        return Ok(m.clone());
    }
    let cols: Vec<usize> = (0..m.ncols())
        .filter(|&c| task_of(&m.columns[c]).is_some_and(|t| tasks.contains(&t)))
        .collect();
    if cols.is_empty() {
        return Err(Error::InvalidArgument(format!("no feature columns for tasks {tasks:?}")));
    }
    Ok(m.select_columns(&cols))
}

/// Per column, the number of repetitions whose training split (re-imputed
/// on its own rows) passes the filter. Splits match the Combined group's
/// protocol splits.
fn train_split_passes(m: &FeatureMatrix, cfg: &RunConfig) -> Result<Vec<usize>> {
    let y = m.targets();
    let seed = group_seed(cfg.seed, COMBINED);
    let mut passes = vec![0usize; m.ncols()];
    for r in 0..cfg.repetitions {
        let (train, _) = stratified_split(&y, cfg.train_fraction, seed.wrapping_add(r as u64))?;
        for c in filter_features(&group_matrix(m, &train), cfg.alpha)?.selected {
            passes[c] += 1;
        }
    }
    Ok(passes)
}

pub fn filter(m: &FeatureMatrix, cfg: &RunConfig) -> Result<(FeatureMatrix, Artifacts)> {
    let m = restrict_tasks(m, &cfg.tasks)?;
    let report = filter_features(&m, cfg.alpha)?;
    let train_passes = train_split_passes(&m, cfg)?;
    let mut mw = String::from("feature\tu\tu1\tz\tp\tn_pd\tn_hc\texact\tpassed\ttrain_pass_rate\n");
    for (c, r) in report.results.iter().enumerate() {
        let _ = writeln!(
            mw,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            m.columns[c],
            r.u_statistic,
            r.u1,
            r.z_score,
            r.p_value,
            r.n1,
            r.n2,
            r.exact,
            r.p_value < cfg.alpha,
            train_passes[c] as f64 / cfg.repetitions as f64
        );
    }
    let table = pass_count_table(&m, cfg.alpha, cfg.age_threshold)?;
    let mut counts = String::from("task");
    for g in PASS_COUNT_GROUPS {
        counts.push('\t');
        counts.push_str(g);
    }
    counts.push('\n');
    for (task, row) in &table {
        counts.push_str(&task.to_string());
        for v in row {
            counts.push('\t');
            counts.push_str(&v.map_or_else(|| "NA".to_string(), |v| v.to_string()));
        }
        counts.push('\n');
    }
    let filtered = m.select_columns(&candidate_columns(&m, &report, cfg.rank_limit));
    let mut out = Artifacts::default();
    out.push(MW_FILE, mw);
    out.push(PASS_COUNTS_FILE, counts);
    out.push(FILTERED_FILE, filtered.to_tsv());
    Ok((filtered, out))
}

pub fn filter_stage(cfg: &RunConfig, dir: &Path) -> Result<FeatureMatrix> {
    let text = read_text(dir, FEATURES_FILE)?;
    let (filtered, out) = filter(&FeatureMatrix::from_tsv(&text)?, cfg)?;
    write_stage(dir, "filter", &config_json(cfg)?, &[digest(FEATURES_FILE, text.as_bytes())], &out)?;
    Ok(filtered)
}

// ----------------------------------------------------------------- rank

/// Ranks every column of the filtered matrix. Individual accuracies are
/// always computed (they feed the per-task capacity table); random order
/// only permutes them.
pub fn rank(filtered: &FeatureMatrix, cfg: &RunConfig) -> Result<(Vec<RankedFeature>, Artifacts)> {
    let proto = cfg.protocol();
    let cols: Vec<usize> = (0..filtered.ncols()).collect();
    let scored = rank_features(filtered, &cols, FeatureOrder::Descending, &proto)?;
    let ranked = match cfg.order {
        FeatureOrder::Descending => scored.clone(),
        FeatureOrder::Random => {
            let acc: BTreeMap<usize, Option<f64>> = scored.iter().map(|r| (r.column, r.individual_accuracy)).collect();
            let mut r = rank_features(filtered, &cols, FeatureOrder::Random, &proto)?;
            for f in &mut r {
                f.individual_accuracy = acc[&f.column];
            }
            r
        }
    };
    let mut text = String::from("rank\tfeature\tindividual_accuracy\n");
    for r in &ranked {
        let _ = writeln!(text, "{}\t{}\t{}", r.rank, r.feature, fmt_opt(r.individual_accuracy));
    }
    let mut best: BTreeMap<u8, &RankedFeature> = BTreeMap::new();
    for r in &scored {
        if let Some(t) = task_of(&r.feature) {
            // scored is sorted descending, so the first hit per task wins
            best.entry(t).or_insert(r);
        }
    }
    let mut capacity = String::from("task\tfeature\taccuracy\n");
    for (t, r) in &best {
        let _ = writeln!(capacity, "{}\t{}\t{}", t, r.feature, fmt_opt(r.individual_accuracy));
    }
    let mut out = Artifacts::default();
    out.push(RANKING_FILE, text);
    out.push(CAPACITY_FILE, capacity);
    Ok((ranked, out))
}

pub fn rank_stage(cfg: &RunConfig, dir: &Path) -> Result<Vec<RankedFeature>> {
    let text = read_text(dir, FILTERED_FILE)?;
    let (ranked, out) = rank(&FeatureMatrix::from_tsv(&text)?, cfg)?;
    write_stage(dir, "rank", &config_json(cfg)?, &[digest(FILTERED_FILE, text.as_bytes())], &out)?;
    Ok(ranked)
}

/// Reads `ranking.tsv` against the filtered matrix's columns.
pub fn parse_ranking(text: &str, m: &FeatureMatrix) -> Result<Vec<RankedFeature>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let perr = |message: String| Error::Parse { line: i + 1, message };
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != 3 {
            return Err(perr("ranking rows need: rank feature individual_accuracy".into()));
        }
        let rank = cells[0].parse().map_err(|_| perr(format!("bad rank `{}`", cells[0])))?;
        let column = m
            .column_index(cells[1])
            .ok_or_else(|| perr(format!("feature `{}` not in the filtered matrix", cells[1])))?;
        let individual_accuracy = match cells[2] {
            "NA" => None,
            v => Some(v.parse().map_err(|_| perr(format!("bad accuracy `{v}`")))?),
        };
        out.push(RankedFeature {
            feature: cells[1].to_string(),
            column,
            individual_accuracy,
            rank,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------- train

/// Forward accumulation picks the feature count; the final model is tuned
/// by grid search and fitted on every subject.
pub fn train(filtered: &FeatureMatrix, ranked: &[RankedFeature], cfg: &RunConfig) -> Result<Artifacts> {
    let proto = cfg.protocol();
    let (curve, _) = forward_accumulate(filtered, ranked, cfg.order, cfg.curve_limit, &proto)?;
    let cols: Vec<usize> = ranked[..curve.best_n].iter().map(|r| r.column).collect();
    let sub = filtered.select_columns(&cols);
    let x = Samples::new(sub.values.clone(), sub.ncols())?;
    let y = sub.targets();
    let g = grid_search(&x, &y, &proto.grid, cfg.seed, &proto.smo)?;
    let mut model = fit(&x, &y, g.best.c, g.best.z, &proto.smo)?;
    model.feature_names = sub.columns.clone();
    let mut text = model.to_json()?;
    text.push('\n');
    let mut out = Artifacts::default();
    out.push(MODEL_FILE, text);
    Ok(out)
}

pub fn train_stage(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let filtered_text = read_text(dir, FILTERED_FILE)?;
    let ranking_text = read_text(dir, RANKING_FILE)?;
    let m = FeatureMatrix::from_tsv(&filtered_text)?;
    let ranked = parse_ranking(&ranking_text, &m)?;
    let out = train(&m, &ranked, cfg)?;
    let inputs = [
        digest(FILTERED_FILE, filtered_text.as_bytes()),
        digest(RANKING_FILE, ranking_text.as_bytes()),
    ];
    write_stage(dir, "train", &config_json(cfg)?, &inputs, &out)
}

// ------------------------------------------------------------- evaluate

pub fn evaluate(m: &FeatureMatrix, cfg: &RunConfig) -> Result<(CohortReport, Artifacts)> {
    let m = restrict_tasks(m, &cfg.tasks)?;
    let mut tasks: Vec<u8> = m.columns.iter().filter_map(|c| task_of(c)).collect();
    tasks.sort_unstable();
    tasks.dedup();
    let mut report = evaluate_scheme(&m, &cfg.scheme(), &tasks, &cfg.selection())?;
    if cfg.compare_orders {
        let mut other = cfg.selection();
        other.order = match cfg.order {
            FeatureOrder::Descending => FeatureOrder::Random,
            FeatureOrder::Random => FeatureOrder::Descending,
        };
        let alt = evaluate_scheme(&m, &cfg.scheme(), &tasks, &other)?;
        for (g, a) in report.groups.iter_mut().zip(alt.groups) {
            if let (Some(gm), Some(am)) = (g.metrics.as_mut(), a.metrics) {
                gm.companion = Some(am.curve);
            }
        }
    }
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    let mut out = Artifacts::default();
    out.push(COHORT_REPORT_FILE, text);
    Ok((report, out))
}

pub fn evaluate_stage(cfg: &RunConfig, dir: &Path) -> Result<CohortReport> {
    let text = read_text(dir, FEATURES_FILE)?;
    let (report, out) = evaluate(&FeatureMatrix::from_tsv(&text)?, cfg)?;
    write_stage(dir, "evaluate", &config_json(cfg)?, &[digest(FEATURES_FILE, text.as_bytes())], &out)?;
    Ok(report)
}

// --------------------------------------------------------------- report

/// Comparison table, bar-chart data and accuracy curves from a cohort
/// report.
pub fn report(r: &CohortReport) -> Artifacts {
    let mut cmp = String::from("group\tbaseline\tn_pd\tn_hc\taccuracy\taccuracy_std\tprecision\trecall\tbest_n\tstatus\n");
    let mut bars = String::from("group\taccuracy\taccuracy_std\n");
    let mut curves = String::from("n\tmean_acc\tstd_acc\torder\tcohort\n");
    for g in &r.groups {
        match &g.metrics {
            Some(m) => {
                let _ = writeln!(
                    cmp,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\tevaluated",
                    g.group,
                    g.baseline,
                    g.counts.pd,
                    g.counts.hc,
                    m.accuracy,
                    m.accuracy_std,
                    fmt_opt(m.precision),
                    fmt_opt(m.recall),
                    m.best_n
                );
                let _ = writeln!(bars, "{}\t{}\t{}", g.group, m.accuracy, m.accuracy_std);
                for curve in std::iter::once(&m.curve).chain(&m.companion) {
                    for p in &curve.points {
                        let _ = writeln!(curves, "{}\t{}\t{}\t{}\t{}", p.n, p.mean_accuracy, p.std_accuracy, curve.order, g.group);
                    }
                }
            }
            None => {
                let _ = writeln!(
                    cmp,
                    "{}\t{}\t{}\t{}\tNA\tNA\tNA\tNA\tNA\tskipped",
                    g.group, g.baseline, g.counts.pd, g.counts.hc
                );
            }
        }
    }
    let mut out = Artifacts::default();
    out.push(COMPARISON_FILE, cmp);
    out.push(BARS_FILE, bars);
    out.push(CURVES_FILE, curves);
    out
}

pub fn report_stage(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let text = read_text(dir, COHORT_REPORT_FILE)?;
    let r: CohortReport = serde_json::from_str(&text)?;
    let out = report(&r);
    write_stage(dir, "report", &config_json(cfg)?, &[digest(COHORT_REPORT_FILE, text.as_bytes())], &out)
}

// ------------------------------------------------------------------ all

/// extract → filter → rank → train → evaluate → report, in memory, writing
/// the same artifacts and provenance records as the individual stages.
pub fn run_all(manifest_path: &Path, cfg: &RunConfig, dir: &Path) -> Result<CohortReport> {
    let c = config_json(cfg)?;
    let m = extract(manifest_path, cfg)?;
    let features = m.to_tsv();
    let mut out = Artifacts::default();
    out.push(FEATURES_FILE, features.clone());
    write_stage(dir, "extract", &c, &[dataset_digest(manifest_path)?], &out)?;

    let (filtered, out) = filter(&m, cfg)?;
    write_stage(dir, "filter", &c, &[digest(FEATURES_FILE, features.as_bytes())], &out)?;
    let filtered_text = out.get(FILTERED_FILE).expect("filter writes the reduced matrix").to_vec();

    let (ranked, out) = rank(&filtered, cfg)?;
    write_stage(dir, "rank", &c, &[digest(FILTERED_FILE, &filtered_text)], &out)?;
    let ranking_text = out.get(RANKING_FILE).expect("rank writes the ranking").to_vec();

    let out = train(&filtered, &ranked, cfg)?;
    let inputs = [digest(FILTERED_FILE, &filtered_text), digest(RANKING_FILE, &ranking_text)];
    write_stage(dir, "train", &c, &inputs, &out)?;

    let (cohort, out) = evaluate(&m, cfg)?;
    write_stage(dir, "evaluate", &c, &[digest(FEATURES_FILE, features.as_bytes())], &out)?;
    let report_text = out.get(COHORT_REPORT_FILE).expect("evaluate writes the report").to_vec();

    write_stage(dir, "report", &c, &[digest(COHORT_REPORT_FILE, &report_text)], &report(&cohort))?;
    Ok(cohort)
}

/// Machine-readable failure record.
pub fn error_record(stage: &str, err: &Error) -> String {
    let mut text = serde_json::to_string_pretty(&json!({
        "stage": stage,
        "error": err.kind(),
        "message": err.to_string(),
    }))
    .unwrap_or_else(|_| String::from("{}"));
    text.push('\n');
    text
}
