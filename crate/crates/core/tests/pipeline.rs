use std::fs;
use std::path::{Path, PathBuf};

use inkmark::cohorts::SchemeKind;
use inkmark::features::{FeatureMatrix, RegistryProfile};
use inkmark::pipeline::{self, RunConfig};
use inkmark::synth::{write_dataset, SynthConfig};
use inkmark::Error;

const GOLDEN_FILES: [&str; 5] = [
    pipeline::MW_FILE,
    pipeline::PASS_COUNTS_FILE,
    pipeline::RANKING_FILE,
    pipeline::COMPARISON_FILE,
    pipeline::CURVES_FILE,
];

fn tiny_synth(seed: u64) -> SynthConfig {
    let mut cfg = SynthConfig::sex_effect(seed);
    cfg.cells.iter_mut().for_each(|c| c.count = 3);
    cfg
}

fn tiny_run() -> RunConfig {
    RunConfig {
        tasks: vec![1],
        scheme: SchemeKind::Sex,
        folds: 3,
        repetitions: 2,
        profile: RegistryProfile::Compact,
        rank_limit: Some(3),
        curve_limit: Some(2),
        seed: 3,
        c_values: vec![0.1, 10.0],
        z_values: vec![0.5, 2.0],
        ..RunConfig::default()
    }
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().unwrap().is_file())
        .map(|e| {
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn staged(manifest: &Path, cfg: &RunConfig, dir: &Path) {
    pipeline::extract_stage(manifest, cfg, dir).unwrap();
    pipeline::filter_stage(cfg, dir).unwrap();
    pipeline::rank_stage(cfg, dir).unwrap();
    pipeline::train_stage(cfg, dir).unwrap();
    pipeline::evaluate_stage(cfg, dir).unwrap();
    pipeline::report_stage(cfg, dir).unwrap();
}

#[test]
fn stages_reproduce_the_in_process_run() {
    let base = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&tiny_synth(1), &base.path().join("data")).unwrap();
    let cfg = tiny_run();
    let (a, b) = (base.path().join("staged"), base.path().join("all"));
    fs::create_dir_all(&a).unwrap();
    fs::create_dir_all(&b).unwrap();
    staged(&manifest, &cfg, &a);
    let report = pipeline::run_all(&manifest, &cfg, &b).unwrap();
    let (la, lb) = (listing(&a), listing(&b));
    let names: Vec<&str> = la.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, lb.iter().map(|f| f.0.as_str()).collect::<Vec<_>>());
    for ((name, x), (_, y)) in la.iter().zip(&lb) {
        assert!(x == y, "{name} differs between staged and in-process runs");
    }
    for expected in ["model.json", "provenance_train.json", "bars.tsv"] {
        assert!(names.contains(&expected), "missing {expected}");
    }
    let groups: Vec<&str> = report.groups.iter().map(|g| g.group.as_str()).collect();
    assert_eq!(groups, ["Combined", "Male", "Female"]);
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[test]
fn tiny_run_matches_golden_files() {
    let base = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&tiny_synth(1), &base.path().join("data")).unwrap();
    let out = base.path().join("out");
    fs::create_dir_all(&out).unwrap();
    pipeline::run_all(&manifest, &tiny_run(), &out).unwrap();
    let update = std::env::var_os("UPDATE_GOLDEN").is_some_and(|v| v == "1");
    if update {
        fs::create_dir_all(golden_dir()).unwrap();
    }
    for name in GOLDEN_FILES {
        let got = fs::read_to_string(out.join(name)).unwrap();
        let path = golden_dir().join(name);
        if update {
            fs::write(&path, &got).unwrap();
            continue;
        }
        let want = fs::read_to_string(&path)
            .unwrap_or_else(|_| panic!("missing {}; rerun with UPDATE_GOLDEN=1", path.display()));
        assert_eq!(got, want, "{name} drifted from its golden copy");
    }
}

#[test]
fn synthetic_datasets_are_byte_deterministic() {
    let base = tempfile::tempdir().unwrap();
    let a = write_dataset(&tiny_synth(9), &base.path().join("a")).unwrap();
    let b = write_dataset(&tiny_synth(9), &base.path().join("b")).unwrap();
    let c = write_dataset(&tiny_synth(10), &base.path().join("c")).unwrap();
    let (la, lb) = (listing(a.parent().unwrap()), listing(b.parent().unwrap()));
    assert_eq!(la, lb);
    assert!(listing(&a.parent().unwrap().join("recordings")) == listing(&b.parent().unwrap().join("recordings")));
    assert!(listing(&a.parent().unwrap().join("recordings")) != listing(&c.parent().unwrap().join("recordings")));
    assert_eq!(
        pipeline::dataset_digest(&a).unwrap(),
        pipeline::dataset_digest(&b).unwrap()
    );
}

#[test]
fn feature_table_round_trips() {
    let base = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&tiny_synth(2), &base.path().join("data")).unwrap();
    let m = pipeline::extract(&manifest, &tiny_run()).unwrap();
    let back = FeatureMatrix::from_tsv(&m.to_tsv()).unwrap();
    assert_eq!(back.columns, m.columns);
    assert_eq!(back.subjects.len(), m.subjects.len());
    assert_eq!(back.to_tsv(), m.to_tsv());
}

#[test]
fn stage_without_inputs_reports_a_typed_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = pipeline::filter_stage(&tiny_run(), dir.path()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err}");
    let record: serde_json::Value = serde_json::from_str(&pipeline::error_record("filter", &err)).unwrap();
    assert_eq!(record["stage"], "filter");
    assert_eq!(record["error"], "io");
}

#[test]
fn unknown_task_is_rejected() {
    let base = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&tiny_synth(2), &base.path().join("data")).unwrap();
    let m = pipeline::extract(&manifest, &tiny_run()).unwrap();
    assert!(pipeline::restrict_tasks(&m, &[5]).is_err());
}
