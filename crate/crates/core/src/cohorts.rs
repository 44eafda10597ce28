//! Sex/age cohort partitioning and per-group evaluation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::ink::{Label, Sex, SubjectMeta};
use crate::ranksum::filter_features;
use crate::selection::{run_selection, AccuracyCurve, SelectionConfig};

pub const DEFAULT_AGE_THRESHOLD: u32 = 65;
pub const COMBINED: &str = "Combined";

/// Groups reported in the pass-count table, in column order.
pub const PASS_COUNT_GROUPS: [&str; 9] = [
    "Combined",
    "Male",
    "Female",
    "Old",
    "Young",
    "YoungMale",
    "OldMale",
    "YoungFemale",
    "OldFemale",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Combined,
    Sex,
    Age,
    SexAge,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Combined => "combined",
            SchemeKind::Sex => "sex",
            SchemeKind::Age => "age",
            SchemeKind::SexAge => "sexage",
        })
    }
}

impl FromStr for SchemeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "combined" => Ok(SchemeKind::Combined),
            "sex" => Ok(SchemeKind::Sex),
            "age" => Ok(SchemeKind::Age),
            "sexage" => Ok(SchemeKind::SexAge),
            _ => Err(format!("unknown scheme `{s}` (expected combined, sex, age or sexage)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortScheme {
    pub kind: SchemeKind,
    pub age_threshold: u32,
}

impl CohortScheme {
    pub fn new(kind: SchemeKind) -> Self {
        CohortScheme {
            kind,
            age_threshold: DEFAULT_AGE_THRESHOLD,
        }
    }

    /// Group names in report order.
    pub fn groups(&self) -> &'static [&'static str] {
        match self.kind {
            SchemeKind::Combined => &["Combined"],
            SchemeKind::Sex => &["Male", "Female"],
            SchemeKind::Age => &["Young", "Old"],
            SchemeKind::SexAge => &["YoungMale", "OldMale", "YoungFemale", "OldFemale"],
        }
    }

    pub fn group_of(&self, s: &SubjectMeta) -> &'static str {
        let old = s.age >= self.age_threshold;
        match (self.kind, s.sex, old) {
            (SchemeKind::Combined, _, _) => "Combined",
            (SchemeKind::Sex, Sex::Male, _) => "Male",
            (SchemeKind::Sex, Sex::Female, _) => "Female",
            (SchemeKind::Age, _, false) => "Young",
            (SchemeKind::Age, _, true) => "Old",
            (SchemeKind::SexAge, Sex::Male, false) => "YoungMale",
            (SchemeKind::SexAge, Sex::Male, true) => "OldMale",
            (SchemeKind::SexAge, Sex::Female, false) => "YoungFemale",
            (SchemeKind::SexAge, Sex::Female, true) => "OldFemale",
        }
    }
}

/// Row indices per group, in report order. Every subject lands in exactly
/// one group.
pub fn partition(subjects: &[SubjectMeta], scheme: &CohortScheme) -> Vec<(&'static str, Vec<usize>)> {
    scheme
        .groups()
        .iter()
        .map(|&g| {
            let rows = (0..subjects.len()).filter(|&i| scheme.group_of(&subjects[i]) == g).collect();
            (g, rows)
        })
        .collect()
}

/// Rows of a named group under any scheme (`Combined` selects everything).
pub fn group_rows(subjects: &[SubjectMeta], group: &str, age_threshold: u32) -> Result<Vec<usize>> {
    for kind in [SchemeKind::Combined, SchemeKind::Sex, SchemeKind::Age, SchemeKind::SexAge] {
        let scheme = CohortScheme { kind, age_threshold };
        if scheme.groups().contains(&group) {
            return Ok((0..subjects.len()).filter(|&i| scheme.group_of(&subjects[i]) == group).collect());
        }
    }
    Err(Error::InvalidArgument(format!("unknown cohort group `{group}`")))
}

/// Per-group seed: the base seed mixed with a digest of the group name, so
/// results do not depend on evaluation order.
pub fn group_seed(base: u64, group: &str) -> u64 {
    let digest = Sha256::digest(group.as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    base ^ u64::from_le_bytes(head)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub pd: usize,
    pub hc: usize,
}

impl LabelCounts {
    fn of(subjects: &[SubjectMeta], rows: &[usize]) -> Self {
        let pd = rows.iter().filter(|&&r| subjects[r].label == Label::Pd).count();
        LabelCounts {
            pd,
            hc: rows.len() - pd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub accuracy: f64,
    pub accuracy_std: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub best_n: usize,
    pub selected: Vec<String>,
    pub candidates: usize,
    pub curve: AccuracyCurve,
    /// Curve under the other feature order, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub companion: Option<AccuracyCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: String,
    /// Combined row added next to a non-combined scheme.
    pub baseline: bool,
    pub counts: LabelCounts,
    pub metrics: Option<GroupMetrics>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub scheme: SchemeKind,
    pub age_threshold: u32,
    pub tasks: Vec<u8>,
    pub groups: Vec<GroupReport>,
}

impl CohortReport {
    pub fn group(&self, name: &str) -> Option<&GroupReport> {
        self.groups.iter().find(|g| g.group == name)
    }

    pub fn accuracy(&self, name: &str) -> Option<f64> {
        self.group(name)?.metrics.as_ref().map(|m| m.accuracy)
    }
}

/// Group submatrix with imputation refreshed from the group's own rows.
pub fn group_matrix(m: &FeatureMatrix, rows: &[usize]) -> FeatureMatrix {
    let mut sub = m.select_rows(rows);
    let all: Vec<usize> = (0..sub.nrows()).collect();
    sub.impute_from_rows(&all);
    sub
}

fn evaluate_group(m: &FeatureMatrix, group: &str, rows: &[usize], baseline: bool, cfg: &SelectionConfig) -> Result<GroupReport> {
    let counts = LabelCounts::of(&m.subjects, rows);
    let mut report = GroupReport {
        group: group.to_string(),
        baseline,
        counts,
        metrics: None,
        skipped: None,
    };
    if counts.pd < 2 || counts.hc < 2 {
        let why = format!("class imbalance: {} PD / {} HC (need ≥ 2 each)", counts.pd, counts.hc);
        log::warn!("skipping cohort {group}: {why}");
        report.skipped = Some(why);
        return Ok(report);
    }
    let mut local = cfg.clone();
    local.protocol.seed = group_seed(cfg.protocol.seed, group);
    let sel = run_selection(&group_matrix(m, rows), &local).map_err(|e| Error::Cohort {
        cohort: group.to_string(),
        message: e.to_string(),
    })?;
    let o = &sel.outcome;
    report.metrics = Some(GroupMetrics {
        accuracy: o.mean_accuracy,
        accuracy_std: o.std_accuracy,
        precision: o.metrics.precision,
        recall: o.metrics.recall,
        best_n: sel.curve.best_n,
        selected: sel.selected,
        candidates: sel.candidates.len(),
        curve: sel.curve,
        companion: None,
    });
    Ok(report)
}

/// Runs the selection pipeline on every group of `scheme` (plus the
/// Combined baseline for non-combined schemes).
pub fn evaluate_scheme(m: &FeatureMatrix, scheme: &CohortScheme, tasks: &[u8], cfg: &SelectionConfig) -> Result<CohortReport> {
    let mut jobs: Vec<(&str, Vec<usize>, bool)> = partition(&m.subjects, scheme)
        .into_iter()
        .map(|(g, rows)| (g, rows, false))
        .collect();
    if scheme.kind != SchemeKind::Combined {
        jobs.insert(0, (COMBINED, (0..m.nrows()).collect(), true));
    }
    let groups = jobs
        .par_iter()
        .map(|(g, rows, baseline)| evaluate_group(m, g, rows, *baseline, cfg))
        .collect::<Result<Vec<_>>>()?;
    if groups.iter().filter(|g| !g.baseline).all(|g| g.metrics.is_none()) {
        return Err(Error::Cohort {
            cohort: scheme.kind.to_string(),
            message: "no group has both labels with at least 2 subjects".into(),
        });
    }
    Ok(CohortReport {
        scheme: scheme.kind,
        age_threshold: scheme.age_threshold,
        tasks: tasks.to_vec(),
        groups,
    })
}

/// Features passing the rank-sum filter per task and cohort group; `None`
/// where a group lacks one of the labels.
pub fn pass_count_table(m: &FeatureMatrix, alpha: f64, age_threshold: u32) -> Result<BTreeMap<u8, Vec<Option<usize>>>> {
    let mut table: BTreeMap<u8, Vec<Option<usize>>> = BTreeMap::new();
    let per_group = PASS_COUNT_GROUPS
        .par_iter()
        .map(|g| {
            let rows = group_rows(&m.subjects, g, age_threshold)?;
            let c = LabelCounts::of(&m.subjects, &rows);
            if c.pd == 0 || c.hc == 0 {
                return Ok(None);
            }
            let sub = group_matrix(m, &rows);
            Ok(Some(filter_features(&sub, alpha)?.pass_counts(&sub.columns)))
        })
        .collect::<Result<Vec<_>>>()?;
    for (gi, counts) in per_group.iter().enumerate() {
        let tasks: Vec<u8> = match counts {
            Some(c) => c.keys().copied().collect(),
            None => Vec::new(),
        };
        for t in tasks {
            table.entry(t).or_insert_with(|| vec![None; PASS_COUNT_GROUPS.len()]);
        }
        for (t, row) in table.iter_mut() {
            row[gi] = counts.as_ref().map(|c| c.get(t).copied().unwrap_or(0));
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subj(id: &str, age: u32, sex: Sex, label: Label) -> SubjectMeta {
        SubjectMeta::new(id, age, sex, label).unwrap()
    }

    #[test]
    fn group_assignment() {
        let s = subj("a", 70, Sex::Female, Label::Pd);
        assert_eq!(CohortScheme::new(SchemeKind::SexAge).group_of(&s), "OldFemale");
        let edge = subj("b", 65, Sex::Male, Label::Hc);
        assert_eq!(CohortScheme::new(SchemeKind::Age).group_of(&edge), "Old");
        let young = subj("c", 64, Sex::Male, Label::Hc);
        assert_eq!(CohortScheme::new(SchemeKind::Age).group_of(&young), "Young");
    }

    #[test]
    fn partition_is_total_and_exclusive() {
        let subjects: Vec<SubjectMeta> = (0..40)
            .map(|i| {
                let sex = if i % 3 == 0 { Sex::Female } else { Sex::Male };
                let label = if i % 2 == 0 { Label::Pd } else { Label::Hc };
                subj(&format!("s{i}"), 50 + i, sex, label)
            })
            .collect();
        for kind in [SchemeKind::Combined, SchemeKind::Sex, SchemeKind::Age, SchemeKind::SexAge] {
            let parts = partition(&subjects, &CohortScheme::new(kind));
            let mut all: Vec<usize> = parts.iter().flat_map(|p| p.1.clone()).collect();
            all.sort_unstable();
            assert_eq!(all, (0..40).collect::<Vec<_>>());
        }
        let sex = partition(&subjects, &CohortScheme::new(SchemeKind::Sex));
        let shifted = CohortScheme {
            kind: SchemeKind::Sex,
            age_threshold: 80,
        };
        assert_eq!(sex, partition(&subjects, &shifted));
    }

    #[test]
    fn seeds_depend_on_name_only() {
        assert_eq!(group_seed(7, "Female"), group_seed(7, "Female"));
        assert_ne!(group_seed(7, "Female"), group_seed(7, "Male"));
    }

    #[test]
    fn scheme_names_round_trip() {
        for k in [SchemeKind::Combined, SchemeKind::Sex, SchemeKind::Age, SchemeKind::SexAge] {
            assert_eq!(k.to_string().parse::<SchemeKind>().unwrap(), k);
        }
        assert!("other".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn undersized_group_is_skipped() {
        let mut subjects = Vec::new();
        let mut raw = Vec::new();
        for i in 0..26 {
            let (sex, label) = match i {
                0..10 => (Sex::Male, Label::Pd),
                10..20 => (Sex::Male, Label::Hc),
                20 => (Sex::Female, Label::Pd),
                _ => (Sex::Female, Label::Hc),
            };
            subjects.push(subj(&format!("s{i:02}"), 60, sex, label));
            let shift = if label == Label::Pd { 2.0 } else { -2.0 };
            raw.push(vec![Some(shift + 0.1 * (i % 5) as f64)]);
        }
        let m = FeatureMatrix::from_raw(vec!["t1_x".into()], subjects, raw).unwrap();
        let cfg = SelectionConfig {
            protocol: crate::selection::ProtocolConfig {
                repetitions: 2,
                grid: crate::svm::GridSpec {
                    c_values: vec![1.0],
                    z_values: vec![1.0],
                    folds: 3,
                },
                ..Default::default()
            },
            ..Default::default()
        };
        let r = evaluate_scheme(&m, &CohortScheme::new(SchemeKind::Sex), &[1], &cfg).unwrap();
        let female = r.group("Female").unwrap();
        assert!(female.metrics.is_none() && female.skipped.is_some());
        assert_eq!((female.counts.pd, female.counts.hc), (1, 5));
        assert!(r.accuracy("Male").is_some());
        assert!(r.group(COMBINED).unwrap().baseline);
    }
}
