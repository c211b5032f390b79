//! Metrics, statistics, experiment grids and report tables.

pub mod grid;
pub mod metrics;
pub mod report;
pub mod stats;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::BaselineModel;
use crate::classifier::{ModelCheckpoint, Prediction};
use crate::error::{Error, Result};
use crate::generation::Dataset;
use crate::record::{SnippetRecord, Target};

pub use grid::{hypothesis_tests, provenance_shift, run_grid, ExperimentGrid, GridConfig, GridMode, GridRun, HypothesisTests, ProvenanceShift};
pub use metrics::{auc, compute_metrics, metrics_from_scores, Metrics};
pub use stats::{anova_oneway, normality_variance_checks, welch_ttest, AnovaResult, MeanStd, TTestResult};

/// Anything that labels a code snippet.
pub trait Detector: Send + Sync {
    fn predict(&self, code: &str) -> Result<Prediction>;
}

impl Detector for ModelCheckpoint {
    fn predict(&self, code: &str) -> Result<Prediction> {
        ModelCheckpoint::predict(self, code)
    }
}

impl Detector for BaselineModel {
    fn predict(&self, code: &str) -> Result<Prediction> {
        Ok(Prediction::from_prob(self.prob_ai(code)))
    }
}

/// Predicts every record and scores the predictions against the labels.
pub fn evaluate_detector(detector: &dyn Detector, records: &[SnippetRecord]) -> Result<Metrics> {
    let preds: Vec<Prediction> = records
        .par_iter()
        .map(|r| detector.predict(&r.code))
        .collect::<Result<_>>()?;
    let labels: Vec<Target> = records.iter().map(|r| r.target).collect();
    compute_metrics(&preds, &labels)
}

/// Scores a trained detector on a dataset from elsewhere, without any
/// further training.
pub fn external_dataset_eval(detector: &dyn Detector, external: &Dataset) -> Result<Metrics> {
    for (i, r) in external.records.iter().enumerate() {
        if r.code.trim().is_empty() || r.language_name.trim().is_empty() {
            return Err(Error::InvalidArgument(format!(
                "external record {} does not match the record schema (empty code or language)",
                i + 1
            )));
        }
    }
    evaluate_detector(detector, &external.records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthRow {
    pub language: String,
    pub all: MeanStd,
    pub ai: Option<MeanStd>,
    pub human: Option<MeanStd>,
    /// Welch test oriented as mean(human) - mean(ai).
    pub test: Option<TTestResult>,
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub rows: Vec<LengthRow>,
}

/// Snippet length in characters per language, for all, AI and human
/// snippets (sample standard deviation), with a Welch test between groups.
pub fn length_stats(dataset: &Dataset) -> Result<LengthStats> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("length statistics need a non-empty dataset".into()));
    }
    let mut by_lang: BTreeMap<&str, [Vec<f64>; 2]> = BTreeMap::new();
    for r in &dataset.records {
        by_lang.entry(&r.language_name).or_default()[r.target.index()].push(r.code.chars().count() as f64);
    }
    let rows = by_lang
        .into_iter()
        .map(|(lang, [human, ai])| {
            let all: Vec<f64> = human.iter().chain(&ai).copied().collect();
            let (test, flag) = match welch_ttest(&human, &ai, 0.05) {
                Ok(t) => (Some(t), None),
                Err(e) => (None, Some(format!("t-test skipped: {e}"))),
            };
            LengthRow {
                language: lang.to_string(),
                all: MeanStd::sample(&all).expect("non-empty"),
                ai: MeanStd::sample(&ai),
                human: MeanStd::sample(&human),
                test,
                flag,
            }
        })
        .collect();
    Ok(LengthStats { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(lang: &str, code: &str, target: Target) -> SnippetRecord {
        SnippetRecord {
            task_name: "t".into(),
            task_url: String::new(),
            task_description: String::new(),
            language_name: lang.into(),
            code: code.into(),
            target,
            set: format!("{lang}_from_Go"),
        }
    }

    #[test]
    fn length_means_match_hand_arithmetic() {
        let ds = Dataset {
            records: vec![
                rec("C", "abcd", Target::Human),
                rec("C", "abcdef", Target::Human),
                rec("C", "ab", Target::Human),
                rec("C", "a", Target::Ai),
                rec("C", "abc", Target::Ai),
                rec("C", "abcde", Target::Ai),
            ],
        };
        let s = length_stats(&ds).unwrap();
        let row = &s.rows[0];
        assert_eq!(row.all.mean, 21.0 / 6.0);
        assert_eq!(row.human.unwrap().mean, 4.0);
        assert_eq!(row.ai.unwrap().mean, 3.0);
        assert_eq!(row.human.unwrap().std, 2.0);
        let t = row.test.as_ref().unwrap();
        assert!((t.mean_diff - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_snippets_have_zero_std_and_flag() {
        let ds = Dataset {
            records: vec![rec("Go", "x := 1", Target::Human), rec("Go", "x := 1", Target::Human)],
        };
        let s = length_stats(&ds).unwrap();
        assert_eq!(s.rows[0].all.std, 0.0);
        assert!(s.rows[0].ai.is_none());
        assert!(s.rows[0].flag.is_some());
    }

    struct Marker;
    impl Detector for Marker {
        fn predict(&self, code: &str) -> Result<Prediction> {
            Ok(Prediction::from_prob(if code.contains("AI") { 0.9 } else { 0.1 }))
        }
    }

    #[test]
    fn external_eval_counts_by_hand() {
        let ds = Dataset {
            records: vec![
                rec("Python", "AI code", Target::Ai),
                rec("Python", "plain", Target::Human),
                rec("Python", "plain too", Target::Ai),
                rec("Python", "AI again", Target::Human),
            ],
        };
        let m = external_dataset_eval(&Marker, &ds).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!((m.tp, m.tn, m.fp, m.fn_), (1, 1, 1, 1));
        let bad = Dataset {
            records: vec![rec("Python", "  ", Target::Ai)],
        };
        assert!(external_dataset_eval(&Marker, &bad).is_err());
    }
}
