//! Monolingual and multilingual experiment grids, provenance shift and the
//! hypothesis tests run over a grid.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use super::stats::{anova_oneway, normality_variance_checks, student_ttest, welch_ttest, AnovaResult, Diagnostics, MeanStd, TTestResult};
use super::{evaluate_detector, Detector};
use crate::error::{Error, Result};
use crate::generation::Dataset;
use crate::record::{SnippetRecord, Target};
use crate::sampling::{derive_seed, split_train_test, SplitMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    Monolingual,
    Multilingual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub mode: GridMode,
    pub split_ratio: f64,
    pub split_mode: SplitMode,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            mode: GridMode::Monolingual,
            split_ratio: 0.8,
            split_mode: SplitMode::RandomStratified,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    /// Tested language.
    pub dst: String,
    /// Provenance language; `None` for the multilingual model.
    pub src: Option<String>,
    pub n_train: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingCell {
    pub dst: String,
    pub src: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub mode: GridMode,
    pub cells: Vec<GridCell>,
    pub missing: Vec<MissingCell>,
    /// Accuracy mean and population std over each provenance's cells.
    pub per_provenance: BTreeMap<String, MeanStd>,
    /// Accuracy mean and population std over each tested language's cells.
    pub per_language: BTreeMap<String, MeanStd>,
    /// Accuracy mean and population std over all cells.
    pub overall: Option<MeanStd>,
}

impl ExperimentGrid {
    pub fn from_cells(mode: GridMode, mut cells: Vec<GridCell>, missing: Vec<MissingCell>) -> Self {
        cells.sort_by(|a, b| (&a.dst, &a.src).cmp(&(&b.dst, &b.src)));
        let acc = |c: &GridCell| c.metrics.accuracy;
        let mut by_src: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut by_dst: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for c in &cells {
            if let Some(s) = &c.src {
                by_src.entry(s.clone()).or_default().push(acc(c));
            }
            by_dst.entry(c.dst.clone()).or_default().push(acc(c));
        }
        let all: Vec<f64> = cells.iter().map(acc).collect();
        Self {
            mode,
            per_provenance: by_src.into_iter().map(|(k, v)| (k, MeanStd::population(&v).expect("non-empty"))).collect(),
            per_language: by_dst.into_iter().map(|(k, v)| (k, MeanStd::population(&v).expect("non-empty"))).collect(),
            overall: MeanStd::population(&all),
            cells,
            missing,
        }
    }

    pub fn cell(&self, dst: &str, src: Option<&str>) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.dst == dst && c.src.as_deref() == src)
    }

    /// Population mean/std of an arbitrary per-cell metric over all cells
    /// where it is defined.
    pub fn marginal(&self, metric: impl Fn(&Metrics) -> Option<f64>) -> Option<MeanStd> {
        let v: Vec<f64> = self.cells.iter().filter_map(|c| metric(&c.metrics)).collect();
        MeanStd::population(&v)
    }

    pub fn languages(&self) -> BTreeSet<String> {
        self.cells.iter().map(|c| c.dst.clone()).chain(self.missing.iter().map(|m| m.dst.clone())).collect()
    }
}

/// A trained cell kept for follow-up evaluation.
pub struct CellRun {
    pub dst: String,
    pub src: Option<String>,
    pub test: Vec<SnippetRecord>,
    pub detector: Arc<dyn Detector>,
}

pub struct GridRun {
    pub grid: ExperimentGrid,
    pub runs: Vec<CellRun>,
}

impl GridRun {
    pub fn run(&self, dst: &str, src: Option<&str>) -> Option<&CellRun> {
        self.runs.iter().find(|r| r.dst == dst && r.src.as_deref() == src)
    }
}

/// Trains a detector on a training split.
pub type TrainFn<'a> = dyn Fn(&[SnippetRecord]) -> Result<Arc<dyn Detector>> + 'a;

fn has_both_classes(records: &[SnippetRecord]) -> bool {
    records.iter().any(|r| r.target == Target::Ai) && records.iter().any(|r| r.target == Target::Human)
}

/// Monolingual mode trains one detector per sub-dataset and tests it on
/// that sub-dataset's held-out split. Multilingual mode trains one detector
/// on the whole dataset and tests it per language. Cells without enough
/// data are listed as missing; training errors abort the grid.
pub fn run_grid(dataset: &Dataset, cfg: &GridConfig, train_fn: &TrainFn) -> Result<GridRun> {
    let mut cells = Vec::new();
    let mut missing = Vec::new();
    let mut runs = Vec::new();
    match cfg.mode {
        GridMode::Monolingual => {
            let subsets = dataset.subdatasets()?;
            let langs = dataset.languages();
            let present: BTreeSet<(String, String)> = subsets.iter().map(|s| (s.id.dst.clone(), s.id.src.clone())).collect();
            for dst in &langs {
                for src in &langs {
                    if dst != src && !present.contains(&(dst.clone(), src.clone())) {
                        missing.push(MissingCell {
                            dst: dst.clone(),
                            src: Some(src.clone()),
                            reason: "no sub-dataset".into(),
                        });
                    }
                }
            }
            for sd in subsets {
                let label = sd.id.label();
                let split = match split_train_test(&sd.records, cfg.split_ratio, cfg.split_mode, derive_seed(cfg.seed, &format!("split/{label}"))) {
                    Ok(s) if has_both_classes(&s.train) && !s.test.is_empty() => s,
                    Ok(_) => {
                        missing.push(MissingCell {
                            dst: sd.id.dst.clone(),
                            src: Some(sd.id.src.clone()),
                            reason: "training split lacks one class".into(),
                        });
                        continue;
                    }
                    Err(e) => {
                        warn!("{label}: {e}");
                        missing.push(MissingCell {
                            dst: sd.id.dst.clone(),
                            src: Some(sd.id.src.clone()),
                            reason: e.to_string(),
                        });
                        continue;
                    }
                };
                info!("{label}: training on {} records, testing on {}", split.train.len(), split.test.len());
                let detector = train_fn(&split.train)?;
                let metrics = evaluate_detector(detector.as_ref(), &split.test)?;
                info!("{label}: accuracy {:.4}", metrics.accuracy);
                cells.push(GridCell {
                    dst: sd.id.dst.clone(),
                    src: Some(sd.id.src.clone()),
                    n_train: split.train.len(),
                    metrics,
                });
                runs.push(CellRun {
                    dst: sd.id.dst,
                    src: Some(sd.id.src),
                    test: split.test,
                    detector,
                });
            }
        }
        GridMode::Multilingual => {
            let split = split_train_test(&dataset.records, cfg.split_ratio, cfg.split_mode, derive_seed(cfg.seed, "split/multilingual"))?;
            if !has_both_classes(&split.train) {
                return Err(Error::InsufficientRecords {
                    class: "multilingual training split".into(),
                    needed: 1,
                    available: 0,
                });
            }
            info!("multilingual: training on {} records", split.train.len());
            let detector = train_fn(&split.train)?;
            for lang in dataset.languages() {
                let test: Vec<SnippetRecord> = split.test.iter().filter(|r| r.language_name == lang).cloned().collect();
                if test.is_empty() {
                    missing.push(MissingCell {
                        dst: lang,
                        src: None,
                        reason: "no test records".into(),
                    });
                    continue;
                }
                let metrics = evaluate_detector(detector.as_ref(), &test)?;
                info!("multilingual on {lang}: accuracy {:.4}", metrics.accuracy);
                cells.push(GridCell {
                    dst: lang.clone(),
                    src: None,
                    n_train: split.train.len(),
                    metrics,
                });
                runs.push(CellRun {
                    dst: lang,
                    src: None,
                    test,
                    detector: detector.clone(),
                });
            }
        }
    }
    Ok(GridRun {
        grid: ExperimentGrid::from_cells(cfg.mode, cells, missing),
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub dst: String,
    /// Accuracy of the best-provenance model on its own test split.
    pub in_distribution: f64,
    /// Mean accuracy of the same model over the other provenances' test splits.
    pub out_distribution: f64,
    pub gap: f64,
    pub n_out_sets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceShift {
    pub best_provenance: String,
    pub rows: Vec<ShiftRow>,
    pub mean_gap: Option<f64>,
    /// Welch test oriented as mean(in) - mean(out).
    pub test: Option<TTestResult>,
    pub flag: Option<String>,
}

/// Accuracy of the model trained on (dst, model_src) on the test split of
/// (dst, test_src).
pub fn cross_provenance_accuracy(run: &GridRun, dst: &str, model_src: &str, test_src: &str) -> Result<Option<f64>> {
    let (Some(model), Some(test)) = (run.run(dst, Some(model_src)), run.run(dst, Some(test_src))) else {
        return Ok(None);
    };
    Ok(Some(evaluate_detector(model.detector.as_ref(), &test.test)?.accuracy))
}

/// Picks the provenance with the best mean accuracy and measures how its
/// models fare on test data translated from the other provenances.
pub fn provenance_shift(run: &GridRun) -> Result<ProvenanceShift> {
    if run.grid.mode != GridMode::Monolingual {
        return Err(Error::InvalidArgument("provenance shift needs a monolingual grid".into()));
    }
    let best = run
        .grid
        .per_provenance
        .iter()
        .max_by(|a, b| a.1.mean.total_cmp(&b.1.mean).then_with(|| b.0.cmp(a.0)))
        .map(|(k, _)| k.clone())
        .ok_or_else(|| Error::InvalidArgument("grid has no monolingual cells".into()))?;
    let mut rows = Vec::new();
    for dst in run.grid.per_language.keys() {
        let Some(cell) = run.grid.cell(dst, Some(&best)) else {
            continue;
        };
        let mut outs = Vec::new();
        for other in run.grid.per_provenance.keys() {
            if other == &best || other == dst {
                continue;
            }
            if let Some(a) = cross_provenance_accuracy(run, dst, &best, other)? {
                outs.push(a);
            }
        }
        if outs.is_empty() {
            continue;
        }
        let out = outs.iter().sum::<f64>() / outs.len() as f64;
        rows.push(ShiftRow {
            dst: dst.clone(),
            in_distribution: cell.metrics.accuracy,
            out_distribution: out,
            gap: out - cell.metrics.accuracy,
            n_out_sets: outs.len(),
        });
    }
    let mean_gap = (!rows.is_empty()).then(|| rows.iter().map(|r| r.gap).sum::<f64>() / rows.len() as f64);
    let ins: Vec<f64> = rows.iter().map(|r| r.in_distribution).collect();
    let outs: Vec<f64> = rows.iter().map(|r| r.out_distribution).collect();
    let (test, flag) = match welch_ttest(&ins, &outs, 0.05) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(format!("t-test skipped: {e}"))),
    };
    Ok(ProvenanceShift {
        best_provenance: best,
        rows,
        mean_gap,
        test,
        flag,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisTests {
    /// Groups: tested languages, values: accuracies across provenances.
    pub language_anova: Option<AnovaResult>,
    /// Groups: provenances, values: accuracies across tested languages.
    pub provenance_anova: Option<AnovaResult>,
    /// Pooled t-test, monolingual cell accuracies vs multilingual
    /// per-language accuracies.
    pub multilingual_comparison: Option<TTestResult>,
    pub language_diagnostics: Diagnostics,
    pub provenance_diagnostics: Diagnostics,
    pub flags: Vec<String>,
}

pub fn hypothesis_tests(mono: &ExperimentGrid, multi: Option<&ExperimentGrid>) -> HypothesisTests {
    let mut flags = Vec::new();
    let mut by_dst: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut by_src: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for c in &mono.cells {
        by_dst.entry(&c.dst).or_default().push(c.metrics.accuracy);
        if let Some(s) = &c.src {
            by_src.entry(s).or_default().push(c.metrics.accuracy);
        }
    }
    let lang_groups: Vec<&[f64]> = by_dst.values().map(Vec::as_slice).collect();
    let prov_groups: Vec<&[f64]> = by_src.values().map(Vec::as_slice).collect();
    let mut anova = |name: &str, groups: &[&[f64]]| match anova_oneway(groups) {
        Ok(r) => Some(r),
        Err(e) => {
            flags.push(format!("{name} ANOVA skipped: {e}"));
            None
        }
    };
    let language_anova = anova("language", &lang_groups);
    let provenance_anova = anova("provenance", &prov_groups);
    let multilingual_comparison = multi.and_then(|m| {
        let mono_acc: Vec<f64> = mono.cells.iter().map(|c| c.metrics.accuracy).collect();
        let multi_acc: Vec<f64> = m.cells.iter().map(|c| c.metrics.accuracy).collect();
        match student_ttest(&mono_acc, &multi_acc, 0.05) {
            Ok(t) => Some(t),
            Err(e) => {
                flags.push(format!("multilingual comparison skipped: {e}"));
                None
            }
        }
    });
    HypothesisTests {
        language_anova,
        provenance_anova,
        multilingual_comparison,
        language_diagnostics: normality_variance_checks(&lang_groups),
        provenance_diagnostics: normality_variance_checks(&prov_groups),
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(acc: f64) -> Metrics {
        Metrics {
            n: 10,
            tp: 0,
            tn: 0,
            fp: 0,
            fn_: 0,
            accuracy: acc,
            f1_ai: acc,
            f1_macro: acc,
            auc: None,
        }
    }

    #[test]
    fn two_language_marginals_equal_cells() {
        let cells = vec![
            GridCell {
                dst: "Go".into(),
                src: Some("Rust".into()),
                n_train: 8,
                metrics: metrics(0.9),
            },
            GridCell {
                dst: "Rust".into(),
                src: Some("Go".into()),
                n_train: 8,
                metrics: metrics(0.7),
            },
        ];
        let g = ExperimentGrid::from_cells(GridMode::Monolingual, cells, vec![]);
        assert_eq!(g.per_language["Go"].mean, 0.9);
        assert_eq!(g.per_language["Rust"].std, 0.0);
        assert_eq!(g.per_provenance["Go"].mean, 0.7);
        assert!((g.overall.unwrap().mean - 0.8).abs() < 1e-15);
    }
}
