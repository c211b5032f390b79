//! Plain-text and line-delimited JSON renderings of evaluation results.
//! Accuracies are stored as fractions and printed as percentages with one
//! decimal.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::grid::{ExperimentGrid, GridCell, GridMode, HypothesisTests, ProvenanceShift};
use super::metrics::Metrics;
use super::stats::{AnovaResult, MeanStd, TTestResult};
use super::LengthStats;

pub fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

pub fn pct_pm(m: &MeanStd) -> String {
    format!("{}±{}", pct(m.mean), pct(m.std))
}

pub fn p_value(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.2}")
    }
}

/// Left-aligned first column, right-aligned others.
pub fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let ncol = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate().take(ncol) {
            widths[i] = widths[i].max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let pad = widths[i] - c.chars().count();
                if i == 0 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(header);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (ncol - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

fn ttest_cells(t: &Option<TTestResult>, scale: f64, decimals: usize) -> [String; 3] {
    match t {
        Some(t) => [
            format!("{:.2}", t.t_statistic),
            format!(
                "{:.*} to {:.*}",
                decimals,
                scale * t.ci95_low,
                decimals,
                scale * t.ci95_high
            ),
            p_value(t.p_value),
        ],
        None => ["-".into(), "-".into(), "-".into()],
    }
}

pub fn length_table(stats: &LengthStats) -> String {
    let header: Vec<String> = ["Language", "All", "AI-written", "Human-written", "t-statistic", "95% CI", "p-value"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let ms = |m: &Option<MeanStd>| m.map_or("-".to_string(), |m| format!("{:.0}±{:.0}", m.mean, m.std));
    let rows: Vec<Vec<String>> = stats
        .rows
        .iter()
        .map(|r| {
            let [t, ci, p] = ttest_cells(&r.test, 1.0, 0);
            vec![r.language.clone(), ms(&Some(r.all)), ms(&r.ai), ms(&r.human), t, ci, p]
        })
        .collect();
    render_table(&header, &rows)
}

/// The accuracy grid: provenances as rows, tested languages as columns,
/// with per-provenance and per-language marginals; the multilingual rows
/// (accuracy, F1, AUC) follow when given.
pub fn grid_table(mono: Option<&ExperimentGrid>, multi: Option<&ExperimentGrid>) -> String {
    let mut langs: BTreeSet<String> = BTreeSet::new();
    for g in mono.iter().chain(multi.iter()) {
        langs.extend(g.languages());
    }
    let langs: Vec<String> = langs.into_iter().collect();
    let mut header = vec!["Prov. language".to_string()];
    header.extend(langs.iter().cloned());
    header.push("Prov. accuracy".into());
    let mut rows = Vec::new();
    if let Some(g) = mono {
        let srcs: BTreeSet<&String> = g.cells.iter().filter_map(|c| c.src.as_ref()).collect();
        for src in srcs {
            let mut row = vec![src.clone()];
            for dst in &langs {
                row.push(g.cell(dst, Some(src)).map_or("-".into(), |c| pct(c.metrics.accuracy)));
            }
            row.push(g.per_provenance.get(src).map_or("-".into(), pct_pm));
            rows.push(row);
        }
        let mut row = vec!["Language accuracy".to_string()];
        for dst in &langs {
            row.push(g.per_language.get(dst).map_or("-".into(), pct_pm));
        }
        row.push("-".into());
        rows.push(row);
    }
    if let Some(g) = multi {
        let metric_rows: [(&str, fn(&Metrics) -> Option<f64>); 3] = [
            ("Multilingual accuracy", |m| Some(m.accuracy)),
            ("Multilingual F1", |m| Some(m.f1_ai).filter(|v| v.is_finite())),
            ("Multilingual AUC", |m| m.auc),
        ];
        for (name, f) in metric_rows {
            let mut row = vec![name.to_string()];
            for dst in &langs {
                row.push(g.cell(dst, None).and_then(|c| f(&c.metrics)).map_or("-".into(), pct));
            }
            row.push(g.marginal(f).as_ref().map_or("-".into(), pct_pm));
            rows.push(row);
        }
    }
    render_table(&header, &rows)
}

pub fn tests_table(tests: &HypothesisTests) -> String {
    let header: Vec<String> = ["Values", "t/F-statistic", "95% CI", "p-value"].iter().map(|s| s.to_string()).collect();
    let anova_row = |name: &str, a: &Option<AnovaResult>| match a {
        Some(a) => vec![name.to_string(), format!("{:.2}", a.f_statistic), "-".into(), p_value(a.p_value)],
        None => vec![name.to_string(), "-".into(), "-".into(), "-".into()],
    };
    let [t, ci, p] = ttest_cells(&tests.multilingual_comparison, 100.0, 1);
    let rows = vec![
        anova_row("Lang. accuracy (ANOVA)", &tests.language_anova),
        anova_row("Prov. accuracy (ANOVA)", &tests.provenance_anova),
        vec!["Multilingual comp. (t-test)".into(), t, ci, p],
    ];
    let mut out = render_table(&header, &rows);
    let diag = |name: &str, d: &super::stats::Diagnostics| {
        let h = &d.homogeneity;
        format!(
            "{name}: {} groups, {} non-normal at 0.05 ({}), {} p={}\n",
            d.normality.len(),
            d.normality.iter().filter(|o| o.p_value.is_some_and(|p| p < 0.05)).count(),
            d.normality.first().map_or("shapiro-wilk", |o| o.test.as_str()),
            h.test,
            h.p_value.map_or("-".into(), p_value)
        )
    };
    out.push_str(&diag("language groups", &tests.language_diagnostics));
    out.push_str(&diag("provenance groups", &tests.provenance_diagnostics));
    for f in &tests.flags {
        out.push_str(&format!("note: {f}\n"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    /// Tested language -> accuracy.
    pub accuracies: BTreeMap<String, f64>,
}

pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let langs: BTreeSet<&String> = rows.iter().flat_map(|r| r.accuracies.keys()).collect();
    let mut header = vec!["Model".to_string()];
    header.extend(langs.iter().map(|s| s.to_string()));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.model.clone()];
            row.extend(langs.iter().map(|l| r.accuracies.get(*l).map_or("-".into(), |a| pct(*a))));
            row
        })
        .collect();
    render_table(&header, &body)
}

pub fn shift_table(shift: &ProvenanceShift) -> String {
    let header: Vec<String> = ["Language", "In-distribution", "Other provenances", "Gap", "Sets"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = shift
        .rows
        .iter()
        .map(|r| {
            vec![
                r.dst.clone(),
                pct(r.in_distribution),
                pct(r.out_distribution),
                pct(r.gap),
                r.n_out_sets.to_string(),
            ]
        })
        .collect();
    let mut out = format!("best provenance: {}\n", shift.best_provenance);
    out.push_str(&render_table(&header, &rows));
    if let Some(g) = shift.mean_gap {
        out.push_str(&format!("mean gap: {}%", pct(g)));
        if let Some(t) = &shift.test {
            let [ts, ci, p] = ttest_cells(&Some(t.clone()), 100.0, 1);
            out.push_str(&format!(", t={ts}, 95% CI {ci}, p={p}"));
        }
        out.push('\n');
    }
    if let Some(f) = &shift.flag {
        out.push_str(&format!("note: {f}\n"));
    }
    out
}

/// One JSON object per grid cell and marginal.
pub fn grid_rows(grid: &ExperimentGrid) -> Vec<Value> {
    let mode = match grid.mode {
        GridMode::Monolingual => "monolingual",
        GridMode::Multilingual => "multilingual",
    };
    let mut out: Vec<Value> = grid
        .cells
        .iter()
        .map(|c| {
            json!({
                "table": "grid", "mode": mode, "kind": "cell", "dst": c.dst, "src": c.src,
                "n_train": c.n_train, "n_test": c.metrics.n, "tp": c.metrics.tp, "tn": c.metrics.tn,
                "fp": c.metrics.fp, "fn": c.metrics.fn_, "accuracy": c.metrics.accuracy,
                "f1_ai": c.metrics.f1_ai, "f1_macro": c.metrics.f1_macro, "auc": c.metrics.auc,
            })
        })
        .collect();
    for (src, m) in &grid.per_provenance {
        out.push(json!({"table": "grid", "mode": mode, "kind": "provenance_marginal", "src": src, "mean": m.mean, "std": m.std, "n": m.n}));
    }
    for (dst, m) in &grid.per_language {
        out.push(json!({"table": "grid", "mode": mode, "kind": "language_marginal", "dst": dst, "mean": m.mean, "std": m.std, "n": m.n}));
    }
    if let Some(m) = &grid.overall {
        out.push(json!({"table": "grid", "mode": mode, "kind": "overall", "mean": m.mean, "std": m.std, "n": m.n}));
    }
    for m in &grid.missing {
        out.push(json!({"table": "grid", "mode": mode, "kind": "missing", "dst": m.dst, "src": m.src, "reason": m.reason}));
    }
    out
}

#[derive(Deserialize)]
struct CellRow {
    mode: GridMode,
    kind: String,
    dst: String,
    #[serde(default)]
    src: Option<String>,
    #[serde(default)]
    n_train: usize,
    #[serde(default)]
    n_test: usize,
    #[serde(default)]
    tp: usize,
    #[serde(default)]
    tn: usize,
    #[serde(default)]
    fp: usize,
    #[serde(default, rename = "fn")]
    fn_: usize,
    accuracy: f64,
    #[serde(default)]
    f1_ai: Option<f64>,
    #[serde(default)]
    f1_macro: Option<f64>,
    #[serde(default)]
    auc: Option<f64>,
}

/// Rebuilds the monolingual and multilingual grids from stored rows. Only
/// `kind: "cell"` rows are read; marginals are recomputed. Cell rows need
/// at least `mode`, `dst` and `accuracy`.
pub fn grids_from_rows(rows: &[Value]) -> crate::error::Result<(Option<ExperimentGrid>, Option<ExperimentGrid>)> {
    let mut cells: BTreeMap<&'static str, Vec<GridCell>> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        if row.get("kind").and_then(Value::as_str) != Some("cell") {
            continue;
        }
        let c: CellRow = serde_json::from_value(row.clone())
            .map_err(|e| crate::error::Error::InvalidArgument(format!("grid row {}: {e}", i + 1)))?;
        debug_assert_eq!(c.kind, "cell");
        let key = match c.mode {
            GridMode::Monolingual => "mono",
            GridMode::Multilingual => "multi",
        };
        cells.entry(key).or_default().push(GridCell {
            dst: c.dst,
            src: c.src,
            n_train: c.n_train,
            metrics: Metrics {
                n: c.n_test,
                tp: c.tp,
                tn: c.tn,
                fp: c.fp,
                fn_: c.fn_,
                accuracy: c.accuracy,
                f1_ai: c.f1_ai.unwrap_or(f64::NAN),
                f1_macro: c.f1_macro.unwrap_or(f64::NAN),
                auc: c.auc,
            },
        });
    }
    let mono = cells.remove("mono").map(|c| ExperimentGrid::from_cells(GridMode::Monolingual, c, Vec::new()));
    let multi = cells.remove("multi").map(|c| ExperimentGrid::from_cells(GridMode::Multilingual, c, Vec::new()));
    Ok((mono, multi))
}
