//! Classical comparison systems: layout/lexical features with a decision
//! tree or random forest, and TF-IDF with gradient-boosted trees.

pub mod features;
pub mod tfidf;
pub mod tree;

use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generation::clean_snippet;
use crate::lang::Registry;
use crate::record::{SnippetRecord, Target};
use crate::sampling::rng_for;

pub use features::{extract_features, FeatureVector};
pub use tfidf::{tfidf_fit_transform, SparseRow, TfidfModel};
pub use tree::{Objective, Tree, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "snake_case")]
pub enum Algo {
    /// Entropy-split binary tree, unpruned.
    DecisionTree { max_depth: Option<usize>, min_samples_leaf: usize },
    RandomForest {
        n_trees: usize,
        max_depth: Option<usize>,
        /// Features drawn per node; `None` means floor(sqrt(d)).
        max_features: Option<usize>,
    },
    BoostedTrees {
        rounds: usize,
        max_depth: usize,
        learning_rate: f64,
        lambda: f64,
        min_child_weight: f64,
    },
}

impl Algo {
    pub fn decision_tree() -> Self {
        Algo::DecisionTree {
            max_depth: None,
            min_samples_leaf: 1,
        }
    }

    pub fn random_forest() -> Self {
        Algo::RandomForest {
            n_trees: 100,
            max_depth: None,
            max_features: None,
        }
    }

    pub fn boosted_trees() -> Self {
        Algo::BoostedTrees {
            rounds: 200,
            max_depth: 6,
            learning_rate: 0.1,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Layout,
    Tfidf { max_features: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub name: String,
    pub features: FeatureKind,
    pub algo: Algo,
    pub max_bins: usize,
}

impl BaselineSpec {
    pub fn j48() -> Self {
        Self {
            name: "j48".into(),
            features: FeatureKind::Layout,
            algo: Algo::decision_tree(),
            max_bins: 256,
        }
    }

    pub fn random_forest() -> Self {
        Self {
            name: "rf".into(),
            features: FeatureKind::Layout,
            algo: Algo::random_forest(),
            max_bins: 256,
        }
    }

    pub fn xgb_tfidf() -> Self {
        Self {
            name: "xgb-tfidf".into(),
            features: FeatureKind::Tfidf { max_features: Some(5000) },
            algo: Algo::boosted_trees(),
            max_bins: 64,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "j48" | "dt" | "decision_tree" => Ok(Self::j48()),
            "rf" | "random_forest" => Ok(Self::random_forest()),
            "xgb-tfidf" | "xgb" | "boosted_trees" => Ok(Self::xgb_tfidf()),
            other => Err(Error::InvalidArgument(format!("unknown baseline {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Featurizer {
    Layout {
        language: String,
        keywords: Vec<String>,
        line_comments: Vec<String>,
    },
    Tfidf(TfidfModel),
}

impl Featurizer {
    fn fit(kind: &FeatureKind, codes: &[String], lang: &str, registry: &Registry) -> Result<Self> {
        Ok(match kind {
            FeatureKind::Layout => {
                let info = registry
                    .info(lang)
                    .ok_or_else(|| Error::UnknownLanguage(lang.to_string()))?;
                Featurizer::Layout {
                    language: info.name.clone(),
                    keywords: info.keywords.iter().map(|s| s.to_string()).collect(),
                    line_comments: info.line_comments.iter().map(|s| s.to_string()).collect(),
                }
            }
            FeatureKind::Tfidf { max_features } => {
                let docs: Vec<&str> = codes.iter().map(String::as_str).collect();
                Featurizer::Tfidf(TfidfModel::fit(&docs, *max_features)?)
            }
        })
    }

    pub fn names(&self) -> Vec<String> {
        match self {
            Featurizer::Layout { keywords, .. } => features::LAYOUT_FEATURES
                .iter()
                .chain(features::LEXICAL_FEATURES.iter())
                .map(|s| s.to_string())
                .chain(keywords.iter().map(|k| format!("kw_{k}")))
                .collect(),
            Featurizer::Tfidf(m) => m.feature_names(),
        }
    }

    pub fn transform(&self, code: &str) -> SparseRow {
        let code = clean_snippet(code);
        match self {
            Featurizer::Layout {
                keywords,
                line_comments,
                ..
            } => tree::dense_to_sparse(&features::feature_values(&code, keywords, line_comments)),
            Featurizer::Tfidf(m) => m.transform(&code),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TreeModel {
    DecisionTree { tree: Tree },
    RandomForest { trees: Vec<Tree> },
    BoostedTrees { base_margin: f64, trees: Vec<Tree> },
}

impl TreeModel {
    pub fn prob_ai(&self, row: &SparseRow) -> f64 {
        match self {
            TreeModel::DecisionTree { tree } => tree.predict(row),
            TreeModel::RandomForest { trees } => trees.iter().map(|t| t.predict(row)).sum::<f64>() / trees.len() as f64,
            TreeModel::BoostedTrees { base_margin, trees } => {
                let m = base_margin + trees.iter().map(|t| t.predict(row)).sum::<f64>();
                1.0 / (1.0 + (-m).exp())
            }
        }
    }
}

/// Trains a tree model on sparse rows with 0/1 labels.
pub fn fit_trees(algo: &Algo, rows: &[SparseRow], n_features: usize, labels: &[usize], max_bins: usize, seed: u64) -> Result<TreeModel> {
    if rows.len() != labels.len() || rows.is_empty() {
        return Err(Error::InvalidArgument("rows and labels must be non-empty and aligned".into()));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::InvalidArgument("labels must be binary".into()));
    }
    let data = tree::Binned::new(rows, n_features, max_bins);
    let n = rows.len();
    Ok(match algo {
        Algo::DecisionTree {
            max_depth,
            min_samples_leaf,
        } => {
            let stats = tree::class_stats(labels, &vec![1.0; n]);
            let params = TreeParams {
                max_depth: *max_depth,
                min_samples_leaf: *min_samples_leaf,
                max_features: None,
            };
            let tree = tree::fit_tree(&data, &stats, params, Objective::Entropy, &mut rng_for(seed, "tree"));
            TreeModel::DecisionTree { tree }
        }
        Algo::RandomForest {
            n_trees,
            max_depth,
            max_features,
        } => {
            let mtry = max_features.unwrap_or_else(|| ((n_features as f64).sqrt() as usize).max(1));
            let params = TreeParams {
                max_depth: *max_depth,
                min_samples_leaf: 1,
                max_features: Some(mtry),
            };
            let trees = (0..*n_trees)
                .into_par_iter()
                .map(|t| {
                    let mut rng = rng_for(seed, &format!("forest/{t}"));
                    let mut weights = vec![0.0; n];
                    for _ in 0..n {
                        weights[rng.gen_range(0..n)] += 1.0;
                    }
                    let stats = tree::class_stats(labels, &weights);
                    tree::fit_tree(&data, &stats, params, Objective::Entropy, &mut rng)
                })
                .collect();
            TreeModel::RandomForest { trees }
        }
        Algo::BoostedTrees {
            rounds,
            max_depth,
            learning_rate,
            lambda,
            min_child_weight,
        } => {
            let objective = Objective::Newton {
                lambda: *lambda,
                gamma: 0.0,
                min_child_weight: *min_child_weight,
            };
            let params = TreeParams {
                max_depth: Some(*max_depth),
                min_samples_leaf: 1,
                max_features: None,
            };
            let mut margin = vec![0.0; n];
            let mut trees = Vec::with_capacity(*rounds);
            let mut rng = rng_for(seed, "boost");
            for _ in 0..*rounds {
                let stats: Vec<[f64; 3]> = margin
                    .iter()
                    .zip(labels)
                    .map(|(&m, &y): (&f64, &usize)| {
                        let p = 1.0 / (1.0 + (-m).exp());
                        [p - y as f64, (p * (1.0 - p)).max(1e-16), 1.0]
                    })
                    .collect();
                let mut t = tree::fit_tree(&data, &stats, params, objective, &mut rng);
                t.scale_leaves(*learning_rate);
                for (i, row) in rows.iter().enumerate() {
                    margin[i] += t.predict(row);
                }
                trees.push(t);
            }
            TreeModel::BoostedTrees { base_margin: 0.0, trees }
        }
    })
}

const FORMAT: &str = "codestylo-baseline-v1";

/// A fitted baseline: featurizer plus tree model, serialized as JSON with
/// feature names so the trees can be read directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub format: String,
    pub spec: BaselineSpec,
    pub language: String,
    pub feature_names: Vec<String>,
    pub featurizer: Featurizer,
    pub model: TreeModel,
}

impl BaselineModel {
    pub fn fit(spec: &BaselineSpec, codes: &[String], labels: &[Target], lang: &str, registry: &Registry, seed: u64) -> Result<Self> {
        if codes.is_empty() || codes.len() != labels.len() {
            return Err(Error::InvalidArgument("codes and labels must be non-empty and aligned".into()));
        }
        let cleaned: Vec<String> = codes.iter().map(|c| clean_snippet(c)).collect();
        let featurizer = Featurizer::fit(&spec.features, &cleaned, lang, registry)?;
        let names = featurizer.names();
        let rows: Vec<SparseRow> = cleaned.par_iter().map(|c| featurizer.transform(c)).collect();
        let y: Vec<usize> = labels.iter().map(|t| t.index()).collect();
        let model = fit_trees(&spec.algo, &rows, names.len(), &y, spec.max_bins, seed)?;
        Ok(Self {
            format: FORMAT.into(),
            spec: spec.clone(),
            language: lang.to_string(),
            feature_names: names,
            featurizer,
            model,
        })
    }

    pub fn prob_ai(&self, code: &str) -> f64 {
        self.model.prob_ai(&self.featurizer.transform(code))
    }

    pub fn predict(&self, code: &str) -> Target {
        if self.prob_ai(code) > 0.5 {
            Target::Ai
        } else {
            Target::Human
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        if m.format != FORMAT {
            return Err(Error::CheckpointMismatch(format!("unknown baseline format {}", m.format)));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the fold scores.
    pub std: f64,
}

impl CvResult {
    pub fn from_scores(fold_scores: Vec<f64>) -> Self {
        let n = fold_scores.len() as f64;
        let mean = fold_scores.iter().sum::<f64>() / n;
        let std = (fold_scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self { fold_scores, mean, std }
    }
}

/// Fold index for every example: each class is shuffled and dealt
/// round-robin, continuing the deal across classes so fold sizes differ by
/// at most one overall and per class.
pub fn stratified_folds(labels: &[Target], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidArgument("k must be at least 2".into()));
    }
    let mut fold = vec![0; labels.len()];
    let mut next = 0usize;
    for class in [Target::Human, Target::Ai] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(Error::InsufficientRecords {
                class: class.to_string(),
                needed: k,
                available: idx.len(),
            });
        }
        rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng_for(seed, &format!("folds/{class}")));
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    Ok(fold)
}

/// Stratified k-fold accuracy of a baseline; each fold fits its own
/// featurizer on the training side only.
pub fn cross_validate(spec: &BaselineSpec, codes: &[String], labels: &[Target], lang: &str, registry: &Registry, k: usize, seed: u64) -> Result<CvResult> {
    let folds = stratified_folds(labels, k, seed)?;
    let scores: Vec<Result<f64>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (mut tr_c, mut tr_y, mut te) = (Vec::new(), Vec::new(), Vec::new());
            for i in 0..codes.len() {
                if folds[i] == f {
                    te.push(i);
                } else {
                    tr_c.push(codes[i].clone());
                    tr_y.push(labels[i]);
                }
            }
            let m = BaselineModel::fit(spec, &tr_c, &tr_y, lang, registry, crate::sampling::derive_seed(seed, &format!("fold/{f}")))?;
            let correct = te.iter().filter(|&&i| m.predict(&codes[i]) == labels[i]).count();
            Ok(correct as f64 / te.len() as f64)
        })
        .collect();
    Ok(CvResult::from_scores(scores.into_iter().collect::<Result<_>>()?))
}

pub fn cross_validate_records(spec: &BaselineSpec, records: &[SnippetRecord], registry: &Registry, k: usize, seed: u64) -> Result<CvResult> {
    let lang = single_language(records)?;
    let codes: Vec<String> = records.iter().map(|r| r.code.clone()).collect();
    let labels: Vec<Target> = records.iter().map(|r| r.target).collect();
    cross_validate(spec, &codes, &labels, &lang, registry, k, seed)
}

fn single_language(records: &[SnippetRecord]) -> Result<String> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidArgument("no records".into()))?
        .language_name
        .clone();
    if records.iter().any(|r| r.language_name != first) {
        return Err(Error::InvalidArgument("baselines are trained on one language at a time".into()));
    }
    Ok(first)
}

/// Cross-validates the baseline on every provenance sub-dataset of `dst` and
/// returns the sources ranked by mean accuracy (best first).
pub fn rank_provenances(spec: &BaselineSpec, records: &[SnippetRecord], dst: &str, registry: &Registry, k: usize, seed: u64) -> Result<Vec<(String, CvResult)>> {
    let mut by_src: std::collections::BTreeMap<String, Vec<SnippetRecord>> = Default::default();
    for r in records.iter().filter(|r| r.language_name == dst) {
        let id = r.set_id()?;
        by_src.entry(id.src).or_default().push(r.clone());
    }
    if by_src.is_empty() {
        return Err(Error::UnknownLanguage(dst.to_string()));
    }
    let mut out = Vec::new();
    for (src, recs) in by_src {
        out.push((src, cross_validate_records(spec, &recs, registry, k, seed)?));
    }
    out.sort_by(|a, b| b.1.mean.total_cmp(&a.1.mean).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_and_stratify() {
        let labels: Vec<Target> = (0..100).map(|i| Target::from_index((i < 37) as usize)).collect();
        let folds = stratified_folds(&labels, 10, 4).unwrap();
        for f in 0..10 {
            let size = folds.iter().filter(|&&x| x == f).count();
            assert_eq!(size, 10);
            let ai = (0..100).filter(|&i| folds[i] == f && labels[i] == Target::Ai).count();
            assert!((3..=4).contains(&ai), "{ai}");
        }
        assert!(stratified_folds(&labels, 1, 0).is_err());
        assert!(stratified_folds(&labels[..5], 10, 0).is_err());
    }

    #[test]
    fn cv_mean_is_mean_of_folds() {
        let r = CvResult::from_scores(vec![1.0, 0.5, 0.75]);
        assert!((r.mean - 0.75).abs() < 1e-15);
        assert!((r.std - (0.125f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn boosted_trees_fit_separable_data() {
        let rows: Vec<SparseRow> = (0..40).map(|i| vec![(0, i as f64), (1, ((i * 7) % 5) as f64)]).collect();
        let y: Vec<usize> = (0..40).map(|i| (i >= 20) as usize).collect();
        let m = fit_trees(&Algo::boosted_trees(), &rows, 2, &y, 64, 1).unwrap();
        for (r, &l) in rows.iter().zip(&y) {
            assert_eq!((m.prob_ai(r) > 0.5) as usize, l);
        }
    }

    #[test]
    fn forest_is_deterministic() {
        let rows: Vec<SparseRow> = (0..30).map(|i| vec![(0, (i % 7) as f64), (1, (i % 3) as f64)]).collect();
        let y: Vec<usize> = (0..30).map(|i| (i % 2) as usize).collect();
        let a = fit_trees(&Algo::random_forest(), &rows, 2, &y, 64, 9).unwrap();
        let b = fit_trees(&Algo::random_forest(), &rows, 2, &y, 64, 9).unwrap();
        assert_eq!(a, b);
    }
}
