//! TF-IDF vectors with smoothed idf and L2 normalization.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOKEN_PATTERN: &str = r"\b\w\w+\b";

fn token_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(TOKEN_PATTERN).expect("valid token pattern"))
}

/// Lowercased words of two or more word characters.
pub fn terms(doc: &str) -> Vec<String> {
    token_re().find_iter(doc).map(|m| m.as_str().to_lowercase()).collect()
}

/// Sparse row: (column, value) pairs sorted by column.
pub type SparseRow = Vec<(u32, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub token_pattern: String,
    pub lowercase: bool,
    pub vocabulary: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
}

impl TfidfModel {
    /// Fits on `corpus`. With `max_features`, keeps the terms with the highest
    /// total count (ties by term text), as scikit-learn does.
    pub fn fit(corpus: &[&str], max_features: Option<usize>) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::InvalidArgument("TF-IDF needs a non-empty corpus".into()));
        }
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut tf: HashMap<String, usize> = HashMap::new();
        for doc in corpus {
            let ts = terms(doc);
            for t in &ts {
                *tf.entry(t.clone()).or_default() += 1;
            }
            let mut uniq = ts;
            uniq.sort_unstable();
            uniq.dedup();
            for t in uniq {
                *df.entry(t).or_default() += 1;
            }
        }
        let mut kept: Vec<String> = df.keys().cloned().collect();
        if let Some(m) = max_features {
            kept.sort_by(|a, b| tf[b].cmp(&tf[a]).then_with(|| a.cmp(b)));
            kept.truncate(m);
        }
        kept.sort();
        let n = corpus.len() as f64;
        let idf = kept.iter().map(|t| ((1.0 + n) / (1.0 + df[t] as f64)).ln() + 1.0).collect();
        let vocabulary = kept.into_iter().enumerate().map(|(i, t)| (t, i)).collect();
        Ok(Self {
            token_pattern: TOKEN_PATTERN.into(),
            lowercase: true,
            vocabulary,
            idf,
        })
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    /// Raw counts times idf, L2-normalized; unseen terms are ignored and an
    /// empty document maps to the zero vector.
    pub fn transform(&self, doc: &str) -> SparseRow {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in terms(doc) {
            if let Some(&i) = self.vocabulary.get(&t) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let mut row: SparseRow = counts.into_iter().map(|(i, c)| (i as u32, c * self.idf[i])).collect();
        let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|(_, v)| *v /= norm);
        }
        row
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.dim()];
        for (t, &i) in &self.vocabulary {
            names[i] = t.clone();
        }
        names
    }
}

pub fn tfidf_fit_transform(corpus: &[&str], max_features: Option<usize>) -> Result<(TfidfModel, Vec<SparseRow>)> {
    let model = TfidfModel::fit(corpus, max_features)?;
    let rows = corpus.iter().map(|d| model.transform(d)).collect();
    Ok((model, rows))
}
