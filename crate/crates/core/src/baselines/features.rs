//! Layout and lexical feature vectors for the tree baselines.

use serde::{Deserialize, Serialize};

use crate::classifier::tokenizer::lex;
use crate::error::Result;
use crate::lang::Registry;

const TAB_WIDTH: usize = 4;

pub const LAYOUT_FEATURES: [&str; 8] = [
    "line_count",
    "mean_line_length",
    "max_line_length",
    "mean_indent",
    "max_indent",
    "std_indent",
    "blank_line_ratio",
    "whitespace_ratio",
];

pub const LEXICAL_FEATURES: [&str; 6] = [
    "token_count",
    "mean_token_length",
    "identifier_count",
    "comment_ratio",
    "numeric_literal_ratio",
    "punctuation_ratio",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// Feature names for a language: layout, lexical, then `kw_<keyword>` for
/// every registry keyword.
pub fn feature_names(lang: &str, registry: &Registry) -> Result<Vec<String>> {
    let kws = registry.keywords(lang)?;
    Ok(LAYOUT_FEATURES
        .iter()
        .chain(LEXICAL_FEATURES.iter())
        .map(|s| s.to_string())
        .chain(kws.iter().map(|k| format!("kw_{k}")))
        .collect())
}

fn indent_width(line: &str) -> usize {
    line.chars()
        .take_while(|c| c.is_whitespace())
        .map(|c| if c == '\t' { TAB_WIDTH } else { 1 })
        .sum()
}

pub fn extract_features(code: &str, lang: &str, registry: &Registry) -> Result<FeatureVector> {
    let names = feature_names(lang, registry)?;
    let info = registry.info(lang).expect("keywords resolved");
    let values = feature_values(code, &info.keywords, &info.line_comments);
    debug_assert_eq!(values.len(), names.len());
    Ok(FeatureVector { names, values })
}

/// Feature values in [`feature_names`] order for an explicit keyword list
/// and line-comment markers.
pub fn feature_values<K: AsRef<str>, C: AsRef<str>>(code: &str, keywords: &[K], line_comments: &[C]) -> Vec<f64> {
    let lines: Vec<&str> = code.lines().collect();
    let n_lines = lines.len();
    let nl = n_lines.max(1) as f64;
    let lengths: Vec<usize> = lines.iter().map(|l| l.chars().count()).collect();
    let blank = lines.iter().filter(|l| l.trim().is_empty()).count();
    let indents: Vec<f64> = lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| indent_width(l) as f64)
        .collect();
    let (mean_indent, max_indent, std_indent) = if indents.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        let m = indents.iter().sum::<f64>() / indents.len() as f64;
        let var = indents.iter().map(|v| (v - m).powi(2)).sum::<f64>() / indents.len() as f64;
        (m, indents.iter().cloned().fold(0.0, f64::max), var.sqrt())
    };
    let chars = code.chars().count();
    let ws = code.chars().filter(|c| c.is_whitespace()).count();
    let comment_lines = lines
        .iter()
        .filter(|l| {
            let t = l.trim_start();
            line_comments.iter().any(|c| t.starts_with(c.as_ref()))
        })
        .count();

    let tokens: Vec<String> = lex(code).into_iter().filter(|t| !t.starts_with('<') || t.len() == 1).collect();
    let nt = tokens.len();
    let ntf = nt.max(1) as f64;
    let is_ident = |t: &str| t.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_');
    let is_kw = |t: &str| keywords.iter().any(|k| k.as_ref() == t);
    let identifiers = tokens.iter().filter(|t| is_ident(t) && !is_kw(t)).count();
    let numbers = tokens.iter().filter(|t| t.starts_with(|c: char| c.is_ascii_digit())).count();
    let punct = tokens
        .iter()
        .filter(|t| !is_ident(t) && !t.starts_with(|c: char| c.is_ascii_digit()))
        .count();
    let token_chars: usize = tokens.iter().map(|t| t.chars().count()).sum();

    let mut values = vec![
        n_lines as f64,
        lengths.iter().sum::<usize>() as f64 / nl,
        lengths.iter().copied().max().unwrap_or(0) as f64,
        mean_indent,
        max_indent,
        std_indent,
        blank as f64 / nl,
        ws as f64 / chars.max(1) as f64,
        nt as f64,
        token_chars as f64 / ntf,
        identifiers as f64,
        comment_lines as f64 / nl,
        numbers as f64 / ntf,
        punct as f64 / ntf,
    ];
    for kw in keywords {
        values.push(tokens.iter().filter(|t| t.as_str() == kw.as_ref()).count() as f64 / ntf);
    }
    values
}
