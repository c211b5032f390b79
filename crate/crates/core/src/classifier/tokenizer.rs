//! Lexical code tokenizer with a corpus-built vocabulary.
//!
//! Code is split into identifiers, numbers, single punctuation characters
//! and explicit layout tokens (newlines, tabs, runs of spaces), so the
//! vocabulary sees formatting as well as words.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const START: &str = "<s>";
pub const END: &str = "</s>";
pub const UNK: &str = "<unk>";
pub const START_ID: usize = 1;
pub const UNK_ID: usize = 3;

const MAX_SPACE_RUN: usize = 8;

fn lexer() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"[A-Za-z_][A-Za-z0-9_]*|[0-9]+(?:\.[0-9]+)?|\r?\n|\t| +|[^\sA-Za-z0-9_]")
            .expect("valid lexer regex")
    })
}

/// Splits code into lexical pieces.
pub fn lex(code: &str) -> Vec<String> {
    lexer()
        .find_iter(code)
        .map(|m| {
            let s = m.as_str();
            if s.ends_with('\n') {
                "<nl>".to_string()
            } else if s == "\t" {
                "<tab>".to_string()
            } else if s.starts_with(' ') {
                if s.len() > MAX_SPACE_RUN {
                    "<sp+>".to_string()
                } else {
                    format!("<sp{}>", s.len())
                }
            } else {
                s.to_string()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    pub length: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeTokenizer {
    pub kind: String,
    /// Token strings in id order; ids 0..4 are the special tokens.
    pub vocab: Vec<String>,
    #[serde(skip)]
    lookup: HashMap<String, usize>,
}

impl CodeTokenizer {
    pub fn from_vocab(vocab: Vec<String>) -> Result<Self> {
        if vocab.len() < 4 || vocab[..4] != [PAD, START, END, UNK] {
            return Err(Error::InvalidArgument(
                "vocabulary must start with <pad>, <s>, </s>, <unk>".into(),
            ));
        }
        let lookup = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self {
            kind: "lexical-v1".into(),
            vocab,
            lookup,
        })
    }

    /// Keeps tokens seen at least `min_count` times, most frequent first
    /// (ties broken by token text), up to `max_vocab` entries in total.
    pub fn build<'a>(corpus: impl IntoIterator<Item = &'a str>, max_vocab: usize, min_count: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for code in corpus {
            for t in lex(code) {
                *counts.entry(t).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count.max(1))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut vocab: Vec<String> = [PAD, START, END, UNK].iter().map(|s| s.to_string()).collect();
        vocab.extend(
            ranked
                .into_iter()
                .map(|(t, _)| t)
                .filter(|t| ![PAD, START, END, UNK].contains(&t.as_str()))
                .take(max_vocab.saturating_sub(4)),
        );
        Self::from_vocab(vocab).expect("specials are in place")
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn id(&self, token: &str) -> usize {
        self.lookup.get(token).copied().unwrap_or(UNK_ID)
    }

    /// Start token followed by the code's tokens, cut at `max_len` from the tail.
    pub fn tokenize(&self, code: &str, max_len: usize) -> Result<TokenSequence> {
        if code.trim().is_empty() {
            return Err(Error::InvalidArgument("cannot tokenize empty code".into()));
        }
        if max_len < 2 {
            return Err(Error::InvalidArgument("max_len must be at least 2".into()));
        }
        let mut ids = Vec::with_capacity(max_len);
        ids.push(START_ID);
        let mut truncated = false;
        for t in lex(code) {
            if ids.len() == max_len {
                truncated = true;
                break;
            }
            ids.push(self.id(&t));
        }
        Ok(TokenSequence {
            length: ids.len(),
            ids,
            truncated,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: CodeTokenizer = serde_json::from_str(text)?;
        if raw.kind != "lexical-v1" {
            return Err(Error::CheckpointMismatch(format!("unknown tokenizer kind {}", raw.kind)));
        }
        Self::from_vocab(raw.vocab)
    }

    /// SHA-256 over the serialized state; stored in checkpoints.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.kind.as_bytes());
        for t in &self.vocab {
            h.update([0u8]);
            h.update(t.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_layout_and_symbols() {
        assert_eq!(
            lex("if x>=10:\n    return x_1"),
            ["if", "<sp1>", "x", ">", "=", "10", ":", "<nl>", "<sp4>", "return", "<sp1>", "x_1"]
        );
        assert_eq!(lex("a\t\tb"), ["a", "<tab>", "<tab>", "b"]);
        assert_eq!(lex("a            b"), ["a", "<sp+>", "b"]);
        assert_eq!(lex("x = 3.14"), ["x", "<sp1>", "=", "<sp1>", "3.14"]);
    }

    #[test]
    fn short_code_has_start_and_content() {
        let tok = CodeTokenizer::build(["x=1"], 100, 1);
        let seq = tok.tokenize("x=1", 16).unwrap();
        assert!(seq.length >= 2);
        assert_eq!(seq.ids[0], START_ID);
        assert!(!seq.truncated);
        assert_eq!(seq, tok.tokenize("x=1", 16).unwrap());
    }

    #[test]
    fn truncates_from_tail() {
        let tok = CodeTokenizer::build(["a b c d e f g"], 100, 1);
        let seq = tok.tokenize("a b c d e f g", 5).unwrap();
        assert_eq!(seq.length, 5);
        assert!(seq.truncated);
        assert_eq!(seq.ids[1], tok.id("a"));
    }

    #[test]
    fn empty_code_is_rejected() {
        let tok = CodeTokenizer::build(["a"], 10, 1);
        assert!(tok.tokenize("", 8).is_err());
        assert!(tok.tokenize(" \n", 8).is_err());
    }

    #[test]
    fn vocabulary_order_and_limits() {
        let tok = CodeTokenizer::build(["b b b a a c", "b"], 6, 2);
        assert_eq!(&tok.vocab[4..], ["<sp1>", "b", ]);
        assert_eq!(tok.id("c"), UNK_ID);
        let big = CodeTokenizer::build(["b b b a a c"], 100, 1);
        assert_eq!(&big.vocab[4..], ["<sp1>", "b", "a", "c"]);
    }

    #[test]
    fn json_round_trip_preserves_hash() {
        let tok = CodeTokenizer::build(["fn main() { println!(\"hi\"); }"], 100, 1);
        let back = CodeTokenizer::from_json(&tok.to_json().unwrap()).unwrap();
        assert_eq!(back.hash(), tok.hash());
        assert_eq!(back.id("main"), tok.id("main"));
    }
}
