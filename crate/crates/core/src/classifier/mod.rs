//! Human/AI code classifier: lexical tokenizer, transformer encoder and a
//! classification head on the first output position.

pub mod checkpoint;
pub mod model;
pub mod optim;
pub mod tokenizer;

use std::path::PathBuf;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generation::clean_snippet;
use crate::record::{SnippetRecord, Target};
use crate::sampling::{derive_seed, rng_for};

pub use checkpoint::ModelCheckpoint;
pub use model::{EncoderDims, Mode, ModelParams};
pub use tokenizer::{CodeTokenizer, TokenSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum EncoderVariant {
    /// Randomly initialized encoder trained from scratch.
    SmallScratch {
        layers: usize,
        hidden: usize,
        heads: usize,
        ffn_dim: usize,
        max_len: usize,
    },
    /// Warm start from a checkpoint directory written by this crate; the
    /// encoder and tokenizer are reused and the head is re-initialized.
    PretrainedCheckpoint { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub variant: EncoderVariant,
    /// Inner width of the classification head; defaults to the hidden size.
    pub head_dim: Option<usize>,
    pub max_vocab: usize,
    pub min_count: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            variant: EncoderVariant::SmallScratch {
                layers: 4,
                hidden: 256,
                heads: 4,
                ffn_dim: 1024,
                max_len: 512,
            },
            head_dim: None,
            max_vocab: 8000,
            min_count: 2,
        }
    }
}

impl EncoderConfig {
    pub fn small(layers: usize, hidden: usize, heads: usize, max_len: usize) -> Self {
        Self {
            variant: EncoderVariant::SmallScratch {
                layers,
                hidden,
                heads,
                ffn_dim: 4 * hidden,
                max_len,
            },
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: String,
    pub weight_decay: f64,
    pub lr_initial: f64,
    pub epochs: usize,
    pub lr_decay_epoch: usize,
    pub lr_decay_factor: f64,
    pub batch_size: usize,
    pub grad_accum: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: "adamw".into(),
            weight_decay: 0.01,
            lr_initial: 2e-5,
            epochs: 15,
            lr_decay_epoch: 10,
            lr_decay_factor: 0.1,
            batch_size: 16,
            grad_accum: 1,
            dropout: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.optimizer != "adamw" {
            return Err(Error::InvalidArgument(format!("unsupported optimizer {}", self.optimizer)));
        }
        if self.epochs == 0 || self.lr_decay_epoch >= self.epochs {
            return Err(Error::InvalidArgument(format!(
                "lr_decay_epoch ({}) must be below epochs ({})",
                self.lr_decay_epoch, self.epochs
            )));
        }
        if !(self.lr_initial > 0.0 && self.lr_decay_factor > 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument("rates must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument("dropout must be in [0, 1)".into()));
        }
        if self.batch_size == 0 || self.grad_accum == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Target,
    pub prob_ai: f64,
    pub logits: [f64; 2],
}

impl Prediction {
    pub fn from_logits(logits: [f64; 2]) -> Self {
        let p = model::softmax2(logits);
        let label = if logits[1] > logits[0] { Target::Ai } else { Target::Human };
        Self {
            label,
            prob_ai: p[1],
            logits,
        }
    }

    /// Wraps a probability from a model without logits; the logits are
    /// (0, logit(p)) so that softmax reproduces `p`.
    pub fn from_prob(p: f64) -> Self {
        let p = p.clamp(1e-15, 1.0 - 1e-15);
        Self::from_logits([0.0, (p / (1.0 - p)).ln()])
    }

    pub fn prob_human(&self) -> f64 {
        model::softmax2(self.logits)[0]
    }
}

/// Runs the encoder and head on a token sequence.
pub fn encode_classify(params: &ModelParams, tokens: &TokenSequence, mode: Mode, dropout: f64, rng: &mut ChaCha8Rng) -> Result<Prediction> {
    let (logits, _) = model::forward(params, &tokens.ids, mode, dropout, rng)?;
    Ok(Prediction::from_logits(logits))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochLog>,
    /// Learning rate used at every optimizer step.
    pub step_lrs: Vec<f64>,
}

struct Example {
    ids: Vec<usize>,
    label: usize,
}

fn prepare(records: &[SnippetRecord], tok: &CodeTokenizer, max_len: usize) -> Result<Vec<Example>> {
    records
        .iter()
        .map(|r| {
            let seq = tok.tokenize(&clean_snippet(&r.code), max_len)?;
            Ok(Example {
                ids: seq.ids,
                label: r.target.index(),
            })
        })
        .collect()
}

/// Samples per gradient group; groups are summed in a fixed order so the
/// result does not depend on the number of threads.
const GRAD_GROUP: usize = 4;

fn evaluate_examples(params: &ModelParams, examples: &[Example]) -> Result<(f64, f64)> {
    let results: Vec<Result<(f64, bool)>> = examples
        .par_iter()
        .map(|ex| {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let (logits, _) = model::forward(params, &ex.ids, Mode::Eval, 0.0, &mut rng)?;
            let (loss, _) = model::cross_entropy(logits, ex.label);
            let pred = Prediction::from_logits(logits).label.index();
            Ok((loss, pred == ex.label))
        })
        .collect();
    let mut loss = 0.0;
    let mut correct = 0usize;
    for r in results {
        let (l, ok) = r?;
        loss += l;
        correct += ok as usize;
    }
    let n = examples.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Trains a classifier and returns a checkpoint holding the final-epoch
/// weights, the tokenizer and both configs.
pub fn train(train_set: &[SnippetRecord], val_set: &[SnippetRecord], enc: &EncoderConfig, cfg: &TrainConfig) -> Result<ModelCheckpoint> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let mut init_rng = rng_for(cfg.seed, "init");
    let (tokenizer, mut params) = match &enc.variant {
        EncoderVariant::SmallScratch {
            layers,
            hidden,
            heads,
            ffn_dim,
            max_len,
        } => {
            let cleaned: Vec<String> = train_set.iter().map(|r| clean_snippet(&r.code)).collect();
            let tokenizer = CodeTokenizer::build(cleaned.iter().map(String::as_str), enc.max_vocab, enc.min_count);
            let dims = EncoderDims {
                vocab_size: tokenizer.vocab_size(),
                hidden: *hidden,
                layers: *layers,
                heads: *heads,
                ffn_dim: *ffn_dim,
                head_dim: enc.head_dim.unwrap_or(*hidden),
                max_len: *max_len,
            };
            let params = ModelParams::init(dims, &mut init_rng)?;
            (tokenizer, params)
        }
        EncoderVariant::PretrainedCheckpoint { path } => {
            let base = ModelCheckpoint::load(path)?;
            let mut params = base.params;
            params.reset_head(&mut init_rng);
            (base.tokenizer, params)
        }
    };
    let max_len = params.dims.max_len;
    let train_ex = prepare(train_set, &tokenizer, max_len)?;
    let val_ex = prepare(val_set, &tokenizer, max_len)?;
    info!(
        "training {} parameters on {} examples ({} validation)",
        params.num_parameters(),
        train_ex.len(),
        val_ex.len()
    );

    let mut opt = optim::AdamW::new(&params, cfg.weight_decay);
    let mut history = TrainHistory::default();
    let batch = cfg.batch_size * cfg.grad_accum;
    let mut order: Vec<usize> = (0..train_ex.len()).collect();
    for epoch in 1..=cfg.epochs {
        let lr = optim::learning_rate(cfg, epoch);
        order.sort_unstable();
        order.shuffle(&mut rng_for(cfg.seed, &format!("epoch/{epoch}")));
        let mut epoch_loss = 0.0;
        for (step_in_epoch, chunk) in order.chunks(batch).enumerate() {
            let step = history.step_lrs.len();
            let groups: Vec<Result<(ModelParams, f64)>> = chunk
                .par_chunks(GRAD_GROUP)
                .map(|group| {
                    let mut g = params.zeros_like();
                    let mut loss = 0.0;
                    for &i in group {
                        let ex = &train_ex[i];
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("dropout/{step}/{i}")));
                        let (l, _) = model::loss_and_grad(&params, &ex.ids, ex.label, Mode::Train, cfg.dropout, &mut rng, &mut g)?;
                        loss += l;
                    }
                    Ok((g, loss))
                })
                .collect();
            let mut grads: Option<ModelParams> = None;
            let mut batch_loss = 0.0;
            for r in groups {
                let (g, l) = r?;
                batch_loss += l;
                match grads.as_mut() {
                    None => grads = Some(g),
                    Some(acc) => acc.add_assign(&g),
                }
            }
            let mut grads = grads.expect("non-empty batch");
            grads.scale(1.0 / chunk.len() as f64);
            let mean_loss = batch_loss / chunk.len() as f64;
            if !mean_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    step: step_in_epoch,
                    loss: mean_loss,
                });
            }
            opt.step(&mut params, &grads, lr);
            history.step_lrs.push(lr);
            epoch_loss += batch_loss;
        }
        let train_loss = epoch_loss / train_ex.len() as f64;
        let (val_loss, val_accuracy) = if val_ex.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate_examples(&params, &val_ex)?;
            (Some(l), Some(a))
        };
        info!(
            "epoch {epoch}/{}: lr {lr:e}, train loss {train_loss:.4}, val loss {}, val acc {}",
            cfg.epochs,
            val_loss.map_or("-".into(), |v| format!("{v:.4}")),
            val_accuracy.map_or("-".into(), |v| format!("{v:.4}")),
        );
        history.epochs.push(EpochLog {
            epoch,
            lr,
            train_loss,
            val_loss,
            val_accuracy,
        });
    }
    Ok(ModelCheckpoint {
        encoder: enc.clone(),
        train_config: cfg.clone(),
        tokenizer,
        params,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(code: &str, target: Target) -> SnippetRecord {
        SnippetRecord {
            task_name: "t".into(),
            task_url: String::new(),
            task_description: String::new(),
            language_name: "Python".into(),
            code: code.into(),
            target,
            set: "Python_from_Go".into(),
        }
    }

    fn tiny() -> EncoderConfig {
        EncoderConfig {
            min_count: 1,
            ..EncoderConfig::small(1, 16, 2, 32)
        }
    }

    #[test]
    fn prediction_from_logits() {
        let p = Prediction::from_logits([0.0, 0.0]);
        assert_eq!(p.prob_ai, 0.5);
        assert_eq!(p.label, Target::Human);
        let p = Prediction::from_logits([-10.0, 10.0]);
        assert!(p.prob_ai > 0.9999);
        assert_eq!(p.label, Target::Ai);
        assert!((p.prob_ai + p.prob_human() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            lr_decay_epoch: 15,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            lr_initial: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_training_set_is_an_error() {
        assert!(train(&[], &[], &tiny(), &TrainConfig::default()).is_err());
    }

    #[test]
    fn memorizes_single_example() {
        let data = vec![rec("print('x')", Target::Ai)];
        let cfg = TrainConfig {
            lr_initial: 1e-2,
            epochs: 20,
            lr_decay_epoch: 19,
            batch_size: 1,
            dropout: 0.0,
            ..Default::default()
        };
        let ckpt = train(&data, &[], &tiny(), &cfg).unwrap();
        let losses: Vec<f64> = ckpt.history.epochs.iter().map(|e| e.train_loss).collect();
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
        assert!(*losses.last().unwrap() < 0.05, "{losses:?}");
    }

    #[test]
    fn step_learning_rates_follow_schedule() {
        let data: Vec<SnippetRecord> = (0..6)
            .map(|i| rec(&format!("x = {i}"), Target::from_index(i % 2)))
            .collect();
        let cfg = TrainConfig {
            epochs: 3,
            lr_decay_epoch: 2,
            batch_size: 4,
            ..Default::default()
        };
        let ckpt = train(&data, &data, &tiny(), &cfg).unwrap();
        // 6 examples, batch 4 -> 2 steps per epoch.
        assert_eq!(ckpt.history.step_lrs.len(), 6);
        for (i, lr) in ckpt.history.step_lrs.iter().enumerate() {
            let epoch = i / 2 + 1;
            assert_eq!(*lr, optim::learning_rate(&cfg, epoch));
        }
        assert!(ckpt.history.epochs.iter().all(|e| e.val_accuracy.is_some()));
    }

    #[test]
    fn training_is_reproducible() {
        let data: Vec<SnippetRecord> = (0..8)
            .map(|i| rec(&format!("y = {i} + {}", i * 3), Target::from_index(i % 2)))
            .collect();
        let cfg = TrainConfig {
            epochs: 2,
            lr_decay_epoch: 1,
            batch_size: 3,
            lr_initial: 1e-3,
            ..Default::default()
        };
        let a = train(&data, &[], &tiny(), &cfg).unwrap();
        let b = train(&data, &[], &tiny(), &cfg).unwrap();
        assert_eq!(a.params, b.params);
    }
}
