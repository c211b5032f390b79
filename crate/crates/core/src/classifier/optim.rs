//! AdamW with decoupled weight decay and the step learning-rate schedule.

use super::model::ModelParams;
use super::TrainConfig;

pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: ModelParams,
    v: ModelParams,
}

impl AdamW {
    pub fn new(params: &ModelParams, weight_decay: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let decay = 1.0 - lr * self.weight_decay;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let grads = grads.named_tensors();
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for i in 0..p.len() {
                let gi = g.2[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] = p[i] * decay - lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

/// Learning rate for a 1-based epoch: the initial rate up to and including
/// `lr_decay_epoch`, multiplied by `lr_decay_factor` afterwards.
pub fn learning_rate(cfg: &TrainConfig, epoch: usize) -> f64 {
    if epoch <= cfg.lr_decay_epoch {
        cfg.lr_initial
    } else {
        cfg.lr_initial * cfg.lr_decay_factor
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::model::EncoderDims;
    use rand::SeedableRng;

    #[test]
    fn default_step_schedule() {
        let cfg = TrainConfig::default();
        for e in 1..=10 {
            assert_eq!(learning_rate(&cfg, e), 2e-5);
        }
        for e in 11..=15 {
            assert!((learning_rate(&cfg, e) - 2e-6).abs() < 1e-20);
        }
    }

    #[test]
    fn first_step_matches_closed_form() {
        let dims = EncoderDims {
            vocab_size: 5,
            hidden: 4,
            layers: 0,
            heads: 1,
            ffn_dim: 4,
            head_dim: 4,
            max_len: 4,
        };
        let mut p = ModelParams::init(dims, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0)).unwrap();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.head_b2[0] = 0.5;
        g.head_b2[1] = -2.0;
        let mut opt = AdamW::new(&p, 0.01);
        let lr = 0.1;
        opt.step(&mut p, &g, lr);
        // With bias correction the first update is lr * sign(g) (up to eps),
        // after decoupled decay.
        for c in 0..2 {
            let expect = before.head_b2[c] * (1.0 - lr * 0.01) - lr * g.head_b2[c].signum();
            assert!((p.head_b2[c] - expect).abs() < 1e-6);
        }
        // Zero-gradient entries only decay.
        let expect = before.head_w2[[0, 0]] * (1.0 - lr * 0.01);
        assert!((p.head_w2[[0, 0]] - expect).abs() < 1e-15);
    }
}
