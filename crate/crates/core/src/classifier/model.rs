//! Transformer encoder with a first-token classification head, with
//! hand-written backward passes.
//!
//! Layout: token + learned position embeddings, `layers` pre-norm blocks
//! (multi-head self-attention, GELU feed-forward), a final layer norm, then
//! the head `linear -> ReLU -> dropout -> linear` on position 0 only.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;
const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderDims {
    pub vocab_size: usize,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub head_dim: usize,
    pub max_len: usize,
}

impl EncoderDims {
    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.hidden % self.heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "hidden size {} is not divisible by {} heads",
                self.hidden, self.heads
            )));
        }
        if self.max_len < 2 {
            return Err(Error::InvalidArgument("max_len must be at least 2".into()));
        }
        if self.vocab_size < 4 || self.ffn_dim == 0 || self.head_dim == 0 {
            return Err(Error::InvalidArgument("degenerate encoder dimensions".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub ln1_g: Array1<f64>,
    pub ln1_b: Array1<f64>,
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln2_g: Array1<f64>,
    pub ln2_b: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: EncoderDims,
    pub tok_emb: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub lnf_g: Array1<f64>,
    pub lnf_b: Array1<f64>,
    pub head_w1: Array2<f64>,
    pub head_b1: Array1<f64>,
    pub head_w2: Array2<f64>,
    pub head_b2: Array1<f64>,
}

fn normal2(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let dist = Normal::new(0.0, INIT_STD).expect("valid std");
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

impl LayerParams {
    fn init(d: &EncoderDims, rng: &mut impl Rng) -> Self {
        let h = d.hidden;
        Self {
            ln1_g: Array1::ones(h),
            ln1_b: Array1::zeros(h),
            wq: normal2(h, h, rng),
            bq: Array1::zeros(h),
            wk: normal2(h, h, rng),
            bk: Array1::zeros(h),
            wv: normal2(h, h, rng),
            bv: Array1::zeros(h),
            wo: normal2(h, h, rng),
            bo: Array1::zeros(h),
            ln2_g: Array1::ones(h),
            ln2_b: Array1::zeros(h),
            w1: normal2(h, d.ffn_dim, rng),
            b1: Array1::zeros(d.ffn_dim),
            w2: normal2(d.ffn_dim, h, rng),
            b2: Array1::zeros(h),
        }
    }
}

macro_rules! layer_fields {
    ($m:ident) => {
        $m!(ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2)
    };
}

impl ModelParams {
    pub fn init(dims: EncoderDims, rng: &mut impl Rng) -> Result<Self> {
        dims.validate()?;
        let h = dims.hidden;
        Ok(Self {
            dims,
            tok_emb: normal2(dims.vocab_size, h, rng),
            pos_emb: normal2(dims.max_len, h, rng),
            layers: (0..dims.layers).map(|_| LayerParams::init(&dims, rng)).collect(),
            lnf_g: Array1::ones(h),
            lnf_b: Array1::zeros(h),
            head_w1: normal2(h, dims.head_dim, rng),
            head_b1: Array1::zeros(dims.head_dim),
            head_w2: normal2(dims.head_dim, 2, rng),
            head_b2: Array1::zeros(2),
        })
    }

    /// Fresh head weights on top of existing encoder weights.
    pub fn reset_head(&mut self, rng: &mut impl Rng) {
        self.head_w1 = normal2(self.dims.hidden, self.dims.head_dim, rng);
        self.head_b1 = Array1::zeros(self.dims.head_dim);
        self.head_w2 = normal2(self.dims.head_dim, 2, rng);
        self.head_b2 = Array1::zeros(2);
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    /// (name, shape, values) for every tensor, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out: Vec<(String, Vec<usize>, &[f64])> = Vec::new();
        out.push(("tok_emb".into(), self.tok_emb.shape().to_vec(), self.tok_emb.as_slice().unwrap()));
        out.push(("pos_emb".into(), self.pos_emb.shape().to_vec(), self.pos_emb.as_slice().unwrap()));
        for (i, l) in self.layers.iter().enumerate() {
            macro_rules! push {
                ($($f:ident),*) => {
                    $(out.push((format!("layers.{i}.{}", stringify!($f)), l.$f.shape().to_vec(), l.$f.as_slice().unwrap()));)*
                };
            }
            layer_fields!(push);
        }
        macro_rules! push_top {
            ($($f:ident),*) => {
                $(out.push((stringify!($f).to_string(), self.$f.shape().to_vec(), self.$f.as_slice().unwrap()));)*
            };
        }
        push_top!(lnf_g, lnf_b, head_w1, head_b1, head_w2, head_b2);
        out
    }

    /// Mutable views of every tensor in the same order as [`named_tensors`](Self::named_tensors).
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            self.tok_emb.as_slice_mut().unwrap(),
            self.pos_emb.as_slice_mut().unwrap(),
        ];
        for l in self.layers.iter_mut() {
            macro_rules! push {
                ($($f:ident),*) => {
                    $(out.push(l.$f.as_slice_mut().unwrap());)*
                };
            }
            layer_fields!(push);
        }
        out.push(self.lnf_g.as_slice_mut().unwrap());
        out.push(self.lnf_b.as_slice_mut().unwrap());
        out.push(self.head_w1.as_slice_mut().unwrap());
        out.push(self.head_b1.as_slice_mut().unwrap());
        out.push(self.head_w2.as_slice_mut().unwrap());
        out.push(self.head_b2.as_slice_mut().unwrap());
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.named_tensors().iter().map(|t| t.2.len()).sum()
    }

    /// Rebuilds parameters from (name, shape, values) triples as written by
    /// [`named_tensors`](Self::named_tensors).
    pub fn from_tensors(dims: EncoderDims, tensors: &[(String, Vec<usize>, Vec<f64>)]) -> Result<Self> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut p = Self::init(dims, &mut rng)?;
        let expected: Vec<(String, Vec<usize>)> = p
            .named_tensors()
            .into_iter()
            .map(|(n, s, _)| (n, s))
            .collect();
        if expected.len() != tensors.len() {
            return Err(Error::CheckpointMismatch(format!(
                "expected {} tensors, found {}",
                expected.len(),
                tensors.len()
            )));
        }
        for ((name, shape), (tn, ts, _)) in expected.iter().zip(tensors) {
            if name != tn || shape != ts {
                return Err(Error::CheckpointMismatch(format!(
                    "tensor {tn} {ts:?} does not match expected {name} {shape:?}"
                )));
            }
        }
        for (dst, (_, _, values)) in p.tensors_mut().into_iter().zip(tensors) {
            dst.copy_from_slice(values);
        }
        Ok(p)
    }

    pub fn add_assign(&mut self, other: &ModelParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.named_tensors()) {
            a.iter_mut().zip(b.2).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }
}


struct LnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, g: &Array1<f64>, b: &Array1<f64>) -> (Array2<f64>, LnCache) {
    let d = x.ncols() as f64;
    let mean = x.sum_axis(Axis(1)) / d;
    let centered = x - &mean.view().insert_axis(Axis(1));
    let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / d;
    let inv_std = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
    let xhat = &centered * &inv_std.view().insert_axis(Axis(1));
    let y = &xhat * g + b;
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LnCache,
    g: &Array1<f64>,
    dg: &mut Array1<f64>,
    db: &mut Array1<f64>,
) -> Array2<f64> {
    *dg += &(dy * &cache.xhat).sum_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0));
    let dxhat = dy * g;
    let d = dy.ncols() as f64;
    let mean_dxhat = dxhat.sum_axis(Axis(1)) / d;
    let mean_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(1)) / d;
    let mut dx = dxhat - &mean_dxhat.insert_axis(Axis(1));
    dx = dx - &(&cache.xhat * &mean_dxhat_xhat.insert_axis(Axis(1)));
    dx * &cache.inv_std.view().insert_axis(Axis(1))
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + 0.044715 * u * u * u)).tanh())
}

fn gelu_grad(u: f64) -> f64 {
    let t = (GELU_C * (u + 0.044715 * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * u * u)
}

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

fn linear(x: &Array2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    x.dot(w) + b
}

struct LayerCache {
    x_in: Array2<f64>,
    ln1: LnCache,
    h1: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    attn: Array2<f64>,
    ln2: LnCache,
    h2: Array2<f64>,
    u: Array2<f64>,
    act: Array2<f64>,
}

/// Saved activations of one forward pass.
pub struct ForwardCache {
    ids: Vec<usize>,
    layers: Vec<LayerCache>,
    lnf: LnCache,
    /// Encoder output, one row per position.
    pub hidden: Array2<f64>,
    head: HeadCache,
}

struct HeadCache {
    z1: Array1<f64>,
    mask: Array1<f64>,
    dropped: Array1<f64>,
}

fn layer_forward(p: &LayerParams, x: Array2<f64>, heads: usize) -> (Array2<f64>, LayerCache) {
    let (seq, hidden) = x.dim();
    let dh = hidden / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let (h1, ln1) = layer_norm(&x, &p.ln1_g, &p.ln1_b);
    let q = linear(&h1, &p.wq, &p.bq);
    let k = linear(&h1, &p.wk, &p.bk);
    let v = linear(&h1, &p.wv, &p.bv);
    let mut attn = Array2::zeros((seq, hidden));
    let mut probs = Vec::with_capacity(heads);
    for j in 0..heads {
        let cols = s![.., j * dh..(j + 1) * dh];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        softmax_rows(&mut scores);
        attn.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        probs.push(scores);
    }
    let x_mid = &x + &linear(&attn, &p.wo, &p.bo);
    let (h2, ln2) = layer_norm(&x_mid, &p.ln2_g, &p.ln2_b);
    let u = linear(&h2, &p.w1, &p.b1);
    let act = u.mapv(gelu);
    let x_out = &x_mid + &linear(&act, &p.w2, &p.b2);
    let cache = LayerCache {
        x_in: x,
        ln1,
        h1,
        q,
        k,
        v,
        probs,
        attn,
        ln2,
        h2,
        u,
        act,
    };
    (x_out, cache)
}

fn add_linear_grads(x: &Array2<f64>, dy: &Array2<f64>, dw: &mut Array2<f64>, db: &mut Array1<f64>) {
    *dw += &x.t().dot(dy);
    *db += &dy.sum_axis(Axis(0));
}

fn layer_backward(p: &LayerParams, c: &LayerCache, dx_out: Array2<f64>, g: &mut LayerParams, heads: usize) -> Array2<f64> {
    let hidden = c.x_in.ncols();
    let dh = hidden / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    // Feed-forward branch.
    add_linear_grads(&c.act, &dx_out, &mut g.w2, &mut g.b2);
    let dact = dx_out.dot(&p.w2.t());
    let mut du = dact;
    Zip::from(&mut du).and(&c.u).for_each(|d, &u| *d *= gelu_grad(u));
    add_linear_grads(&c.h2, &du, &mut g.w1, &mut g.b1);
    let dh2 = du.dot(&p.w1.t());
    let dx_mid = &dx_out + &layer_norm_backward(&dh2, &c.ln2, &p.ln2_g, &mut g.ln2_g, &mut g.ln2_b);

    // Attention branch.
    add_linear_grads(&c.attn, &dx_mid, &mut g.wo, &mut g.bo);
    let dattn = dx_mid.dot(&p.wo.t());
    let mut dq = Array2::zeros(c.q.raw_dim());
    let mut dk = Array2::zeros(c.k.raw_dim());
    let mut dv = Array2::zeros(c.v.raw_dim());
    for j in 0..heads {
        let cols = s![.., j * dh..(j + 1) * dh];
        let a = &c.probs[j];
        let dout = dattn.slice(cols);
        let da = dout.dot(&c.v.slice(cols).t());
        dv.slice_mut(cols).assign(&a.t().dot(&dout));
        let row_dot = (&da * a).sum_axis(Axis(1));
        let ds = a * &(da - &row_dot.insert_axis(Axis(1)));
        dq.slice_mut(cols).assign(&(ds.dot(&c.k.slice(cols)) * scale));
        dk.slice_mut(cols).assign(&(ds.t().dot(&c.q.slice(cols)) * scale));
    }
    add_linear_grads(&c.h1, &dq, &mut g.wq, &mut g.bq);
    add_linear_grads(&c.h1, &dk, &mut g.wk, &mut g.bk);
    add_linear_grads(&c.h1, &dv, &mut g.wv, &mut g.bv);
    let dh1 = dq.dot(&p.wq.t()) + dk.dot(&p.wk.t()) + dv.dot(&p.wv.t());
    dx_mid + layer_norm_backward(&dh1, &c.ln1, &p.ln1_g, &mut g.ln1_g, &mut g.ln1_b)
}

/// Runs the encoder and returns the per-position output vectors.
pub fn encode(params: &ModelParams, ids: &[usize]) -> Result<Array2<f64>> {
    Ok(encode_cached(params, ids)?.0)
}

fn encode_cached(params: &ModelParams, ids: &[usize]) -> Result<(Array2<f64>, Vec<LayerCache>, LnCache)> {
    let dims = &params.dims;
    if ids.len() > dims.max_len {
        return Err(Error::SequenceTooLong {
            length: ids.len(),
            max_len: dims.max_len,
        });
    }
    if ids.is_empty() {
        return Err(Error::InvalidArgument("empty token sequence".into()));
    }
    let mut x = Array2::zeros((ids.len(), dims.hidden));
    for (i, &id) in ids.iter().enumerate() {
        if id >= dims.vocab_size {
            return Err(Error::InvalidArgument(format!("token id {id} outside vocabulary")));
        }
        let row = &params.tok_emb.row(id) + &params.pos_emb.row(i);
        x.row_mut(i).assign(&row);
    }
    let mut caches = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let (next, cache) = layer_forward(layer, x, dims.heads);
        caches.push(cache);
        x = next;
    }
    let (hidden, lnf) = layer_norm(&x, &params.lnf_g, &params.lnf_b);
    Ok((hidden, caches, lnf))
}

/// Classification head applied to position 0 of `hidden`; no other row is read.
pub fn head_logits(params: &ModelParams, hidden: ArrayView2<f64>, mask: Option<ArrayView1<f64>>) -> [f64; 2] {
    head_forward(params, hidden, mask).0
}

fn head_forward(params: &ModelParams, hidden: ArrayView2<f64>, mask: Option<ArrayView1<f64>>) -> ([f64; 2], HeadCache) {
    let cls = hidden.row(0);
    let z1 = cls.dot(&params.head_w1) + &params.head_b1;
    let mask = match mask {
        Some(m) => m.to_owned(),
        None => Array1::ones(z1.len()),
    };
    let dropped = z1.mapv(|v| v.max(0.0)) * &mask;
    let out = dropped.dot(&params.head_w2) + &params.head_b2;
    ([out[0], out[1]], HeadCache { z1, mask, dropped })
}

/// Inverted-dropout mask: kept units are scaled by 1/(1-rate).
pub fn dropout_mask(len: usize, rate: f64, rng: &mut impl Rng) -> Array1<f64> {
    if rate <= 0.0 {
        return Array1::ones(len);
    }
    let keep = 1.0 / (1.0 - rate);
    Array1::from_shape_fn(len, |_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
}

/// Full forward pass. In train mode a dropout mask is drawn from `rng`;
/// eval mode never touches it.
pub fn forward(
    params: &ModelParams,
    ids: &[usize],
    mode: Mode,
    dropout_rate: f64,
    rng: &mut impl Rng,
) -> Result<([f64; 2], ForwardCache)> {
    let (hidden, layers, lnf) = encode_cached(params, ids)?;
    let mask = match mode {
        Mode::Train => Some(dropout_mask(params.dims.head_dim, dropout_rate, rng)),
        Mode::Eval => None,
    };
    let (logits, head) = head_forward(params, hidden.view(), mask.as_ref().map(|m| m.view()));
    Ok((
        logits,
        ForwardCache {
            ids: ids.to_vec(),
            layers,
            lnf,
            hidden,
            head,
        },
    ))
}

pub fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// Cross-entropy of `logits` against class `label` and its gradient.
pub fn cross_entropy(logits: [f64; 2], label: usize) -> (f64, [f64; 2]) {
    let m = logits[0].max(logits[1]);
    let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    let p = softmax2(logits);
    let mut d = p;
    d[label] -= 1.0;
    (lse - logits[label], d)
}

/// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits).
pub fn backward(params: &ModelParams, cache: &ForwardCache, dlogits: [f64; 2], grads: &mut ModelParams) {
    let dl = Array1::from(dlogits.to_vec());
    let h = &cache.head;
    // Head.
    for i in 0..h.dropped.len() {
        for c in 0..2 {
            grads.head_w2[[i, c]] += h.dropped[i] * dl[c];
        }
    }
    grads.head_b2 += &dl;
    let ddropped = params.head_w2.dot(&dl);
    let dz1 = Zip::from(&ddropped)
        .and(&h.mask)
        .and(&h.z1)
        .map_collect(|&d, &m, &z| if z > 0.0 { d * m } else { 0.0 });
    let cls = cache.hidden.row(0);
    for i in 0..cls.len() {
        for j in 0..dz1.len() {
            grads.head_w1[[i, j]] += cls[i] * dz1[j];
        }
    }
    grads.head_b1 += &dz1;
    let dcls = params.head_w1.dot(&dz1);

    let mut dhidden = Array2::zeros(cache.hidden.raw_dim());
    dhidden.row_mut(0).assign(&dcls);
    let mut dx = layer_norm_backward(&dhidden, &cache.lnf, &params.lnf_g, &mut grads.lnf_g, &mut grads.lnf_b);
    for (i, layer) in params.layers.iter().enumerate().rev() {
        dx = layer_backward(layer, &cache.layers[i], dx, &mut grads.layers[i], params.dims.heads);
    }
    for (pos, &id) in cache.ids.iter().enumerate() {
        let row = dx.row(pos);
        let mut t = grads.tok_emb.row_mut(id);
        t += &row;
        let mut p = grads.pos_emb.row_mut(pos);
        p += &row;
    }
}

/// Loss and gradient for one labeled sequence.
pub fn loss_and_grad(
    params: &ModelParams,
    ids: &[usize],
    label: usize,
    mode: Mode,
    dropout_rate: f64,
    rng: &mut impl Rng,
    grads: &mut ModelParams,
) -> Result<(f64, [f64; 2])> {
    let (logits, cache) = forward(params, ids, mode, dropout_rate, rng)?;
    let (loss, dlogits) = cross_entropy(logits, label);
    backward(params, &cache, dlogits, grads);
    Ok((loss, logits))
}
