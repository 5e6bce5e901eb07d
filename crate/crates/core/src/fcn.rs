//! Three-layer 1-D fully convolutional network with global average pooling.
//!
//! Architecture: three blocks of conv -> batch-norm -> ReLU with kernel
//! sizes 7, 5, 3 (same padding, stride 1), then global average pooling and
//! an affine map to two logits. Trained by mini-batch backpropagation with
//! adaptive moment estimation. The TS variant consumes the 495-sample series;
//! the TSM variant consumes the series with the 7 encoded metadata values
//! appended as trailing samples of the same channel (502 inputs).
//!
//! All math is f64 and every parallel reduction has a fixed order, so
//! training is bit-deterministic given the seed.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::model::{Classifier, ModelOutput};
use crate::seeding::stream;

pub const KERNEL_SIZES: [usize; 3] = [7, 5, 3];
const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.9;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FcnVariant {
    /// Series only (495 inputs).
    Ts,
    /// Series plus appended metadata (502 inputs).
    Tsm,
}

impl FcnVariant {
    pub fn input_len(self) -> usize {
        match self {
            FcnVariant::Ts => crate::dataset::TRIMMED_SERIES_LEN,
            FcnVariant::Tsm => crate::dataset::TRIMMED_SERIES_LEN + crate::dataset::META_FEATURES,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FcnConfig {
    #[serde(default = "default_filters")]
    pub filters: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_variant")]
    pub variant: FcnVariant,
    /// Optional cap on training rows, for runtime control.
    #[serde(default)]
    pub train_subsample: Option<usize>,
}

fn default_filters() -> usize {
    64
}
fn default_lr() -> f64 {
    1e-3
}
fn default_epochs() -> usize {
    20
}
fn default_batch() -> usize {
    64
}
fn default_variant() -> FcnVariant {
    FcnVariant::Ts
}

impl Default for FcnConfig {
    fn default() -> Self {
        FcnConfig {
            filters: default_filters(),
            lr: default_lr(),
            epochs: default_epochs(),
            batch_size: default_batch(),
            seed: 0,
            variant: default_variant(),
            train_subsample: None,
        }
    }
}

/// `dst[l] += alpha * src[l + shift]` over the valid overlap.
#[inline]
fn shifted_axpy(dst: &mut [f64], src: &[f64], alpha: f64, shift: isize) {
    let l = dst.len() as isize;
    let lo = (-shift).max(0);
    let hi = (l - shift.max(0)).max(lo);
    let d = &mut dst[lo as usize..hi as usize];
    let s = &src[(lo + shift) as usize..(hi + shift) as usize];
    for (dv, sv) in d.iter_mut().zip(s) {
        *dv += alpha * sv;
    }
}

/// `sum_l a[l] * b[l + shift]` over the valid overlap.
#[inline]
fn shifted_dot(a: &[f64], b: &[f64], shift: isize) -> f64 {
    let l = a.len() as isize;
    let lo = (-shift).max(0);
    let hi = (l - shift.max(0)).max(lo);
    a[lo as usize..hi as usize]
        .iter()
        .zip(&b[(lo + shift) as usize..(hi + shift) as usize])
        .map(|(x, y)| x * y)
        .sum()
}

/// Parameter layout offsets for one conv block.
#[derive(Debug, Clone, Copy)]
struct BlockOffsets {
    w: usize,
    b: usize,
    gamma: usize,
    beta: usize,
    in_ch: usize,
    out_ch: usize,
    k: usize,
}

/// The network: one flat parameter vector plus batch-norm running stats.
pub struct Net {
    pub input_len: usize,
    pub filters: usize,
    params: Vec<f64>,
    blocks: [BlockOffsets; 3],
    head_w: usize,
    head_b: usize,
    running_mean: Vec<Vec<f64>>,
    running_var: Vec<Vec<f64>>,
}

impl Net {
    pub fn new(input_len: usize, filters: usize, seed: u64) -> Net {
        assert!(input_len >= KERNEL_SIZES[0], "input shorter than the first kernel");
        let mut blocks = [BlockOffsets {
            w: 0,
            b: 0,
            gamma: 0,
            beta: 0,
            in_ch: 0,
            out_ch: 0,
            k: 0,
        }; 3];
        let mut off = 0;
        for (i, &k) in KERNEL_SIZES.iter().enumerate() {
            let in_ch = if i == 0 { 1 } else { filters };
            blocks[i] = BlockOffsets {
                w: off,
                b: off + filters * in_ch * k,
                gamma: off + filters * in_ch * k + filters,
                beta: off + filters * in_ch * k + 2 * filters,
                in_ch,
                out_ch: filters,
                k,
            };
            off += filters * in_ch * k + 3 * filters;
        }
        let head_w = off;
        let head_b = off + 2 * filters;
        let n_params = head_b + 2;

        let mut params = vec![0.0; n_params];
        let mut rng = stream(seed, &[]);
        for blk in &blocks {
            let bound = (6.0 / (blk.in_ch * blk.k) as f64).sqrt();
            for p in &mut params[blk.w..blk.b] {
                *p = rng.gen_range(-bound..bound);
            }
            // bias 0, gamma 1, beta 0
            for p in &mut params[blk.gamma..blk.gamma + filters] {
                *p = 1.0;
            }
        }
        let bound = (6.0 / filters as f64).sqrt();
        for p in &mut params[head_w..head_w + 2 * filters] {
            *p = rng.gen_range(-bound..bound);
        }

        Net {
            input_len,
            filters,
            params,
            blocks,
            head_w,
            head_b,
            running_mean: vec![vec![0.0; filters]; 3],
            running_var: vec![vec![1.0; filters]; 3],
        }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn conv_forward(&self, blk: &BlockOffsets, input: &[f64], batch: usize) -> Vec<f64> {
        let l = self.input_len;
        let (cin, cout, k) = (blk.in_ch, blk.out_ch, blk.k);
        let pad = (k / 2) as isize;
        let w = &self.params[blk.w..blk.b];
        let bias = &self.params[blk.b..blk.b + cout];
        let mut out = vec![0.0; batch * cout * l];
        out.par_chunks_mut(l).enumerate().for_each(|(so, ch)| {
            let s = so / cout;
            let o = so % cout;
            ch.fill(bias[o]);
            for i in 0..cin {
                let x = &input[(s * cin + i) * l..(s * cin + i + 1) * l];
                let wb = (o * cin + i) * k;
                for kk in 0..k {
                    shifted_axpy(ch, x, w[wb + kk], kk as isize - pad);
                }
            }
        });
        out
    }

    fn conv_backward(
        &self,
        blk: &BlockOffsets,
        input: &[f64],
        d_out: &[f64],
        batch: usize,
        grads: &mut [f64],
    ) -> Vec<f64> {
        let l = self.input_len;
        let (cin, cout, k) = (blk.in_ch, blk.out_ch, blk.k);
        let pad = (k / 2) as isize;
        let w = &self.params[blk.w..blk.b];

        // dx: same stencil with flipped shifts
        let mut d_in = vec![0.0; batch * cin * l];
        d_in.par_chunks_mut(l).enumerate().for_each(|(si, ch)| {
            let s = si / cin;
            let i = si % cin;
            for o in 0..cout {
                let dy = &d_out[(s * cout + o) * l..(s * cout + o) * l + l];
                let wb = (o * cin + i) * k;
                for kk in 0..k {
                    shifted_axpy(ch, dy, w[wb + kk], pad - kk as isize);
                }
            }
        });

        // dw / db: per output channel, summed over the batch in index order
        let (dw_slice, rest) = grads[blk.w..].split_at_mut(cout * cin * k);
        let db_slice = &mut rest[..cout];
        dw_slice
            .par_chunks_mut(cin * k)
            .zip(db_slice.par_iter_mut())
            .enumerate()
            .for_each(|(o, (dw_o, db_o))| {
                for s in 0..batch {
                    let dy = &d_out[(s * cout + o) * l..(s * cout + o) * l + l];
                    for i in 0..cin {
                        let x = &input[(s * cin + i) * l..(s * cin + i) * l + l];
                        for kk in 0..k {
                            dw_o[i * k + kk] += shifted_dot(dy, x, kk as isize - pad);
                        }
                    }
                    *db_o += dy.iter().sum::<f64>();
                }
            });
        d_in
    }

    /// Train-mode forward for one block's batch-norm: returns normalized
    /// output plus per-channel batch statistics.
    fn bn_forward_train(
        &self,
        blk: &BlockOffsets,
        z: &[f64],
        batch: usize,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let l = self.input_len;
        let c = blk.out_ch;
        let gamma = &self.params[blk.gamma..blk.gamma + c];
        let beta = &self.params[blk.beta..blk.beta + c];
        let count = (batch * l) as f64;

        let stats: Vec<(f64, f64)> = (0..c)
            .into_par_iter()
            .map(|ch| {
                let mut sum = 0.0;
                for s in 0..batch {
                    sum += z[(s * c + ch) * l..(s * c + ch) * l + l].iter().sum::<f64>();
                }
                let mean = sum / count;
                let mut var = 0.0;
                for s in 0..batch {
                    var += z[(s * c + ch) * l..(s * c + ch) * l + l]
                        .iter()
                        .map(|v| (v - mean) * (v - mean))
                        .sum::<f64>();
                }
                (mean, var / count)
            })
            .collect();
        let mean: Vec<f64> = stats.iter().map(|s| s.0).collect();
        let var: Vec<f64> = stats.iter().map(|s| s.1).collect();

        let mut out = vec![0.0; z.len()];
        out.par_chunks_mut(l).enumerate().for_each(|(sc, chunk)| {
            let ch = sc % c;
            let inv = 1.0 / (var[ch] + BN_EPS).sqrt();
            let zs = &z[sc * l..sc * l + l];
            for (o, &v) in chunk.iter_mut().zip(zs) {
                *o = gamma[ch] * (v - mean[ch]) * inv + beta[ch];
            }
        });
        (out, mean, var)
    }

    fn bn_forward_infer(&self, blk: &BlockOffsets, z: &[f64], batch: usize, layer: usize) -> Vec<f64> {
        let l = self.input_len;
        let c = blk.out_ch;
        let gamma = &self.params[blk.gamma..blk.gamma + c];
        let beta = &self.params[blk.beta..blk.beta + c];
        let rm = &self.running_mean[layer];
        let rv = &self.running_var[layer];
        let mut out = vec![0.0; z.len()];
        out.par_chunks_mut(l).enumerate().for_each(|(sc, chunk)| {
            let ch = sc % c;
            let inv = 1.0 / (rv[ch] + BN_EPS).sqrt();
            let zs = &z[sc * l..sc * l + l];
            for (o, &v) in chunk.iter_mut().zip(zs) {
                *o = gamma[ch] * (v - rm[ch]) * inv + beta[ch];
            }
        });
        let _ = batch;
        out
    }

    /// Backward through batch-norm (training statistics).
    #[allow(clippy::too_many_arguments)]
    fn bn_backward(
        &self,
        blk: &BlockOffsets,
        z: &[f64],
        mean: &[f64],
        var: &[f64],
        d_out: &[f64],
        batch: usize,
        grads: &mut [f64],
    ) -> Vec<f64> {
        let l = self.input_len;
        let c = blk.out_ch;
        let gamma = &self.params[blk.gamma..blk.gamma + c];
        let count = (batch * l) as f64;

        let mut d_in = vec![0.0; z.len()];
        let per_channel: Vec<(f64, f64)> = (0..c)
            .into_par_iter()
            .map(|ch| {
                let inv = 1.0 / (var[ch] + BN_EPS).sqrt();
                let mut sum_dy = 0.0;
                let mut sum_dy_xhat = 0.0;
                for s in 0..batch {
                    let base = (s * c + ch) * l;
                    for t in 0..l {
                        let xhat = (z[base + t] - mean[ch]) * inv;
                        let dy = d_out[base + t];
                        sum_dy += dy;
                        sum_dy_xhat += dy * xhat;
                    }
                }
                (sum_dy, sum_dy_xhat)
            })
            .collect();

        d_in.par_chunks_mut(l).enumerate().for_each(|(sc, chunk)| {
            let ch = sc % c;
            let inv = 1.0 / (var[ch] + BN_EPS).sqrt();
            let (sum_dy, sum_dy_xhat) = per_channel[ch];
            let zs = &z[sc * l..sc * l + l];
            let dys = &d_out[sc * l..sc * l + l];
            for ((d, &zv), &dy) in chunk.iter_mut().zip(zs).zip(dys) {
                let xhat = (zv - mean[ch]) * inv;
                *d = gamma[ch] * inv * (dy - sum_dy / count - xhat * sum_dy_xhat / count);
            }
        });

        for ch in 0..c {
            grads[blk.gamma + ch] += per_channel[ch].1;
            grads[blk.beta + ch] += per_channel[ch].0;
        }
        d_in
    }

    /// Inference probabilities for a batch of rows (running BN statistics).
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<[f64; 2]>> {
        if x.n_cols() != self.input_len {
            return Err(Error::ShapeMismatch(format!(
                "expected {} input samples, got {}",
                self.input_len,
                x.n_cols()
            )));
        }
        let mut out = Vec::with_capacity(x.n_rows());
        for chunk_start in (0..x.n_rows()).step_by(256) {
            let batch = (x.n_rows() - chunk_start).min(256);
            let mut input = vec![0.0; batch * self.input_len];
            for s in 0..batch {
                input[s * self.input_len..(s + 1) * self.input_len]
                    .copy_from_slice(x.row(chunk_start + s));
            }
            let mut cur = input;
            for layer in 0..3 {
                let blk = self.blocks[layer];
                let z = self.conv_forward(&blk, &cur, batch);
                let a = self.bn_forward_infer(&blk, &z, batch, layer);
                cur = a;
                cur.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            for s in 0..batch {
                let logits = self.head_logits(&cur, s);
                out.push(softmax2(logits));
            }
        }
        Ok(out)
    }

    fn head_logits(&self, relu3: &[f64], s: usize) -> [f64; 2] {
        let l = self.input_len;
        let f = self.filters;
        let w = &self.params[self.head_w..self.head_w + 2 * f];
        let b = &self.params[self.head_b..self.head_b + 2];
        let mut logits = [b[0], b[1]];
        for ch in 0..f {
            let g = relu3[(s * f + ch) * l..(s * f + ch) * l + l].iter().sum::<f64>() / l as f64;
            logits[0] += w[ch] * g;
            logits[1] += w[f + ch] * g;
        }
        logits
    }

    /// Mean cross-entropy of a batch in train mode (batch statistics), with
    /// no state mutation. Used directly by finite-difference checks.
    pub fn loss(&self, input: &[f64], labels: &[u8], batch: usize) -> f64 {
        self.forward_train(input, labels, batch).0
    }

    #[allow(clippy::type_complexity)]
    fn forward_train(
        &self,
        input: &[f64],
        labels: &[u8],
        batch: usize,
    ) -> (f64, Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)>, Vec<[f64; 2]>) {
        // per layer: (conv input, pre-BN z, batch mean, batch var)
        let mut caches = Vec::with_capacity(3);
        let mut cur = input.to_vec();
        for layer in 0..3 {
            let blk = self.blocks[layer];
            let z = self.conv_forward(&blk, &cur, batch);
            let (mut a, mean, var) = self.bn_forward_train(&blk, &z, batch);
            a.iter_mut().for_each(|v| *v = v.max(0.0));
            caches.push((cur, z, mean, var));
            cur = a;
        }
        let mut loss = 0.0;
        let mut probas = Vec::with_capacity(batch);
        for s in 0..batch {
            let logits = self.head_logits(&cur, s);
            let p = softmax2(logits);
            let py = p[labels[s] as usize].max(1e-300);
            loss -= py.ln();
            probas.push(p);
        }
        caches.push((cur, Vec::new(), Vec::new(), Vec::new())); // relu3 activations
        (loss / batch as f64, caches, probas)
    }

    /// Loss plus parameter gradients (accumulated into `grads`, which must be
    /// zeroed by the caller). Returns (loss, per-layer batch stats) so the
    /// trainer can update running statistics.
    pub fn loss_and_grad(
        &self,
        input: &[f64],
        labels: &[u8],
        batch: usize,
        grads: &mut [f64],
    ) -> (f64, Vec<(Vec<f64>, Vec<f64>)>) {
        assert_eq!(grads.len(), self.params.len());
        let l = self.input_len;
        let f = self.filters;
        let (loss, mut caches, probas) = self.forward_train(input, labels, batch);
        let relu3 = caches.pop().unwrap().0;

        // head backward
        let w = &self.params[self.head_w..self.head_w + 2 * f];
        let mut d_relu3 = vec![0.0; relu3.len()];
        {
            let inv_l = 1.0 / l as f64;
            let inv_b = 1.0 / batch as f64;
            for s in 0..batch {
                let y = labels[s] as usize;
                let mut dlogits = probas[s];
                dlogits[y] -= 1.0;
                dlogits[0] *= inv_b;
                dlogits[1] *= inv_b;
                for ch in 0..f {
                    let g = relu3[(s * f + ch) * l..(s * f + ch) * l + l]
                        .iter()
                        .sum::<f64>()
                        * inv_l;
                    grads[self.head_w + ch] += dlogits[0] * g;
                    grads[self.head_w + f + ch] += dlogits[1] * g;
                    let dg = dlogits[0] * w[ch] + dlogits[1] * w[f + ch];
                    let dpos = dg * inv_l;
                    let base = (s * f + ch) * l;
                    for t in 0..l {
                        d_relu3[base + t] = dpos;
                    }
                }
                grads[self.head_b] += dlogits[0];
                grads[self.head_b + 1] += dlogits[1];
            }
        }

        // blocks backward, last to first
        let mut d_cur = d_relu3;
        let mut act_above = relu3;
        let mut batch_stats = vec![(Vec::new(), Vec::new()); 3];
        for layer in (0..3).rev() {
            let blk = self.blocks[layer];
            let (conv_in, z, mean, var) = caches.pop().unwrap();
            // ReLU mask on this layer's activations
            for (d, &a) in d_cur.iter_mut().zip(&act_above) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            let d_bn = self.bn_backward(&blk, &z, &mean, &var, &d_cur, batch, grads);
            d_cur = self.conv_backward(&blk, &conv_in, &d_bn, batch, grads);
            act_above = conv_in;
            batch_stats[layer] = (mean, var);
        }
        (loss, batch_stats)
    }

    fn update_running_stats(&mut self, stats: &[(Vec<f64>, Vec<f64>)]) {
        for layer in 0..3 {
            let (mean, var) = &stats[layer];
            for ch in 0..self.filters {
                self.running_mean[layer][ch] =
                    BN_MOMENTUM * self.running_mean[layer][ch] + (1.0 - BN_MOMENTUM) * mean[ch];
                self.running_var[layer][ch] =
                    BN_MOMENTUM * self.running_var[layer][ch] + (1.0 - BN_MOMENTUM) * var[ch];
            }
        }
    }
}

fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    [e0 / (e0 + e1), e1 / (e0 + e1)]
}

pub struct FcnModel {
    net: Net,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
}

impl FcnModel {
    pub fn net(&self) -> &Net {
        &self.net
    }
}

impl Classifier for FcnModel {
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput> {
        Ok(ModelOutput::Proba(self.net.predict_proba(x)?))
    }
}

/// Train on a design matrix whose width matches the variant's input length.
pub fn fcn_train(train: &FeatureMatrix, cfg: &FcnConfig) -> Result<FcnModel> {
    if cfg.filters == 0 || cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("filters and batch_size must be >= 1".into()));
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::InvalidConfig("lr must be positive".into()));
    }
    let pos = train.labels().iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == train.n_rows() {
        return Err(Error::SingleClass);
    }

    let mut rng = stream(cfg.seed, &[]);
    let mut indices: Vec<usize> = (0..train.n_rows()).collect();
    if let Some(cap) = cfg.train_subsample {
        if cap < indices.len() {
            for i in 0..cap {
                let j = rng.gen_range(i..indices.len());
                indices.swap(i, j);
            }
            indices.truncate(cap);
            indices.sort_unstable();
        }
    }

    let input_len = train.n_cols();
    let mut net = Net::new(input_len, cfg.filters, cfg.seed);
    let mut adam_m = vec![0.0; net.n_params()];
    let mut adam_v = vec![0.0; net.n_params()];
    let mut grads = vec![0.0; net.n_params()];
    let mut step = 0u64;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    let mut input_buf = vec![0.0; cfg.batch_size * input_len];
    let mut label_buf = vec![0u8; cfg.batch_size];
    for epoch in 0..cfg.epochs {
        // fixed shuffle order per epoch
        for i in (1..indices.len()).rev() {
            let j = rng.gen_range(0..=i);
            indices.swap(i, j);
        }
        let mut loss_sum = 0.0;
        for chunk in indices.chunks(cfg.batch_size) {
            let batch = chunk.len();
            for (s, &row) in chunk.iter().enumerate() {
                input_buf[s * input_len..(s + 1) * input_len].copy_from_slice(train.row(row));
                label_buf[s] = train.labels()[row];
            }
            grads.iter_mut().for_each(|g| *g = 0.0);
            let (loss, stats) =
                net.loss_and_grad(&input_buf[..batch * input_len], &label_buf[..batch], batch, &mut grads);
            if !loss.is_finite() {
                return Err(Error::DivergedLoss { epoch });
            }
            loss_sum += loss * batch as f64;
            net.update_running_stats(&stats);

            step += 1;
            let bc1 = 1.0 - ADAM_BETA1.powi(step as i32);
            let bc2 = 1.0 - ADAM_BETA2.powi(step as i32);
            let params = net.params_mut();
            for p in 0..params.len() {
                adam_m[p] = ADAM_BETA1 * adam_m[p] + (1.0 - ADAM_BETA1) * grads[p];
                adam_v[p] = ADAM_BETA2 * adam_v[p] + (1.0 - ADAM_BETA2) * grads[p] * grads[p];
                let m_hat = adam_m[p] / bc1;
                let v_hat = adam_v[p] / bc2;
                params[p] -= cfg.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
        epoch_losses.push(loss_sum / indices.len() as f64);
    }

    Ok(FcnModel { net, epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[(Vec<f64>, u8)]) -> FeatureMatrix {
        let d = rows[0].0.len();
        FeatureMatrix::from_parts(
            rows.iter().flat_map(|(r, _)| r.iter().copied()).collect(),
            d,
            rows.iter().map(|&(_, l)| l).collect(),
            rows.iter().map(|_| "A".to_string()).collect(),
            (0..d).map(|i| format!("c{i}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zeroed_net_outputs_half_half() {
        let mut net = Net::new(20, 4, 0);
        net.params_mut().iter_mut().for_each(|p| *p = 0.0);
        // restore gamma = 1 so BN stays well-defined
        for layer in 0..3 {
            let blk = net.blocks[layer];
            for p in &mut net.params_mut()[blk.gamma..blk.gamma + 4] {
                *p = 1.0;
            }
        }
        let rows: Vec<(Vec<f64>, u8)> = (0..3).map(|_| (vec![0.0; 20], 0)).collect();
        let m = matrix(&rows);
        for p in net.predict_proba(&m).unwrap() {
            assert_eq!(p, [0.5, 0.5]);
        }
    }

    #[test]
    fn output_shape_and_softmax_validity() {
        let net = Net::new(495, 4, 3);
        let mut rng = stream(1, &[]);
        let rows: Vec<(Vec<f64>, u8)> = (0..8)
            .map(|_| ((0..495).map(|_| rng.gen_range(-5.0..5.0)).collect(), 0))
            .collect();
        let m = matrix(&rows);
        let proba = net.predict_proba(&m).unwrap();
        assert_eq!(proba.len(), 8);
        for p in proba {
            assert!(p[0] > 0.0 && p[1] > 0.0);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn gap_of_constant_map_is_the_constant() {
        // head logits on a constant relu3 map reduce to w . c + b
        let mut net = Net::new(10, 2, 0);
        let n = net.n_params();
        net.params_mut()[..n].iter_mut().for_each(|p| *p = 0.0);
        let hw = net.head_w;
        net.params_mut()[hw] = 1.0; // logit0 = gap(channel 0)
        let relu3 = vec![3.5; 2 * 10]; // one sample, two channels, constant 3.5
        let logits = net.head_logits(&relu3, 0);
        assert!((logits[0] - 3.5).abs() < 1e-12);
        assert_eq!(logits[1], 0.0);
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let net = Net::new(30, 2, 0);
        let m = matrix(&[(vec![0.0; 20], 0)]);
        assert!(matches!(net.predict_proba(&m), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let net = Net::new(20, 8, 7);
        let mut rng = stream(13, &[]);
        let batch = 4;
        let input: Vec<f64> = (0..batch * 20).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let labels = [0u8, 1, 1, 0];

        let mut grads = vec![0.0; net.n_params()];
        net.loss_and_grad(&input, &labels, batch, &mut grads);

        let eps = 1e-4;
        let mut net = net;
        let mut agree = 0usize;
        let n = net.n_params();
        for p in 0..n {
            let orig = net.params()[p];
            net.params_mut()[p] = orig + eps;
            let up = net.loss(&input, &labels, batch);
            net.params_mut()[p] = orig - eps;
            let down = net.loss(&input, &labels, batch);
            net.params_mut()[p] = orig;
            let fd = (up - down) / (2.0 * eps);
            let denom = grads[p].abs().max(fd.abs()).max(1e-8);
            if ((grads[p] - fd) / denom).abs() <= 1e-3 {
                agree += 1;
            }
        }
        let frac = agree as f64 / n as f64;
        assert!(frac >= 0.99, "only {frac:.4} of {n} gradients agree");
    }

    fn separable_set(n: usize, len: usize, seed: u64) -> FeatureMatrix {
        let mut rng = stream(seed, &[]);
        let rows: Vec<(Vec<f64>, u8)> = (0..n)
            .map(|_| {
                let y = rng.gen_range(0..2) as u8;
                let amp = if y == 1 { 2.0 } else { 0.7 };
                let x: Vec<f64> = (0..len)
                    .map(|t| amp * (t as f64 * 0.35).sin() + rng.gen_range(-0.4..0.4))
                    .collect();
                (x, y)
            })
            .collect();
        matrix(&rows)
    }

    #[test]
    fn training_loss_falls_on_separable_data() {
        let m = separable_set(400, 40, 5);
        let cfg = FcnConfig {
            filters: 6,
            lr: 2e-3,
            epochs: 6,
            batch_size: 32,
            seed: 2,
            variant: FcnVariant::Ts,
            train_subsample: None,
        };
        let model = fcn_train(&m, &cfg).unwrap();
        assert!(model.epoch_losses[5] < model.epoch_losses[0]);
        assert!(model.epoch_losses.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn training_is_deterministic_and_prediction_pure() {
        let m = separable_set(120, 30, 8);
        let cfg = FcnConfig {
            filters: 4,
            lr: 1e-3,
            epochs: 2,
            batch_size: 16,
            seed: 11,
            variant: FcnVariant::Ts,
            train_subsample: Some(100),
        };
        let a = fcn_train(&m, &cfg).unwrap();
        let b = fcn_train(&m, &cfg).unwrap();
        assert_eq!(a.epoch_losses, b.epoch_losses);
        let pa = a.net().predict_proba(&m).unwrap();
        let pb = b.net().predict_proba(&m).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(pa, a.net().predict_proba(&m).unwrap());
    }

    #[test]
    fn single_class_rejected() {
        let rows: Vec<(Vec<f64>, u8)> = (0..10).map(|i| (vec![i as f64; 20], 1u8)).collect();
        let m = matrix(&rows);
        assert!(matches!(
            fcn_train(&m, &FcnConfig::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn variant_input_lengths() {
        assert_eq!(FcnVariant::Ts.input_len(), 495);
        assert_eq!(FcnVariant::Tsm.input_len(), 502);
    }
}
