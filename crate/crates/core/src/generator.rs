//! Denoising diffusion over 25-d pose vectors conditioned on 4096-d object
//! encodings: cosine noise schedule, a small conditional residual MLP with
//! hand-rolled backprop, Adam training with warmup+cosine learning rate,
//! EMA weights, and ancestral sampling.

use std::io::{Read, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::POSE_DIM;

pub const DEFAULT_TIMESTEPS: usize = 100;
pub const DEFAULT_COND_DIM: usize = 4096;
const COSINE_S: f64 = 0.008;
const BETA_CAP: f64 = 0.999;
const MODEL_MAGIC: [u8; 4] = *b"GDPM";
const MODEL_VERSION: u32 = 1;

/// Forward-process noise schedule.
#[derive(Debug, Clone)]
pub struct NoiseSchedule {
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
}

/// Squared-cosine schedule with capped betas.
pub fn make_schedule(t_steps: usize) -> Result<NoiseSchedule> {
    if t_steps < 2 {
        return Err(Error::InvalidArgument("schedule needs at least 2 steps".into()));
    }
    let f = |t: f64| {
        let x = (t / t_steps as f64 + COSINE_S) / (1.0 + COSINE_S) * std::f64::consts::FRAC_PI_2;
        x.cos().powi(2)
    };
    let mut betas = Vec::with_capacity(t_steps);
    for i in 0..t_steps {
        let beta = 1.0 - f((i + 1) as f64) / f(i as f64);
        betas.push(beta.min(BETA_CAP));
    }
    let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bars = Vec::with_capacity(t_steps);
    let mut prod = 1.0;
    for &a in &alphas {
        prod *= a;
        alpha_bars.push(prod);
    }
    Ok(NoiseSchedule {
        betas,
        alphas,
        alpha_bars,
    })
}

impl NoiseSchedule {
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) noise.
pub fn forward_diffuse(
    x0: &[f64; POSE_DIM],
    t: usize,
    noise: &[f64; POSE_DIM],
    schedule: &NoiseSchedule,
) -> Result<[f64; POSE_DIM]> {
    if t >= schedule.len() {
        return Err(Error::InvalidArgument(format!(
            "timestep {t} out of range 0..{}",
            schedule.len()
        )));
    }
    let ab = schedule.alpha_bars[t];
    let (ca, cb) = (ab.sqrt(), (1.0 - ab).sqrt());
    let mut out = [0.0; POSE_DIM];
    for k in 0..POSE_DIM {
        out[k] = ca * x0[k] + cb * noise[k];
    }
    Ok(out)
}

/// Per-dimension affine normalization statistics for the 25-d poses.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mean: [f64; POSE_DIM],
    pub std: [f64; POSE_DIM],
}

impl Normalization {
    pub fn fit(poses: &[[f64; POSE_DIM]]) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::InvalidArgument("cannot fit statistics on no poses".into()));
        }
        let n = poses.len() as f64;
        let mut mean = [0.0; POSE_DIM];
        for p in poses {
            for k in 0..POSE_DIM {
                mean[k] += p[k];
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut std = [0.0; POSE_DIM];
        for p in poses {
            for k in 0..POSE_DIM {
                std[k] += (p[k] - mean[k]).powi(2);
            }
        }
        for s in &mut std {
            // Floor keeps constant dimensions usable.
            *s = (*s / n).sqrt().max(1e-6);
        }
        Ok(Self { mean, std })
    }

    pub fn normalize(&self, x: &[f64; POSE_DIM]) -> [f64; POSE_DIM] {
        let mut out = [0.0; POSE_DIM];
        for k in 0..POSE_DIM {
            out[k] = (x[k] - self.mean[k]) / self.std[k];
        }
        out
    }

    pub fn denormalize(&self, x: &[f64; POSE_DIM]) -> [f64; POSE_DIM] {
        let mut out = [0.0; POSE_DIM];
        for k in 0..POSE_DIM {
            out[k] = x[k] * self.std[k] + self.mean[k];
        }
        out
    }
}

/// One training example.
#[derive(Debug, Clone)]
pub struct PoseSample {
    pub pose25: [f64; POSE_DIM],
    pub condition: Vec<f64>,
    pub object_id: String,
    pub u_dir: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub grad_clip: f64,
    pub warmup_steps: usize,
    pub ema_power: f64,
    pub width: usize,
    pub depth: usize,
    pub temb_dim: usize,
    pub timesteps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            epochs: 200,
            lr: 1e-4,
            weight_decay: 1e-6,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            grad_clip: 1.0,
            warmup_steps: 500,
            ema_power: 0.75,
            width: 256,
            depth: 4,
            temb_dim: 64,
            timesteps: DEFAULT_TIMESTEPS,
        }
    }
}

impl TrainConfig {
    pub fn load_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("train config: {e}")))
    }

    /// Linear warmup to the base rate, then a cosine decay to zero.
    pub fn lr_at(&self, step: usize, total_steps: usize) -> f64 {
        if step < self.warmup_steps {
            return self.lr * step as f64 / self.warmup_steps as f64;
        }
        if total_steps <= self.warmup_steps {
            return self.lr;
        }
        let progress = (step - self.warmup_steps) as f64 / (total_steps - self.warmup_steps) as f64;
        self.lr * 0.5 * (1.0 + (std::f64::consts::PI * progress.min(1.0)).cos())
    }
}

/// Dense row-major matrix with a flat gradient-compatible layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn init(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        // Uniform fan-in scaling.
        let bound = 1.0 / (cols.max(1) as f64).sqrt();
        Self {
            rows,
            cols,
            data: (0..rows * cols)
                .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound)
                .collect(),
        }
    }

    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            out[r] = acc;
        }
    }

    /// out += transpose(self) * g
    fn matvec_t_add(&self, g: &[f64], out: &mut [f64]) {
        debug_assert_eq!(g.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let gr = g[r];
            for (o, w) in out.iter_mut().zip(row) {
                *o += gr * w;
            }
        }
    }

    /// data += g outer x
    fn add_outer(&mut self, g: &[f64], x: &[f64]) {
        for r in 0..self.rows {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            let gr = g[r];
            for (w, v) in row.iter_mut().zip(x) {
                *w += gr * v;
            }
        }
    }
}

/// Conditional residual MLP predicting the injected noise.
///
/// Each residual block sees the running state plus projections of the
/// timestep embedding and the condition vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub width: usize,
    pub depth: usize,
    pub cond_dim: usize,
    pub temb_dim: usize,
    /// Fixed order: w_in, b_in, w_cond, b_cond, w_temb, b_temb, then per
    /// block (w1, b1, w2, b2), then w_out, b_out, then the input-gain head
    /// (wg1, bg1, wg2, bg2).
    pub tensors: Vec<Tensor>,
}

impl Mlp {
    pub fn init(width: usize, depth: usize, cond_dim: usize, temb_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tensors = vec![
            Tensor::init(width, POSE_DIM, rng),
            Tensor::zeros(width, 1),
            Tensor::init(width, cond_dim, rng),
            Tensor::zeros(width, 1),
            Tensor::init(width, temb_dim, rng),
            Tensor::zeros(width, 1),
        ];
        for _ in 0..depth {
            tensors.push(Tensor::init(width, width, rng));
            tensors.push(Tensor::zeros(width, 1));
            tensors.push(Tensor::init(width, width, rng));
            tensors.push(Tensor::zeros(width, 1));
        }
        tensors.push(Tensor::init(POSE_DIM, width, rng));
        tensors.push(Tensor::zeros(POSE_DIM, 1));
        // Time-conditioned scalar gain on the input skip: epsilon prediction
        // is dominated by x_t / sqrt(1 - alpha_bar_t), so giving the network
        // a direct multiplicative path speeds up fitting enormously.
        tensors.push(Tensor::init(temb_dim, temb_dim, rng));
        tensors.push(Tensor::zeros(temb_dim, 1));
        tensors.push(Tensor::init(1, temb_dim, rng));
        tensors.push(Tensor::zeros(1, 1));
        Self {
            width,
            depth,
            cond_dim,
            temb_dim,
            tensors,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            width: self.width,
            depth: self.depth,
            cond_dim: self.cond_dim,
            temb_dim: self.temb_dim,
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.rows, t.cols))
                .collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    fn block(&self, d: usize) -> (&Tensor, &Tensor, &Tensor, &Tensor) {
        let base = 6 + 4 * d;
        (
            &self.tensors[base],
            &self.tensors[base + 1],
            &self.tensors[base + 2],
            &self.tensors[base + 3],
        )
    }

    pub fn sinusoidal_embedding(&self, t: usize) -> Vec<f64> {
        let half = self.temb_dim / 2;
        let mut emb = vec![0.0; self.temb_dim];
        for i in 0..half {
            let freq = (10000f64).powf(-(i as f64) / half.max(1) as f64);
            emb[2 * i] = (t as f64 * freq).sin();
            emb[2 * i + 1] = (t as f64 * freq).cos();
        }
        emb
    }

    pub fn forward(&self, x: &[f64; POSE_DIM], t: usize, cond: &[f64]) -> Result<[f64; POSE_DIM]> {
        Ok(self.forward_cached(x, t, cond)?.output)
    }

    fn forward_cached(&self, x: &[f64; POSE_DIM], t: usize, cond: &[f64]) -> Result<ForwardCache> {
        if cond.len() != self.cond_dim {
            return Err(Error::DimensionMismatch {
                expected: self.cond_dim,
                got: cond.len(),
            });
        }
        let w = self.width;
        let temb = self.sinusoidal_embedding(t);

        let mut c = vec![0.0; w];
        self.tensors[2].matvec(cond, &mut c);
        for (v, b) in c.iter_mut().zip(&self.tensors[3].data) {
            *v += b;
        }
        let mut e = vec![0.0; w];
        self.tensors[4].matvec(&temb, &mut e);
        for (v, b) in e.iter_mut().zip(&self.tensors[5].data) {
            *v += b;
        }
        let mut h = vec![0.0; w];
        self.tensors[0].matvec(x, &mut h);
        for (v, b) in h.iter_mut().zip(&self.tensors[1].data) {
            *v += b;
        }

        let mut pres = Vec::with_capacity(self.depth);
        let mut acts = Vec::with_capacity(self.depth);
        for d in 0..self.depth {
            let (w1, b1, w2, b2) = self.block(d);
            let pre: Vec<f64> = h
                .iter()
                .zip(c.iter().zip(&e))
                .map(|(hv, (cv, ev))| hv + cv + ev)
                .collect();
            let mut a = vec![0.0; w];
            w1.matvec(&pre, &mut a);
            for (v, b) in a.iter_mut().zip(&b1.data) {
                *v += b;
            }
            let r: Vec<f64> = a.iter().map(|v| v.max(0.0)).collect();
            let mut o = vec![0.0; w];
            w2.matvec(&r, &mut o);
            for ((hv, ov), b) in h.iter_mut().zip(&o).zip(&b2.data) {
                *hv += ov + b;
            }
            pres.push(pre);
            acts.push(a);
        }

        let n_t = self.tensors.len();
        let mut y = [0.0; POSE_DIM];
        self.tensors[n_t - 6].matvec(&h, &mut y);
        for (v, b) in y.iter_mut().zip(&self.tensors[n_t - 5].data) {
            *v += b;
        }

        // Scalar input gain from the timestep embedding.
        let mut ga = vec![0.0; self.temb_dim];
        self.tensors[n_t - 4].matvec(&temb, &mut ga);
        for (v, b) in ga.iter_mut().zip(&self.tensors[n_t - 3].data) {
            *v += b;
        }
        let gr: Vec<f64> = ga.iter().map(|v| v.max(0.0)).collect();
        let mut gain = [0.0; 1];
        self.tensors[n_t - 2].matvec(&gr, &mut gain);
        let gain = gain[0] + self.tensors[n_t - 1].data[0];
        for (v, xv) in y.iter_mut().zip(x.iter()) {
            *v += gain * xv;
        }
        Ok(ForwardCache {
            input: *x,
            temb,
            pres,
            acts,
            h_final: h,
            gain_act: ga,
            gain,
            output: y,
        })
    }

    /// Accumulate gradients for one sample given dL/dy.
    fn backward(&self, cache: &ForwardCache, dy: &[f64; POSE_DIM], cond: &[f64], grads: &mut Mlp) {
        let w = self.width;
        let n_t = self.tensors.len();

        grads.tensors[n_t - 6].add_outer(dy, &cache.h_final);
        for (g, d) in grads.tensors[n_t - 5].data.iter_mut().zip(dy) {
            *g += d;
        }
        let mut dh = vec![0.0; w];
        self.tensors[n_t - 6].matvec_t_add(dy, &mut dh);

        // Gain head: y += gain * x with gain = wg2 relu(wg1 temb + bg1) + bg2.
        let dgain: f64 = dy.iter().zip(&cache.input).map(|(d, x)| d * x).sum();
        grads.tensors[n_t - 1].data[0] += dgain;
        let gr: Vec<f64> = cache.gain_act.iter().map(|v| v.max(0.0)).collect();
        grads.tensors[n_t - 2].add_outer(&[dgain], &gr);
        let mut dgr = vec![0.0; self.temb_dim];
        self.tensors[n_t - 2].matvec_t_add(&[dgain], &mut dgr);
        let dga: Vec<f64> = dgr
            .iter()
            .zip(&cache.gain_act)
            .map(|(g, a)| if *a > 0.0 { *g } else { 0.0 })
            .collect();
        grads.tensors[n_t - 4].add_outer(&dga, &cache.temb);
        for (g, v) in grads.tensors[n_t - 3].data.iter_mut().zip(&dga) {
            *g += v;
        }
        let _ = cache.gain;

        let mut dc = vec![0.0; w];
        let mut de = vec![0.0; w];
        for d in (0..self.depth).rev() {
            let (w1, _, w2, _) = self.block(d);
            let base = 6 + 4 * d;
            // h_next = h + w2 relu(w1 pre + b1) + b2, with pre = h + c + e.
            let do_ = dh.clone();
            for (g, v) in grads.tensors[base + 3].data.iter_mut().zip(&do_) {
                *g += v;
            }
            let mut dr = vec![0.0; w];
            w2.matvec_t_add(&do_, &mut dr);
            grads.tensors[base + 2].add_outer(
                &do_,
                &cache.acts[d].iter().map(|v| v.max(0.0)).collect::<Vec<_>>(),
            );
            let da: Vec<f64> = dr
                .iter()
                .zip(&cache.acts[d])
                .map(|(g, a)| if *a > 0.0 { *g } else { 0.0 })
                .collect();
            grads.tensors[base].add_outer(&da, &cache.pres[d]);
            for (g, v) in grads.tensors[base + 1].data.iter_mut().zip(&da) {
                *g += v;
            }
            let mut dpre = vec![0.0; w];
            w1.matvec_t_add(&da, &mut dpre);
            for k in 0..w {
                dh[k] += dpre[k];
                dc[k] += dpre[k];
                de[k] += dpre[k];
            }
        }

        grads.tensors[0].add_outer(&dh, &cache.input);
        for (g, v) in grads.tensors[1].data.iter_mut().zip(&dh) {
            *g += v;
        }
        grads.tensors[2].add_outer(&dc, cond);
        for (g, v) in grads.tensors[3].data.iter_mut().zip(&dc) {
            *g += v;
        }
        grads.tensors[4].add_outer(&de, &cache.temb);
        for (g, v) in grads.tensors[5].data.iter_mut().zip(&de) {
            *g += v;
        }
    }
}

struct ForwardCache {
    input: [f64; POSE_DIM],
    temb: Vec<f64>,
    pres: Vec<Vec<f64>>,
    acts: Vec<Vec<f64>>,
    h_final: Vec<f64>,
    gain_act: Vec<f64>,
    gain: f64,
    output: [f64; POSE_DIM],
}

/// EMA decay at an optimizer step: (1 - (1+step)^-power), clamped.
pub fn ema_decay(step: usize, power: f64) -> f64 {
    (1.0 - (1.0 + step as f64).powf(-power)).clamp(0.0, 0.9999)
}

/// ema <- decay ema + (1-decay) params.
pub fn ema_update(ema: &mut Mlp, params: &Mlp, step: usize, power: f64) -> Result<()> {
    if ema.tensors.len() != params.tensors.len() {
        return Err(Error::DimensionMismatch {
            expected: params.tensors.len(),
            got: ema.tensors.len(),
        });
    }
    let decay = ema_decay(step, power);
    for (e, p) in ema.tensors.iter_mut().zip(&params.tensors) {
        if e.data.len() != p.data.len() {
            return Err(Error::DimensionMismatch {
                expected: p.data.len(),
                got: e.data.len(),
            });
        }
        for (ev, pv) in e.data.iter_mut().zip(&p.data) {
            *ev = decay * *ev + (1.0 - decay) * pv;
        }
    }
    Ok(())
}

/// One point of the loss curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

pub fn write_loss_csv(path: impl AsRef<Path>, curve: &[LossPoint]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "step,loss,lr")?;
    for p in curve {
        writeln!(f, "{},{},{}", p.step, p.loss, p.lr)?;
    }
    Ok(())
}

pub struct TrainResult {
    pub params: Mlp,
    pub ema: Mlp,
    pub norm: Normalization,
    pub schedule: NoiseSchedule,
    pub loss_curve: Vec<LossPoint>,
}

struct Adam {
    m: Mlp,
    v: Mlp,
    step: usize,
}

impl Adam {
    fn new(model: &Mlp) -> Self {
        Self {
            m: model.zeros_like(),
            v: model.zeros_like(),
            step: 0,
        }
    }

    fn apply(&mut self, model: &mut Mlp, grads: &Mlp, lr: f64, cfg: &TrainConfig) {
        self.step += 1;
        let b1c = 1.0 - cfg.beta1.powi(self.step as i32);
        let b2c = 1.0 - cfg.beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in model
            .tensors
            .iter_mut()
            .zip(&grads.tensors)
            .zip(self.m.tensors.iter_mut().zip(self.v.tensors.iter_mut()))
        {
            for k in 0..p.data.len() {
                let gk = g.data[k];
                m.data[k] = cfg.beta1 * m.data[k] + (1.0 - cfg.beta1) * gk;
                v.data[k] = cfg.beta2 * v.data[k] + (1.0 - cfg.beta2) * gk * gk;
                let mh = m.data[k] / b1c;
                let vh = v.data[k] / b2c;
                // Decoupled weight decay.
                p.data[k] -= lr * (mh / (vh.sqrt() + cfg.eps) + cfg.weight_decay * p.data[k]);
            }
        }
    }
}

/// Train a denoiser with the standard noise-prediction objective.
/// Single-threaded and deterministic per seed.
pub fn train(dataset: &[PoseSample], config: &TrainConfig, seed: u64) -> Result<TrainResult> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty training dataset".into()));
    }
    let cond_dim = dataset[0].condition.len();
    for s in dataset {
        if s.condition.len() != cond_dim {
            return Err(Error::DimensionMismatch {
                expected: cond_dim,
                got: s.condition.len(),
            });
        }
        if !s.pose25.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("pose in training dataset".into()));
        }
    }
    let schedule = make_schedule(config.timesteps)?;
    let poses: Vec<[f64; POSE_DIM]> = dataset.iter().map(|s| s.pose25).collect();
    let norm = Normalization::fit(&poses)?;
    let normalized: Vec<[f64; POSE_DIM]> = poses.iter().map(|p| norm.normalize(p)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Mlp::init(config.width, config.depth, cond_dim, config.temb_dim, &mut rng);
    let mut ema = model.clone();
    let mut adam = Adam::new(&model);

    let n = dataset.len();
    let batches_per_epoch = n.div_ceil(config.batch_size);
    let total_steps = batches_per_epoch * config.epochs;
    let mut curve = Vec::with_capacity(total_steps);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        // Fisher-Yates shuffle from the training stream.
        for i in (1..n).rev() {
            indices.swap(i, rng.random_range(0..=i));
        }
        for batch in indices.chunks(config.batch_size) {
            let lr = config.lr_at(step, total_steps);
            let mut grads = model.zeros_like();
            let mut loss = 0.0;
            let scale = 1.0 / (batch.len() * POSE_DIM) as f64;
            for &i in batch {
                let t = rng.random_range(0..schedule.len());
                let mut noise = [0.0; POSE_DIM];
                for v in &mut noise {
                    *v = rng.sample(StandardNormal);
                }
                let x_t = forward_diffuse(&normalized[i], t, &noise, &schedule)?;
                let cache = model.forward_cached(&x_t, t, &dataset[i].condition)?;
                let mut dy = [0.0; POSE_DIM];
                for k in 0..POSE_DIM {
                    let diff = cache.output[k] - noise[k];
                    loss += diff * diff * scale;
                    dy[k] = 2.0 * diff * scale;
                }
                model.backward(&cache, &dy, &dataset[i].condition, &mut grads);
            }
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss at epoch {epoch}, step {step}"
                )));
            }
            clip_gradients(&mut grads, config.grad_clip);
            adam.apply(&mut model, &grads, lr, config);
            ema_update(&mut ema, &model, step, config.ema_power)?;
            curve.push(LossPoint { step, loss, lr });
            step += 1;
        }
    }

    Ok(TrainResult {
        params: model,
        ema,
        norm,
        schedule,
        loss_curve: curve,
    })
}

fn clip_gradients(grads: &mut Mlp, max_norm: f64) {
    let sq: f64 = grads
        .tensors
        .iter()
        .map(|t| t.data.iter().map(|v| v * v).sum::<f64>())
        .sum();
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for t in &mut grads.tensors {
            for v in &mut t.data {
                *v *= s;
            }
        }
    }
}

/// One reverse step x_t -> x_{t-1} given the predicted noise. The x0
/// estimate is clipped to [-1, 1] in normalized space. Returns the clipped
/// x0 estimate alongside the new state.
pub fn reverse_step(
    x_t: &[f64; POSE_DIM],
    eps: &[f64; POSE_DIM],
    t: usize,
    schedule: &NoiseSchedule,
    noise: Option<&[f64; POSE_DIM]>,
) -> Result<([f64; POSE_DIM], [f64; POSE_DIM])> {
    if t >= schedule.len() {
        return Err(Error::InvalidArgument(format!("timestep {t} out of range")));
    }
    let ab_t = schedule.alpha_bars[t];
    let ab_prev = if t > 0 { schedule.alpha_bars[t - 1] } else { 1.0 };
    let beta = schedule.betas[t];
    let alpha = schedule.alphas[t];

    let mut x0 = [0.0; POSE_DIM];
    for k in 0..POSE_DIM {
        x0[k] = ((x_t[k] - (1.0 - ab_t).sqrt() * eps[k]) / ab_t.sqrt()).clamp(-1.0, 1.0);
    }
    // Posterior mean of x_{t-1} given (x_t, x0).
    let c0 = ab_prev.sqrt() * beta / (1.0 - ab_t);
    let ct = alpha.sqrt() * (1.0 - ab_prev) / (1.0 - ab_t);
    let sigma = (beta * (1.0 - ab_prev) / (1.0 - ab_t)).max(0.0).sqrt();
    let mut prev = [0.0; POSE_DIM];
    for k in 0..POSE_DIM {
        prev[k] = c0 * x0[k] + ct * x_t[k];
        if t > 0 {
            if let Some(z) = noise {
                prev[k] += sigma * z[k];
            }
        }
    }
    Ok((prev, x0))
}

/// Ancestral sampling: n de-normalized 25-d poses for one condition.
/// Deterministic per seed; samples use independent RNG streams.
pub fn sample(
    model: &Mlp,
    schedule: &NoiseSchedule,
    norm: &Normalization,
    condition: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<[f64; POSE_DIM]>> {
    let results: Vec<Result<[f64; POSE_DIM]>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let mut x = [0.0; POSE_DIM];
            for v in &mut x {
                *v = rng.sample(StandardNormal);
            }
            for t in (0..schedule.len()).rev() {
                let eps = model.forward(&x, t, condition)?;
                let z = if t > 0 {
                    let mut z = [0.0; POSE_DIM];
                    for v in &mut z {
                        *v = rng.sample(StandardNormal);
                    }
                    Some(z)
                } else {
                    None
                };
                let (prev, _) = reverse_step(&x, &eps, t, schedule, z.as_ref())?;
                x = prev;
            }
            Ok(norm.denormalize(&x))
        })
        .collect();
    results.into_iter().collect()
}

/// Serializable model artifact: network, schedule length, normalization.
pub struct ModelArtifact {
    pub model: Mlp,
    pub timesteps: usize,
    pub norm: Normalization,
}

impl ModelArtifact {
    /// Header (magic, version, dims, schedule length, normalization stats)
    /// followed by the parameter blob as little-endian 32-bit floats.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&MODEL_MAGIC)?;
        f.write_all(&MODEL_VERSION.to_le_bytes())?;
        for v in [
            POSE_DIM as u32,
            self.model.cond_dim as u32,
            self.model.width as u32,
            self.model.depth as u32,
            self.model.temb_dim as u32,
            self.timesteps as u32,
            0u32, // flags: condition projection unused
        ] {
            f.write_all(&v.to_le_bytes())?;
        }
        f.write_all(&(self.model.param_count() as u64).to_le_bytes())?;
        for k in 0..POSE_DIM {
            f.write_all(&(self.norm.mean[k] as f32).to_le_bytes())?;
        }
        for k in 0..POSE_DIM {
            f.write_all(&(self.norm.std[k] as f32).to_le_bytes())?;
        }
        for t in &self.model.tensors {
            for &v in &t.data {
                f.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        let mut head = [0u8; 8];
        f.read_exact(&mut head)?;
        if head[0..4] != MODEL_MAGIC {
            return Err(Error::Parse("bad model magic".into()));
        }
        let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(Error::Parse(format!("unsupported model version {version}")));
        }
        let mut dims = [0u8; 28];
        f.read_exact(&mut dims)?;
        let read_u32 =
            |i: usize| u32::from_le_bytes(dims[4 * i..4 * i + 4].try_into().unwrap()) as usize;
        let input_dim = read_u32(0);
        if input_dim != POSE_DIM {
            return Err(Error::DimensionMismatch {
                expected: POSE_DIM,
                got: input_dim,
            });
        }
        let cond_dim = read_u32(1);
        let width = read_u32(2);
        let depth = read_u32(3);
        let temb_dim = read_u32(4);
        let timesteps = read_u32(5);
        let mut cnt = [0u8; 8];
        f.read_exact(&mut cnt)?;
        let param_count = u64::from_le_bytes(cnt) as usize;

        let mut read_f32s = |n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * 4];
            f.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect())
        };
        let mean_v = read_f32s(POSE_DIM)?;
        let std_v = read_f32s(POSE_DIM)?;
        let mut norm = Normalization {
            mean: [0.0; POSE_DIM],
            std: [1.0; POSE_DIM],
        };
        norm.mean.copy_from_slice(&mean_v);
        norm.std.copy_from_slice(&std_v);

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = Mlp::init(width, depth, cond_dim, temb_dim, &mut rng);
        if model.param_count() != param_count {
            return Err(Error::Parse(format!(
                "parameter count mismatch: header {param_count}, layout {}",
                model.param_count()
            )));
        }
        let blob = read_f32s(param_count)?;
        let mut offset = 0;
        for t in &mut model.tensors {
            let n = t.data.len();
            t.data.copy_from_slice(&blob[offset..offset + n]);
            offset += n;
        }
        Ok(Self {
            model,
            timesteps,
            norm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_invariants() {
        let s = make_schedule(100).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.alpha_bars[0] > 0.99);
        for i in 1..100 {
            assert!(s.alpha_bars[i] < s.alpha_bars[i - 1]);
        }
        assert!(s.betas.iter().all(|&b| b > 0.0 && b <= 0.999));
        // Late steps are noisier.
        assert!(s.betas[0] < s.betas[99]);
        // Direct evaluation of the cosine formula at a few steps.
        let f = |t: f64| {
            ((t / 100.0 + 0.008) / 1.008 * std::f64::consts::FRAC_PI_2)
                .cos()
                .powi(2)
        };
        for i in [0usize, 10, 50, 99] {
            let expected = 1.0 - f((i + 1) as f64) / f(i as f64);
            assert_relative_eq!(s.betas[i], expected.min(0.999), epsilon = 1e-12);
        }
        assert!(make_schedule(1).is_err());
    }

    #[test]
    fn forward_diffuse_identities() {
        let s = make_schedule(100).unwrap();
        let x0 = [0.7; POSE_DIM];
        let zero = [0.0; POSE_DIM];
        // Near-identity at t = 0.
        assert!(s.alpha_bars[0].sqrt() > 0.995);
        let xt = forward_diffuse(&x0, 0, &zero, &s).unwrap();
        for k in 0..POSE_DIM {
            assert!((xt[k] - x0[k]).abs() < 0.005);
        }
        // Zero noise is the deterministic branch.
        let xt = forward_diffuse(&x0, 40, &zero, &s).unwrap();
        for k in 0..POSE_DIM {
            assert_relative_eq!(xt[k], s.alpha_bars[40].sqrt() * 0.7, epsilon = 1e-15);
        }
        assert!(forward_diffuse(&x0, 100, &zero, &s).is_err());
    }

    #[test]
    fn forward_diffuse_terminal_variance() {
        let s = make_schedule(100).unwrap();
        let x0 = [0.0; POSE_DIM];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 100_000 / POSE_DIM;
        let mut sums = [0.0; POSE_DIM];
        let mut sqs = [0.0; POSE_DIM];
        let mut count = 0usize;
        for _ in 0..draws.max(4000) {
            let mut noise = [0.0; POSE_DIM];
            for v in &mut noise {
                *v = rng.sample(StandardNormal);
            }
            let xt = forward_diffuse(&x0, 99, &noise, &s).unwrap();
            for k in 0..POSE_DIM {
                sums[k] += xt[k];
                sqs[k] += xt[k] * xt[k];
            }
            count += 1;
        }
        let n = count as f64;
        for k in 0..POSE_DIM {
            let var = sqs[k] / n - (sums[k] / n).powi(2);
            assert!((var - 1.0).abs() < 0.05, "dim {k}: var = {var}");
        }
    }

    #[test]
    fn forward_diffuse_inverts_exactly() {
        let s = make_schedule(100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x0 = [0.0; POSE_DIM];
        let mut noise = [0.0; POSE_DIM];
        for k in 0..POSE_DIM {
            x0[k] = rng.random::<f64>() * 2.0 - 1.0;
            noise[k] = rng.sample(StandardNormal);
        }
        for t in 0..100 {
            let xt = forward_diffuse(&x0, t, &noise, &s).unwrap();
            let ab = s.alpha_bars[t];
            for k in 0..POSE_DIM {
                let rec = (xt[k] - (1.0 - ab).sqrt() * noise[k]) / ab.sqrt();
                assert!((rec - x0[k]).abs() < 1e-9, "t={t}");
            }
        }
    }

    #[test]
    fn lr_schedule() {
        let cfg = TrainConfig::default();
        assert_relative_eq!(cfg.lr_at(250, 10_000), 1e-4 * 250.0 / 500.0);
        assert_relative_eq!(cfg.lr_at(0, 10_000), 0.0);
        assert_relative_eq!(cfg.lr_at(500, 10_000), 1e-4, epsilon = 1e-18);
        // Cosine tail reaches zero.
        assert!(cfg.lr_at(10_000, 10_000) < 1e-9);
        // Midpoint of the cosine phase is half the base rate.
        assert_relative_eq!(cfg.lr_at(5250, 10_000), 0.5e-4, epsilon = 1e-12);
    }

    #[test]
    fn ema_behaviour() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let init = Mlp::init(8, 1, 4, 8, &mut rng);
        let mut updated = init.clone();
        for t in &mut updated.tensors {
            for v in &mut t.data {
                *v += 0.1;
            }
        }
        // Step 0: straight copy.
        assert_eq!(ema_decay(0, 0.75), 0.0);
        let mut ema = init.clone();
        ema_update(&mut ema, &updated, 0, 0.75).unwrap();
        assert_eq!(ema, updated);

        // Step 1: strictly between the previous EMA and the new params.
        let mut ema = init.clone();
        ema_update(&mut ema, &updated, 1, 0.75).unwrap();
        for ((e, a), b) in ema
            .tensors
            .iter()
            .zip(&init.tensors)
            .zip(&updated.tensors)
        {
            for ((ev, av), bv) in e.data.iter().zip(&a.data).zip(&b.data) {
                let (lo, hi) = (av.min(*bv), av.max(*bv));
                assert!(*ev > lo && *ev < hi);
            }
        }

        // Monotone decay with an asymptote at the clamp.
        let mut last = 0.0;
        for step in 0..1000 {
            let d = ema_decay(step, 0.75);
            assert!(d >= last);
            last = d;
        }
        assert_eq!(ema_decay(10_000_000_000, 0.75), 0.9999);

        // Shape mismatch is rejected.
        let mut small = Mlp::init(4, 1, 4, 8, &mut rng);
        assert!(ema_update(&mut small, &updated, 1, 0.75).is_err());
    }

    #[test]
    fn normalization_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let poses: Vec<[f64; POSE_DIM]> = (0..64)
            .map(|_| {
                let mut p = [0.0; POSE_DIM];
                for v in &mut p {
                    *v = rng.random::<f64>() * 4.0 - 2.0;
                }
                p
            })
            .collect();
        let norm = Normalization::fit(&poses).unwrap();
        for p in &poses {
            let back = norm.denormalize(&norm.normalize(p));
            for k in 0..POSE_DIM {
                assert!((back[k] - p[k]).abs() < 1e-9);
            }
        }
        // Normalized set has zero mean, unit variance per dimension.
        let normd: Vec<[f64; POSE_DIM]> = poses.iter().map(|p| norm.normalize(p)).collect();
        for k in 0..POSE_DIM {
            let mean: f64 = normd.iter().map(|p| p[k]).sum::<f64>() / 64.0;
            let var: f64 = normd.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / 64.0;
            assert!(mean.abs() < 1e-9);
            assert_relative_eq!(var, 1.0, epsilon = 1e-9);
        }
        assert!(Normalization::fit(&[]).is_err());
    }

    // The posterior mean written two equivalent ways must agree when the x0
    // estimate is not clipped.
    #[test]
    fn reverse_step_posterior_mean_oracle() {
        let s = make_schedule(10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in 1..10 {
            // Build (x_t, eps) from a clean x0 inside the clip range so the
            // clipped and unclipped posterior means coincide.
            let mut x0_true = [0.0; POSE_DIM];
            let mut eps = [0.0; POSE_DIM];
            for k in 0..POSE_DIM {
                x0_true[k] = rng.random::<f64>() - 0.5;
                eps[k] = rng.sample(StandardNormal);
            }
            let x_t = forward_diffuse(&x0_true, t, &eps, &s).unwrap();
            let (prev, x0) = reverse_step(&x_t, &eps, t, &s, None).unwrap();
            for k in 0..POSE_DIM {
                assert!((x0[k] - x0_true[k]).abs() < 1e-9);
            }
            let ab = s.alpha_bars[t];
            let alpha = s.alphas[t];
            let beta = s.betas[t];
            for k in 0..POSE_DIM {
                // mu = (x_t - beta/sqrt(1-ab) eps) / sqrt(alpha)
                let mu = (x_t[k] - beta / (1.0 - ab).sqrt() * eps[k]) / alpha.sqrt();
                assert!((prev[k] - mu).abs() < 1e-9, "t={t} k={k}");
            }
        }
    }

    #[test]
    fn reverse_step_clips_x0() {
        let s = make_schedule(10).unwrap();
        let x_t = [5.0; POSE_DIM];
        let eps = [-5.0; POSE_DIM];
        let (_, x0) = reverse_step(&x_t, &eps, 5, &s, None).unwrap();
        assert!(x0.iter().all(|&v| v == 1.0));
    }

    fn constant_dataset(n: usize, cond_dim: usize) -> Vec<PoseSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut pose = [0.0; POSE_DIM];
        for v in &mut pose {
            *v = rng.random::<f64>() * 0.4 - 0.2;
        }
        let condition: Vec<f64> = (0..cond_dim).map(|_| rng.random::<f64>()).collect();
        (0..n)
            .map(|_| PoseSample {
                pose25: pose,
                condition: condition.clone(),
                object_id: "obj".into(),
                u_dir: [1.0, 0.0, 0.0],
            })
            .collect()
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            width: 64,
            depth: 2,
            temb_dim: 32,
            lr: 1e-3,
            warmup_steps: 100,
            ..TrainConfig::default()
        }
    }

    // A single repeated pose/condition pair must be memorized.
    #[test]
    fn train_memorizes_single_pair() {
        let dataset = constant_dataset(64, 64);
        let cfg = TrainConfig {
            lr: 3e-3,
            warmup_steps: 50,
            batch_size: 4,
            ..small_config()
        };
        let result = train(&dataset, &cfg, 42).unwrap();
        let total = result.loss_curve.len();
        assert_eq!(total, 64usize.div_ceil(4) * 200);
        let tail: f64 = result.loss_curve[total - 20..]
            .iter()
            .map(|p| p.loss)
            .sum::<f64>()
            / 20.0;
        assert!(tail < 0.01, "final mean loss = {tail}");
    }

    #[test]
    fn train_is_deterministic_per_seed() {
        let dataset = constant_dataset(32, 16);
        let cfg = TrainConfig {
            epochs: 3,
            ..small_config()
        };
        let a = train(&dataset, &cfg, 7).unwrap();
        let b = train(&dataset, &cfg, 7).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.ema, b.ema);
        for (x, y) in a.loss_curve.iter().zip(&b.loss_curve) {
            assert_eq!(x.loss.to_bits(), y.loss.to_bits());
        }
        let c = train(&dataset, &cfg, 8).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn train_rejects_bad_input() {
        assert!(train(&[], &small_config(), 1).is_err());
        let mut dataset = constant_dataset(4, 8);
        dataset[2].pose25[0] = f64::NAN;
        assert!(train(&dataset, &small_config(), 1).is_err());
    }

    // With targets independent of the input, the loss cannot beat the
    // predict-the-mean floor of 1.
    #[test]
    fn random_label_loss_has_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let cfg = TrainConfig {
            width: 32,
            depth: 1,
            temb_dim: 16,
            lr: 1e-3,
            warmup_steps: 10,
            ..TrainConfig::default()
        };
        let mut model = Mlp::init(cfg.width, cfg.depth, 8, cfg.temb_dim, &mut rng);
        let mut adam = Adam::new(&model);
        let cond: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let steps = 200;
        let batch = 16;
        let mut losses = Vec::new();
        for step in 0..steps {
            let mut grads = model.zeros_like();
            let mut loss = 0.0;
            let scale = 1.0 / (batch * POSE_DIM) as f64;
            for _ in 0..batch {
                let mut x = [0.0; POSE_DIM];
                let mut target = [0.0; POSE_DIM];
                for k in 0..POSE_DIM {
                    x[k] = rng.sample(StandardNormal);
                    target[k] = rng.sample(StandardNormal);
                }
                let cache = model.forward_cached(&x, step % 100, &cond).unwrap();
                let mut dy = [0.0; POSE_DIM];
                for k in 0..POSE_DIM {
                    let diff = cache.output[k] - target[k];
                    loss += diff * diff * scale;
                    dy[k] = 2.0 * diff * scale;
                }
                model.backward(&cache, &dy, &cond, &mut grads);
            }
            clip_gradients(&mut grads, cfg.grad_clip);
            adam.apply(&mut model, &grads, cfg.lr_at(step, steps), &cfg);
            losses.push(loss);
        }
        let tail = &losses[steps - 50..];
        let mean: f64 = tail.iter().sum::<f64>() / 50.0;
        // Per-step loss variance ~ 2/(batch*25); averaged over 50 steps.
        let sigma = (2.0 / (batch * POSE_DIM) as f64 / 50.0).sqrt();
        assert!(mean >= 1.0 - 3.0 * sigma, "mean = {mean}");
    }

    #[test]
    fn sample_is_deterministic_and_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let model = Mlp::init(16, 1, 8, 16, &mut rng);
        let schedule = make_schedule(20).unwrap();
        let norm = Normalization {
            mean: [0.0; POSE_DIM],
            std: [1.0; POSE_DIM],
        };
        let cond: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let a = sample(&model, &schedule, &norm, &cond, 4, 123).unwrap();
        let b = sample(&model, &schedule, &norm, &cond, 4, 123).unwrap();
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            for k in 0..POSE_DIM {
                assert_eq!(x[k].to_bits(), y[k].to_bits());
            }
        }
        // Different samples of one batch differ; a different seed differs.
        assert!(a[0] != a[1]);
        let c = sample(&model, &schedule, &norm, &cond, 4, 124).unwrap();
        assert!(a[0] != c[0]);
    }

    // A two-cluster dataset with two conditions: conditional sampling must
    // land near the right cluster.
    #[test]
    fn two_mode_conditional_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let cond_dim = 16;
        let mut cond_a = vec![0.0; cond_dim];
        let mut cond_b = vec![0.0; cond_dim];
        for i in 0..cond_dim / 2 {
            cond_a[i] = 1.0;
            cond_b[cond_dim / 2 + i] = 1.0;
        }
        let sigma = 0.05;
        let mut dataset = Vec::new();
        for i in 0..128 {
            let (center, cond) = if i % 2 == 0 {
                (0.4, cond_a.clone())
            } else {
                (-0.4, cond_b.clone())
            };
            let mut pose = [0.0; POSE_DIM];
            for v in &mut pose {
                let z: f64 = rng.sample(StandardNormal);
                *v = center + sigma * z;
            }
            dataset.push(PoseSample {
                pose25: pose,
                condition: cond,
                object_id: "synthetic".into(),
                u_dir: [1.0, 0.0, 0.0],
            });
        }
        let cfg = TrainConfig {
            epochs: 250,
            ..small_config()
        };
        let result = train(&dataset, &cfg, 77).unwrap();

        let tol = 3.0 * sigma * (POSE_DIM as f64).sqrt();
        for (cond, center) in [(&cond_a, 0.4), (&cond_b, -0.4)] {
            let samples = sample(
                &result.ema,
                &result.schedule,
                &result.norm,
                cond,
                200,
                99,
            )
            .unwrap();
            let hits = samples
                .iter()
                .filter(|s| {
                    let d: f64 = s.iter().map(|v| (v - center).powi(2)).sum::<f64>().sqrt();
                    d <= tol
                })
                .count();
            assert!(
                hits >= 180,
                "center {center}: {hits}/200 within {tol:.3}"
            );
        }
    }

    #[test]
    fn model_artifact_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let model = Mlp::init(16, 2, 8, 16, &mut rng);
        let norm = Normalization {
            mean: [0.25; POSE_DIM],
            std: [2.0; POSE_DIM],
        };
        let artifact = ModelArtifact {
            model: model.clone(),
            timesteps: 100,
            norm: norm.clone(),
        };
        let dir = std::env::temp_dir().join(format!("gdpm_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.bin");
        artifact.save(&path).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"GDPM");
        let back = ModelArtifact::load(&path).unwrap();
        assert_eq!(back.timesteps, 100);
        assert_eq!(back.model.width, 16);
        assert_eq!(back.model.depth, 2);
        for (a, b) in model.tensors.iter().zip(&back.model.tensors) {
            for (x, y) in a.data.iter().zip(&b.data) {
                assert_eq!((*x as f32).to_bits(), (*y as f32).to_bits());
            }
        }
        for k in 0..POSE_DIM {
            assert_eq!((norm.mean[k] as f32) as f64, back.norm.mean[k]);
            assert_eq!((norm.std[k] as f32) as f64, back.norm.std[k]);
        }

        let mut bad = bytes.clone();
        bad[0] = b'X';
        let bad_path = dir.join("bad.bin");
        std::fs::write(&bad_path, &bad).unwrap();
        assert!(ModelArtifact::load(&bad_path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn loss_csv_format() {
        let curve = vec![
            LossPoint {
                step: 0,
                loss: 1.5,
                lr: 1e-5,
            },
            LossPoint {
                step: 1,
                loss: 1.25,
                lr: 2e-5,
            },
        ];
        let dir = std::env::temp_dir().join(format!("gdpm_csv_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("loss.csv");
        write_loss_csv(&path, &curve).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("step,loss,lr"));
        assert_eq!(lines.next(), Some("0,1.5,0.00001"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
