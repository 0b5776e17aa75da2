use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::seed;

/// Hazards are clamped to this distance from 0 and 1 before taking logs.
pub const HAZARD_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics for normalization, dropout active.
    Train,
    /// Running statistics, no dropout.
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LhConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for LhConfig {
    fn default() -> Self {
        LhConfig {
            hidden: 256,
            dropout: 0.1,
            learning_rate: 1e-3,
            batch_size: 2048,
            epochs: 3,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }
}

/// Per-sample negative log-likelihood of the discrete-time hazards `h` for a
/// sample whose duration falls in bin `tau`.
pub fn lh_loss(h: &[f64], tau: usize, event: bool) -> f64 {
    let c = |v: f64| v.clamp(HAZARD_CLAMP, 1.0 - HAZARD_CLAMP);
    let mut l: f64 = h[..tau].iter().map(|&v| (1.0 - c(v)).ln()).sum();
    let ht = c(h[tau]);
    l += if event { ht.ln() } else { (1.0 - ht).ln() };
    -l
}

/// Mean of [`lh_loss`] over a batch.
pub fn lh_batch_loss(h: &[Vec<f64>], tau: &[usize], events: &[bool]) -> f64 {
    let n = h.len() as f64;
    h.iter()
        .zip(tau.iter().zip(events))
        .map(|(r, (&t, &e))| lh_loss(r, t, e))
        .sum::<f64>()
        / n
}

/// S(t_i) = prod_{k <= i} (1 - h(k)).
pub fn survival_curve(h: &[f64]) -> Vec<f64> {
    let mut s = 1.0;
    h.iter()
        .map(|&v| {
            s *= 1.0 - v;
            s
        })
        .collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

// Parameter slots in flat order; the second hidden block is offset by 4.
const W1: usize = 0;
const B1: usize = 1;
const G1: usize = 2;
const BETA1: usize = 3;
const W3: usize = 8;
const B3: usize = 9;

/// Two hidden blocks (linear, ReLU, batch norm, dropout) followed by a
/// linear layer with a sigmoid per grid step.
#[derive(Debug, Clone, PartialEq)]
pub struct LhModel {
    pub n_in: usize,
    pub n_out: usize,
    pub config: LhConfig,
    /// Weights are `in x out`; biases and norm parameters are `1 x out`.
    params: Vec<DMatrix<f64>>,
    running_mean: [Vec<f64>; 2],
    running_var: [Vec<f64>; 2],
    /// Mean training loss at initialization followed by one entry per epoch.
    pub loss_trace: Vec<f64>,
}

struct HiddenCache {
    input: DMatrix<f64>,
    pre: DMatrix<f64>,
    normed: DMatrix<f64>,
    inv_std: Vec<f64>,
    mask: Option<DMatrix<f64>>,
}

struct Forward {
    logits: DMatrix<f64>,
    hidden: [HiddenCache; 2],
    out_input: DMatrix<f64>,
    batch_mean: [Vec<f64>; 2],
    batch_var: [Vec<f64>; 2],
}

fn add_row(m: &mut DMatrix<f64>, row: &DMatrix<f64>) {
    for j in 0..m.ncols() {
        m.column_mut(j).add_scalar_mut(row[(0, j)]);
    }
}

fn col_sums(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(1, m.ncols(), |_, j| m.column(j).sum())
}

impl LhModel {
    pub fn new(n_in: usize, n_out: usize, config: LhConfig, seed_value: u64) -> Result<Self> {
        if n_in == 0 || n_out == 0 || config.hidden == 0 {
            return Err(Error::InvalidInput("network dimensions must be positive".into()));
        }
        let mut rng = seed::rng(derive_seed!(seed_value, "init"));
        let h = config.hidden;
        // Hidden weights: He-normal; biases and the output layer: uniform
        // in +-1/sqrt(fan_in).
        let he = |fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng| {
            let d = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
            DMatrix::from_fn(fan_in, fan_out, |_, _| d.sample(rng))
        };
        let uni = |fan_in: usize, rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
            let b = 1.0 / (fan_in as f64).sqrt();
            let d = Uniform::new_inclusive(-b, b).unwrap();
            DMatrix::from_fn(rows, cols, |_, _| d.sample(rng))
        };
        let w1 = he(n_in, h, &mut rng);
        let b1 = uni(n_in, 1, h, &mut rng);
        let w2 = he(h, h, &mut rng);
        let b2 = uni(h, 1, h, &mut rng);
        let w3 = uni(h, h, n_out, &mut rng);
        let b3 = uni(h, 1, n_out, &mut rng);
        let ones = DMatrix::from_element(1, h, 1.0);
        let zeros = DMatrix::zeros(1, h);
        Ok(LhModel {
            n_in,
            n_out,
            config,
            params: vec![w1, b1, ones.clone(), zeros.clone(), w2, b2, ones, zeros, w3, b3],
            running_mean: [vec![0.0; h], vec![0.0; h]],
            running_var: [vec![1.0; h], vec![1.0; h]],
            loss_trace: Vec::new(),
        })
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    fn locate(&self, mut i: usize) -> (usize, usize) {
        for (k, p) in self.params.iter().enumerate() {
            if i < p.len() {
                return (k, i);
            }
            i -= p.len();
        }
        panic!("parameter index out of range");
    }

    pub fn param(&self, i: usize) -> f64 {
        let (k, j) = self.locate(i);
        self.params[k].as_slice()[j]
    }

    pub fn set_param(&mut self, i: usize, v: f64) {
        let (k, j) = self.locate(i);
        self.params[k].as_mut_slice()[j] = v;
    }

    pub fn params_finite(&self) -> bool {
        self.params.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    fn to_matrix(&self, x: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        if let Some(r) = x.iter().find(|r| r.len() != self.n_in) {
            return Err(Error::InvalidInput(format!(
                "input has {} features, network expects {}",
                r.len(),
                self.n_in
            )));
        }
        Ok(DMatrix::from_fn(x.len(), self.n_in, |i, j| x[i][j]))
    }

    fn hidden_forward(
        &self,
        layer: usize,
        input: DMatrix<f64>,
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> (DMatrix<f64>, HiddenCache, Vec<f64>, Vec<f64>) {
        let base = layer * 4;
        let mut pre = &input * &self.params[base + W1];
        add_row(&mut pre, &self.params[base + B1]);
        let act = pre.map(|v| v.max(0.0));
        let (b, h) = act.shape();
        let (mean, var) = match mode {
            Mode::Train => {
                let mean: Vec<f64> = (0..h).map(|j| act.column(j).sum() / b as f64).collect();
                let var: Vec<f64> = (0..h)
                    .map(|j| act.column(j).iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / b as f64)
                    .collect();
                (mean, var)
            }
            Mode::Eval => (self.running_mean[layer].clone(), self.running_var[layer].clone()),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.config.bn_eps).sqrt()).collect();
        let normed = DMatrix::from_fn(b, h, |i, j| (act[(i, j)] - mean[j]) * inv_std[j]);
        let gamma = &self.params[base + G1];
        let beta = &self.params[base + BETA1];
        let mut out = DMatrix::from_fn(b, h, |i, j| gamma[(0, j)] * normed[(i, j)] + beta[(0, j)]);
        let mask = match mode {
            Mode::Train if self.config.dropout > 0.0 => {
                let keep = 1.0 - self.config.dropout;
                let m = DMatrix::from_fn(b, h, |_, _| {
                    if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                out.component_mul_assign(&m);
                Some(m)
            }
            _ => None,
        };
        let cache = HiddenCache {
            input,
            pre,
            normed,
            inv_std,
            mask,
        };
        (out, cache, mean, var)
    }

    fn forward_matrix(&self, x: DMatrix<f64>, mode: Mode, dropout_seed: u64) -> Forward {
        let mut rng = seed::rng(dropout_seed);
        let (a1, c1, m1, v1) = self.hidden_forward(0, x, mode, &mut rng);
        let (a2, c2, m2, v2) = self.hidden_forward(1, a1, mode, &mut rng);
        let mut logits = &a2 * &self.params[W3];
        add_row(&mut logits, &self.params[B3]);
        Forward {
            logits,
            hidden: [c1, c2],
            out_input: a2,
            batch_mean: [m1, m2],
            batch_var: [v1, v2],
        }
    }

    /// Hazards for each row of `x`. Train mode uses batch statistics and a
    /// dropout mask drawn from `dropout_seed`.
    pub fn forward(&self, x: &[Vec<f64>], mode: Mode, dropout_seed: u64) -> Result<Vec<Vec<f64>>> {
        if mode == Mode::Train && x.len() < 2 {
            return Err(Error::InvalidInput("train mode needs at least 2 rows".into()));
        }
        let f = self.forward_matrix(self.to_matrix(x)?, mode, dropout_seed);
        Ok((0..x.len())
            .map(|i| (0..self.n_out).map(|j| sigmoid(f.logits[(i, j)])).collect())
            .collect())
    }

    /// Eval-mode hazards.
    pub fn hazards(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.forward(x, Mode::Eval, 0)
    }

    /// Eval-mode survival curves.
    pub fn predict_survival(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(self.hazards(x)?.iter().map(|h| survival_curve(h)).collect())
    }

    fn check_targets(&self, n: usize, tau: &[usize], events: &[bool]) -> Result<()> {
        if tau.len() != n || events.len() != n {
            return Err(Error::InvalidInput("targets differ in length from inputs".into()));
        }
        if let Some(t) = tau.iter().find(|&&t| t >= self.n_out) {
            return Err(Error::InvalidInput(format!(
                "duration index {t} outside grid of {}",
                self.n_out
            )));
        }
        Ok(())
    }

    fn hidden_backward(&self, layer: usize, cache: &HiddenCache, mut d: DMatrix<f64>, mode: Mode, grads: &mut [DMatrix<f64>]) -> DMatrix<f64> {
        let base = layer * 4;
        if let Some(m) = &cache.mask {
            d.component_mul_assign(m);
        }
        let (b, h) = d.shape();
        grads[base + G1] = DMatrix::from_fn(1, h, |_, j| d.column(j).dot(&cache.normed.column(j)));
        grads[base + BETA1] = col_sums(&d);
        let gamma = &self.params[base + G1];
        let dn = DMatrix::from_fn(b, h, |i, j| d[(i, j)] * gamma[(0, j)]);
        let mut da = match mode {
            Mode::Train => {
                let bf = b as f64;
                let mut da = DMatrix::zeros(b, h);
                for j in 0..h {
                    let s = dn.column(j).sum();
                    let sn = dn.column(j).dot(&cache.normed.column(j));
                    let k = cache.inv_std[j] / bf;
                    for i in 0..b {
                        da[(i, j)] = k * (bf * dn[(i, j)] - s - cache.normed[(i, j)] * sn);
                    }
                }
                da
            }
            Mode::Eval => DMatrix::from_fn(b, h, |i, j| dn[(i, j)] * cache.inv_std[j]),
        };
        da.zip_apply(&cache.pre, |g, z| {
            if z <= 0.0 {
                *g = 0.0
            }
        });
        grads[base + W1] = cache.input.tr_mul(&da);
        grads[base + B1] = col_sums(&da);
        &da * self.params[base + W1].transpose()
    }

    fn loss_and_grads(
        &self,
        x: DMatrix<f64>,
        tau: &[usize],
        events: &[bool],
        mode: Mode,
        dropout_seed: u64,
    ) -> (f64, Vec<DMatrix<f64>>, Forward) {
        let f = self.forward_matrix(x, mode, dropout_seed);
        let b = tau.len();
        let bf = b as f64;
        let mut loss = 0.0;
        let mut dl = DMatrix::zeros(b, self.n_out);
        let lo = HAZARD_CLAMP;
        let hi = 1.0 - HAZARD_CLAMP;
        for i in 0..b {
            for j in 0..=tau[i] {
                let h = sigmoid(f.logits[(i, j)]);
                let hc = h.clamp(lo, hi);
                let inside = h > lo && h < hi;
                // d/dz of -ln(h) is -(1-h); of -ln(1-h) is h.
                let (l, g) = if j == tau[i] && events[i] {
                    (-hc.ln(), -(1.0 - h))
                } else {
                    (-(1.0 - hc).ln(), h)
                };
                loss += l;
                if inside {
                    dl[(i, j)] = g / bf;
                }
            }
        }
        let mut grads: Vec<DMatrix<f64>> = self.params.iter().map(|p| DMatrix::zeros(p.nrows(), p.ncols())).collect();
        grads[W3] = f.out_input.tr_mul(&dl);
        grads[B3] = col_sums(&dl);
        let d2 = &dl * self.params[W3].transpose();
        let d1 = self.hidden_backward(1, &f.hidden[1], d2, mode, &mut grads);
        self.hidden_backward(0, &f.hidden[0], d1, mode, &mut grads);
        (loss / bf, grads, f)
    }

    /// Mean loss and its gradient with respect to every parameter, in the
    /// flat order used by [`LhModel::param`].
    pub fn loss_and_gradient(
        &self,
        x: &[Vec<f64>],
        tau: &[usize],
        events: &[bool],
        mode: Mode,
        dropout_seed: u64,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_targets(x.len(), tau, events)?;
        if mode == Mode::Train && x.len() < 2 {
            return Err(Error::InvalidInput("train mode needs at least 2 rows".into()));
        }
        let (loss, grads, _) = self.loss_and_grads(self.to_matrix(x)?, tau, events, mode, dropout_seed);
        Ok((loss, grads.iter().flat_map(|g| g.iter().copied()).collect()))
    }

    fn update_running(&mut self, f: &Forward, batch: usize) {
        let m = self.config.bn_momentum;
        let unbias = batch as f64 / (batch as f64 - 1.0);
        for l in 0..2 {
            for j in 0..self.config.hidden {
                self.running_mean[l][j] = (1.0 - m) * self.running_mean[l][j] + m * f.batch_mean[l][j];
                self.running_var[l][j] =
                    (1.0 - m) * self.running_var[l][j] + m * f.batch_var[l][j] * unbias;
            }
        }
    }
}

struct Adam {
    m: Vec<DMatrix<f64>>,
    v: Vec<DMatrix<f64>>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(params: &[DMatrix<f64>]) -> Self {
        let z: Vec<DMatrix<f64>> = params.iter().map(|p| DMatrix::zeros(p.nrows(), p.ncols())).collect();
        Adam {
            m: z.clone(),
            v: z,
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [DMatrix<f64>], grads: &[DMatrix<f64>], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for k in 0..params.len() {
            let (p, g) = (&mut params[k], &grads[k]);
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for ((pi, gi), (mi, vi)) in p
                .iter_mut()
                .zip(g.iter())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mi = Self::BETA1 * *mi + (1.0 - Self::BETA1) * gi;
                *vi = Self::BETA2 * *vi + (1.0 - Self::BETA2) * gi * gi;
                *pi -= lr * (*mi / c1) / ((*vi / c2).sqrt() + Self::EPS);
            }
        }
    }
}

/// Splits a shuffled index list into batches; a trailing batch of one row
/// is merged into the previous batch since batch statistics need two rows.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size.max(2)).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() < 2) {
        out.pop();
        let k = out.len() - 1;
        out[k] = &order[k * size..];
    }
    out
}

/// Trains a Logistic Hazard network with Adam. Shuffling, initialization and
/// dropout masks are all derived from `seed_value`.
pub fn lh_train(
    x: &[Vec<f64>],
    tau: &[usize],
    events: &[bool],
    grid_size: usize,
    cfg: &LhConfig,
    seed_value: u64,
) -> Result<LhModel> {
    if x.len() < 2 {
        return Err(Error::InvalidInput("training needs at least 2 samples".into()));
    }
    let n_in = x[0].len();
    let mut model = LhModel::new(n_in, grid_size, cfg.clone(), seed_value)?;
    model.check_targets(x.len(), tau, events)?;
    let xm = model.to_matrix(x)?;
    let epoch_order = |epoch: usize| {
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.shuffle(&mut seed::rng(derive_seed!(seed_value, "shuffle", epoch)));
        order
    };
    let batch_input = |idx: &[usize]| {
        let sub = xm.select_rows(idx);
        let t: Vec<usize> = idx.iter().map(|&i| tau[i]).collect();
        let e: Vec<bool> = idx.iter().map(|&i| events[i]).collect();
        (sub, t, e)
    };

    // Loss of the untrained network over the first epoch's batches.
    let order = epoch_order(0);
    let mut total = 0.0;
    for (b, idx) in batches(&order, cfg.batch_size).into_iter().enumerate() {
        let (sub, t, e) = batch_input(idx);
        let (loss, _, _) = model.loss_and_grads(sub, &t, &e, Mode::Train, derive_seed!(seed_value, "dropout", 0usize, b));
        total += loss * idx.len() as f64;
    }
    model.loss_trace.push(total / x.len() as f64);

    let mut adam = Adam::new(&model.params);
    for epoch in 0..cfg.epochs {
        let order = epoch_order(epoch);
        let mut total = 0.0;
        for (b, idx) in batches(&order, cfg.batch_size).into_iter().enumerate() {
            let (sub, t, e) = batch_input(idx);
            let (loss, grads, f) =
                model.loss_and_grads(sub, &t, &e, Mode::Train, derive_seed!(seed_value, "dropout", epoch, b));
            if !loss.is_finite() || grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    detail: format!("loss {loss}, batch of {} rows", idx.len()),
                });
            }
            model.update_running(&f, idx.len());
            adam.step(&mut model.params, &grads, cfg.learning_rate);
            total += loss * idx.len() as f64;
        }
        let mean = total / x.len() as f64;
        log::debug!("epoch {epoch}: mean training loss {mean:.6}");
        model.loss_trace.push(mean);
    }
    Ok(model)
}
