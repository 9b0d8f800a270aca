//! Fully connected and residual networks trained with Adam on binary
//! cross-entropy with logits.
//!
//! The residual network is a ReLU stem layer, residual blocks computing
//! `F(x) + x` with `F = fc2(relu(fc1 x))`, and a linear head. Without the
//! stem the first block skips through a projection `W_s x` when the input
//! width differs from the block width.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_input, check_training_data, proba_from_margin, sigmoid, softplus, Classifier};
use crate::error::{Error, Result};
use crate::rng::{rng, Rng};

/// Affine map `y = W x + b` with `W` stored as `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Option<Array1<f64>>,
}

impl Dense {
    fn init(n_in: usize, n_out: usize, bias: bool, r: &mut Rng) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((n_out, n_in), || r.random_range(-bound..bound));
        let bias = bias.then(|| Array1::from_shape_simple_fn(n_out, || r.random_range(-bound..bound)));
        Self { weight, bias }
    }

    fn zeros_like(&self) -> Self {
        Self {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: self.bias.as_ref().map(|b| Array1::zeros(b.raw_dim())),
        }
    }

    fn forward(&self, a: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = a.dot(&self.weight.t());
        if let Some(b) = &self.bias {
            z += b;
        }
        z
    }

    /// Accumulates parameter gradients for upstream `dz` and returns `dz W`.
    fn backward(&self, a: ArrayView2<'_, f64>, dz: ArrayView2<'_, f64>, grad: &mut Dense) -> Array2<f64> {
        grad.weight += &dz.t().dot(&a);
        if let Some(gb) = &mut grad.bias {
            *gb += &dz.sum_axis(Axis(0));
        }
        dz.dot(&self.weight)
    }

    fn n_in(&self) -> usize {
        self.weight.ncols()
    }

    fn n_out(&self) -> usize {
        self.weight.nrows()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = vec![self.weight.as_slice_mut().expect("standard layout")];
        if let Some(b) = &mut self.bias {
            v.push(b.as_slice_mut().expect("standard layout"));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MlpArch {
    /// ReLU hidden layers, each followed by dropout, and a linear output.
    Plain { hidden: Vec<usize>, dropout: f64 },
    /// Optional ReLU stem, residual blocks of width `hidden_dim` and a
    /// linear output head.
    Residual {
        n_blocks: usize,
        hidden_dim: usize,
        #[serde(default = "default_stem")]
        stem: bool,
    },
}

fn default_stem() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub arch: MlpArch,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    /// Fraction of training rows held out for early stopping.
    pub validation_fraction: f64,
    /// Weight on the positive-class loss term; `None` means unweighted.
    #[serde(default)]
    pub pos_weight: Option<f64>,
}

impl MlpConfig {
    pub fn plain() -> Self {
        Self {
            arch: MlpArch::Plain {
                hidden: vec![512, 256, 128],
                dropout: 0.2,
            },
            learning_rate: 0.001,
            weight_decay: 1e-4,
            max_epochs: 35,
            patience: 8,
            batch_size: 64,
            validation_fraction: 0.1,
            pos_weight: None,
        }
    }

    pub fn residual() -> Self {
        Self {
            arch: MlpArch::Residual {
                n_blocks: 3,
                hidden_dim: 64,
                stem: true,
            },
            max_epochs: 30,
            patience: 5,
            ..Self::plain()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        match &self.arch {
            MlpArch::Plain { hidden, dropout } => {
                if hidden.contains(&0) {
                    return bad("hidden layer widths must be positive");
                }
                if !(0.0..1.0).contains(dropout) {
                    return bad("dropout must lie in [0, 1)");
                }
            }
            MlpArch::Residual { hidden_dim, .. } => {
                if *hidden_dim == 0 {
                    return bad("residual hidden_dim must be positive");
                }
            }
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("learning_rate must be positive and weight_decay non-negative");
        }
        if self.max_epochs == 0 || self.batch_size == 0 {
            return bad("max_epochs and batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)");
        }
        if self.pos_weight.is_some_and(|w| !(w > 0.0)) {
            return bad("pos_weight must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub arch: MlpArch,
    pub n_features: usize,
    /// Plain: hidden layers then output. Residual: the stem if present, per
    /// block `fc1`, `fc2` and the projection when the width changes, then
    /// the head.
    pub layers: Vec<Dense>,
}

struct Block {
    fc1: usize,
    fc2: usize,
    proj: Option<usize>,
}

enum Cache {
    Plain {
        inputs: Vec<Array2<f64>>,
        pre: Vec<Array2<f64>>,
        masks: Vec<Option<Array2<f64>>>,
        last: Array2<f64>,
    },
    Residual {
        input: Array2<f64>,
        stem_pre: Option<Array2<f64>>,
        inputs: Vec<Array2<f64>>,
        pre: Vec<Array2<f64>>,
        hidden: Vec<Array2<f64>>,
        last: Array2<f64>,
    },
}

/// `(n_in, n_out, has_bias)` for every layer in storage order.
fn layer_dims(arch: &MlpArch, n_features: usize) -> Vec<(usize, usize, bool)> {
    let mut dims = Vec::new();
    let mut n_in = n_features;
    match arch {
        MlpArch::Plain { hidden, .. } => {
            for &h in hidden {
                dims.push((n_in, h, true));
                n_in = h;
            }
        }
        MlpArch::Residual {
            n_blocks,
            hidden_dim,
            stem,
        } => {
            let h = *hidden_dim;
            if *stem {
                dims.push((n_in, h, true));
                n_in = h;
            }
            for _ in 0..*n_blocks {
                dims.push((n_in, h, true));
                dims.push((h, h, true));
                if n_in != h {
                    dims.push((n_in, h, false));
                }
                n_in = h;
            }
        }
    }
    dims.push((n_in, 1, true));
    dims
}

fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| v.max(0.0))
}

impl MlpModel {
    pub fn new(arch: MlpArch, n_features: usize, seed: u64) -> Result<Self> {
        let mut r = rng(seed);
        let layers = layer_dims(&arch, n_features)
            .into_iter()
            .map(|(n_in, n_out, bias)| Dense::init(n_in, n_out, bias, &mut r))
            .collect();
        let model = Self {
            arch,
            n_features,
            layers,
        };
        model.validate()?;
        Ok(model)
    }

    fn blocks(&self) -> Vec<Block> {
        let MlpArch::Residual {
            n_blocks,
            hidden_dim,
            stem,
        } = &self.arch
        else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut k = usize::from(*stem);
        let mut n_in = if *stem { *hidden_dim } else { self.n_features };
        for _ in 0..*n_blocks {
            let proj = (n_in != *hidden_dim).then_some(k + 2);
            out.push(Block { fc1: k, fc2: k + 1, proj });
            k += if proj.is_some() { 3 } else { 2 };
            n_in = *hidden_dim;
        }
        out
    }

    /// Checks that adjacent layer dimensions agree with the architecture.
    pub fn validate(&self) -> Result<()> {
        let mismatch = |m: String| Err(Error::InvalidData(format!("MLP architecture mismatch: {m}")));
        let expected = layer_dims(&self.arch, self.n_features);
        if expected.len() != self.layers.len() {
            return mismatch(format!("expected {} layers, found {}", expected.len(), self.layers.len()));
        }
        for (k, ((n_in, n_out, bias), layer)) in expected.iter().zip(&self.layers).enumerate() {
            let bias_ok = layer.bias.as_ref().map(|b| b.len() == *n_out) == bias.then_some(true);
            if layer.n_in() != *n_in || layer.n_out() != *n_out || !bias_ok {
                return mismatch(format!("layer {k} is {}x{}, expected {n_out}x{n_in}", layer.n_out(), layer.n_in()));
            }
        }
        Ok(())
    }

    fn forward(&self, x: ArrayView2<'_, f64>, dropout_rng: Option<&mut Rng>) -> (Array1<f64>, Cache) {
        match &self.arch {
            MlpArch::Plain { hidden, dropout } => {
                let mut a = x.to_owned();
                let (mut inputs, mut pre, mut masks) = (Vec::new(), Vec::new(), Vec::new());
                let mut r = dropout_rng;
                for layer in &self.layers[..hidden.len()] {
                    let z = layer.forward(a.view());
                    let mut h = relu(&z);
                    let mask = match r.as_deref_mut() {
                        Some(r) if *dropout > 0.0 => {
                            let keep = 1.0 / (1.0 - dropout);
                            let m = Array2::from_shape_simple_fn(h.raw_dim(), || {
                                if r.random::<f64>() < *dropout {
                                    0.0
                                } else {
                                    keep
                                }
                            });
                            h *= &m;
                            Some(m)
                        }
                        _ => None,
                    };
                    inputs.push(std::mem::replace(&mut a, h));
                    pre.push(z);
                    masks.push(mask);
                }
                let out = self.layers[hidden.len()].forward(a.view()).column(0).to_owned();
                (
                    out,
                    Cache::Plain {
                        inputs,
                        pre,
                        masks,
                        last: a,
                    },
                )
            }
            MlpArch::Residual { stem, .. } => {
                let mut cur = x.to_owned();
                let mut stem_pre = None;
                if *stem {
                    let z = self.layers[0].forward(x);
                    cur = relu(&z);
                    stem_pre = Some(z);
                }
                let (mut inputs, mut pre, mut hidden) = (Vec::new(), Vec::new(), Vec::new());
                for b in self.blocks() {
                    let u = self.layers[b.fc1].forward(cur.view());
                    let h = relu(&u);
                    let f = self.layers[b.fc2].forward(h.view());
                    let skip = match b.proj {
                        Some(p) => self.layers[p].forward(cur.view()),
                        None => cur.clone(),
                    };
                    inputs.push(std::mem::replace(&mut cur, f + skip));
                    pre.push(u);
                    hidden.push(h);
                }
                let head = self.layers.last().expect("head layer");
                let out = head.forward(cur.view()).column(0).to_owned();
                (
                    out,
                    Cache::Residual {
                        input: x.to_owned(),
                        stem_pre,
                        inputs,
                        pre,
                        hidden,
                        last: cur,
                    },
                )
            }
        }
    }

    fn backward(&self, cache: &Cache, dlogit: &Array1<f64>) -> Vec<Dense> {
        let mut grads: Vec<Dense> = self.layers.iter().map(Dense::zeros_like).collect();
        let d_out = dlogit.view().insert_axis(Axis(1));
        let n = self.layers.len();
        match cache {
            Cache::Plain {
                inputs,
                pre,
                masks,
                last,
            } => {
                let mut da = self.layers[n - 1].backward(last.view(), d_out, &mut grads[n - 1]);
                for l in (0..n - 1).rev() {
                    if let Some(m) = &masks[l] {
                        da *= m;
                    }
                    let dz = da * pre[l].mapv(|v| f64::from(u8::from(v > 0.0)));
                    da = self.layers[l].backward(inputs[l].view(), dz.view(), &mut grads[l]);
                }
            }
            Cache::Residual {
                input,
                stem_pre,
                inputs,
                pre,
                hidden,
                last,
            } => {
                let mut d = self.layers[n - 1].backward(last.view(), d_out, &mut grads[n - 1]);
                for (k, b) in self.blocks().iter().enumerate().rev() {
                    let dh = self.layers[b.fc2].backward(hidden[k].view(), d.view(), &mut grads[b.fc2]);
                    let du = dh * pre[k].mapv(|v| f64::from(u8::from(v > 0.0)));
                    let d_in = self.layers[b.fc1].backward(inputs[k].view(), du.view(), &mut grads[b.fc1]);
                    let d_skip = match b.proj {
                        Some(p) => self.layers[p].backward(inputs[k].view(), d.view(), &mut grads[p]),
                        None => d,
                    };
                    d = d_in + d_skip;
                }
                if let Some(z) = stem_pre {
                    let dz = d * z.mapv(|v| f64::from(u8::from(v > 0.0)));
                    self.layers[0].backward(input.view(), dz.view(), &mut grads[0]);
                }
            }
        }
        grads
    }

    pub fn margin(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_input(x, self.n_features)?;
        Ok(self.forward(x, None).0)
    }

    /// Mean binary cross-entropy with logits and its gradient with respect
    /// to every layer, with dropout disabled.
    pub fn loss_and_gradient(&self, x: ArrayView2<'_, f64>, y: &[bool], pos_weight: Option<f64>) -> Result<(f64, Vec<Dense>)> {
        check_input(x, self.n_features)?;
        let (logits, cache) = self.forward(x, None);
        let (loss, dlogit) = bce_with_logits(&logits, y, pos_weight);
        Ok((loss, self.backward(&cache, &dlogit)))
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weight.iter());
            if let Some(b) = &l.bias {
                out.extend(b.iter());
            }
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        let total: usize = self.layers.iter().map(|l| l.weight.len() + l.bias.as_ref().map_or(0, |b| b.len())).sum();
        crate::error::ensure_dim(total, params.len())?;
        let mut k = 0;
        for l in &mut self.layers {
            for s in l.slices_mut() {
                s.copy_from_slice(&params[k..k + s.len()]);
                k += s.len();
            }
        }
        Ok(())
    }

    pub fn flatten_gradient(grads: &[Dense]) -> Vec<f64> {
        let mut out = Vec::new();
        for g in grads {
            out.extend(g.weight.iter());
            if let Some(b) = &g.bias {
                out.extend(b.iter());
            }
        }
        out
    }
}

fn bce_with_logits(logits: &Array1<f64>, y: &[bool], pos_weight: Option<f64>) -> (f64, Array1<f64>) {
    let pw = pos_weight.unwrap_or(1.0);
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut d = Array1::zeros(logits.len());
    for (i, (&z, &yi)) in logits.iter().zip(y).enumerate() {
        if yi {
            loss += pw * softplus(-z);
            d[i] = pw * (sigmoid(z) - 1.0) / n;
        } else {
            loss += softplus(z);
            d[i] = sigmoid(z) / n;
        }
    }
    (loss / n, d)
}

impl Classifier for MlpModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(proba_from_margin(self.margin(x)?))
    }
}

struct Adam {
    m: Vec<Dense>,
    v: Vec<Dense>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Adam {
    fn new(layers: &[Dense]) -> Self {
        Self {
            m: layers.iter().map(Dense::zeros_like).collect(),
            v: layers.iter().map(Dense::zeros_like).collect(),
            t: 0,
        }
    }

    /// One step with L2 weight decay folded into the gradient.
    fn step(&mut self, layers: &mut [Dense], grads: &mut [Dense], lr: f64, weight_decay: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for ((p, g), (m, v)) in layers.iter_mut().zip(grads.iter_mut()).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let ps = p.slices_mut();
            let gs = g.slices_mut();
            let ms = m.slices_mut();
            let vs = v.slices_mut();
            for (((p, g), m), v) in ps.into_iter().zip(gs).zip(ms).zip(vs) {
                for i in 0..p.len() {
                    let gi = g[i] + weight_decay * p[i];
                    m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
                    v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
                    p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + EPS);
                }
            }
        }
    }
}

pub fn train_mlp(x: ArrayView2<'_, f64>, y: &[bool], config: &MlpConfig, seed: u64) -> Result<MlpModel> {
    check_training_data(x, y)?;
    config.validate()?;
    let n = x.nrows();
    let mut r = rng(seed);
    let mut model = MlpModel::new(config.arch.clone(), x.ncols(), r.random())?;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    let n_val = ((n as f64) * config.validation_fraction).floor() as usize;
    let n_val = if n_val >= n { 0 } else { n_val };
    let (val_rows, train_rows) = order.split_at(n_val);
    let mut train_rows = train_rows.to_vec();
    let x_val = x.select(Axis(0), val_rows);
    let y_val: Vec<bool> = val_rows.iter().map(|&i| y[i]).collect();

    let mut adam = Adam::new(&model.layers);
    let mut best: Option<(f64, Vec<Dense>)> = None;
    let mut stale = 0;
    for epoch in 0..config.max_epochs {
        train_rows.shuffle(&mut r);
        for (b, batch) in train_rows.chunks(config.batch_size).enumerate() {
            let xb = x.select(Axis(0), batch);
            let yb: Vec<bool> = batch.iter().map(|&i| y[i]).collect();
            let (logits, cache) = model.forward(xb.view(), Some(&mut r));
            let (loss, dlogit) = bce_with_logits(&logits, &yb, config.pos_weight);
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "MLP loss became {loss} at epoch {epoch}, batch {b}; lower the learning rate"
                )));
            }
            let mut grads = model.backward(&cache, &dlogit);
            adam.step(&mut model.layers, &mut grads, config.learning_rate, config.weight_decay);
        }
        if val_rows.is_empty() {
            continue;
        }
        let (logits, _) = model.forward(x_val.view(), None);
        let (val_loss, _) = bce_with_logits(&logits, &y_val, None);
        if !val_loss.is_finite() {
            return Err(Error::Numerical(format!("MLP validation loss became {val_loss} at epoch {epoch}")));
        }
        log::debug!("epoch {epoch}: validation log loss {val_loss:.6}");
        if best.as_ref().is_none_or(|(l, _)| val_loss < *l) {
            best = Some((val_loss, model.layers.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    if let Some((_, layers)) = best {
        model.layers = layers;
    }
    Ok(model)
}
