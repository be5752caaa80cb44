//! Small neural classifiers trained by mini-batch backpropagation:
//! a feedforward net, a simple (Elman) recurrent net and an LSTM.
//!
//! Parameters live in one flat vector per model; [`Layout`] maps named
//! tensors onto it. The recurrent nets read each record as a sequence of
//! scalars, one feature per time step, and classify from the last hidden
//! state.

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{FeatureMatrix, Label};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("training loss became non-finite at epoch {epoch}, batch {batch}")]
    DivergenceDetected { epoch: usize, batch: usize },
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid network spec: {0}")]
    BadSpec(String),
    #[error("no training rows")]
    Empty,
    #[error("malformed tensor `{0}`")]
    BadTensor(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    Fnn,
    Rnn,
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

macro_rules! name_enum {
    ($t:ty, $err:literal, $($variant:path => $name:literal),+) => {
        impl $t {
            pub fn name(self) -> &'static str {
                match self { $($variant => $name),+ }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
        impl FromStr for $t {
            type Err = NeuralError;
            fn from_str(s: &str) -> Result<Self, NeuralError> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)+
                    _ => Err(NeuralError::BadSpec(format!(concat!($err, " `{}`"), s))),
                }
            }
        }
    };
}

name_enum!(NetKind, "unknown network kind", NetKind::Fnn => "fnn", NetKind::Rnn => "rnn", NetKind::Lstm => "lstm");
name_enum!(Activation, "unknown activation", Activation::Relu => "relu", Activation::Tanh => "tanh", Activation::Sigmoid => "sigmoid");
name_enum!(Optimizer, "unknown optimizer", Optimizer::Sgd => "sgd", Optimizer::Adam => "adam");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralSpec {
    pub kind: NetKind,
    /// Hidden layer widths for `fnn`; a single width for `rnn`/`lstm`.
    pub hidden: Vec<usize>,
    /// Hidden nonlinearity of `fnn` and `rnn`. The LSTM always uses
    /// sigmoid gates with a tanh cell.
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl NeuralSpec {
    /// Defaults: fnn 16-8 relu, rnn/lstm width 16 tanh, Adam at 1e-3,
    /// batch 16, 200 epochs.
    pub fn default_for(kind: NetKind) -> Self {
        let (hidden, activation) = match kind {
            NetKind::Fnn => (vec![16, 8], Activation::Relu),
            NetKind::Rnn | NetKind::Lstm => (vec![16], Activation::Tanh),
        };
        NeuralSpec {
            kind,
            hidden,
            activation,
            epochs: 200,
            batch_size: 16,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            seed: crate::rng::DEFAULT_SEED,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(NeuralError::BadSpec("hidden sizes must be positive".into()));
        }
        if self.kind != NetKind::Fnn && self.hidden.len() != 1 {
            return Err(NeuralError::BadSpec(format!("{} takes exactly one hidden width", self.kind)));
        }
        if self.batch_size == 0 {
            return Err(NeuralError::BadSpec("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NeuralError::BadSpec(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// One named block of the flat parameter vector, `rows × cols` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub fan_in: usize,
    pub fan_out: usize,
    pub bias: Option<f64>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub kind: NetKind,
    pub n_inputs: usize,
    pub hidden: Vec<usize>,
    pub blocks: Vec<Block>,
}

const GATES: [&str; 4] = ["input", "forget", "cell", "output"];

impl Layout {
    pub fn new(spec: &NeuralSpec, n_inputs: usize) -> Self {
        let mut blocks = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, rows: usize, cols: usize, bias: Option<f64>| {
            let (fan_in, fan_out) = (cols, rows);
            blocks.push(Block {
                name,
                offset,
                rows,
                cols,
                fan_in,
                fan_out,
                bias,
            });
            offset += rows * cols;
        };
        match spec.kind {
            NetKind::Fnn => {
                let mut sizes = vec![n_inputs];
                sizes.extend(&spec.hidden);
                sizes.push(1);
                for (l, w) in sizes.windows(2).enumerate() {
                    push(format!("layer{l}.weight"), w[1], w[0], None);
                    push(format!("layer{l}.bias"), w[1], 1, Some(0.0));
                }
            }
            NetKind::Rnn => {
                let h = spec.hidden[0];
                push("rnn.w_input".into(), h, 1, None);
                push("rnn.w_hidden".into(), h, h, None);
                push("rnn.bias".into(), h, 1, Some(0.0));
                push("head.weight".into(), 1, h, None);
                push("head.bias".into(), 1, 1, Some(0.0));
            }
            NetKind::Lstm => {
                let h = spec.hidden[0];
                for gate in GATES {
                    push(format!("lstm.{gate}.w_input"), h, 1, None);
                    push(format!("lstm.{gate}.w_hidden"), h, h, None);
                    let b = if gate == "forget" { 1.0 } else { 0.0 };
                    push(format!("lstm.{gate}.bias"), h, 1, Some(b));
                }
                push("head.weight".into(), 1, h, None);
                push("head.bias".into(), 1, 1, Some(0.0));
            }
        }
        Layout {
            kind: spec.kind,
            n_inputs,
            hidden: spec.hidden.clone(),
            blocks,
        }
    }

    pub fn n_params(&self) -> usize {
        self.blocks.iter().map(Block::len).sum()
    }

    fn off(&self, i: usize) -> usize {
        self.blocks[i].offset
    }

    /// Glorot-uniform weights, constant biases.
    pub fn init(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut params = vec![0.0; self.n_params()];
        for b in &self.blocks {
            match b.bias {
                Some(v) => params[b.range()].fill(v),
                None => {
                    let limit = (6.0 / (b.fan_in + b.fan_out) as f64).sqrt();
                    for p in &mut params[b.range()] {
                        *p = rng.gen_range(-limit..=limit);
                    }
                }
            }
        }
        params
    }
}

/// Closed-form parameter counts.
pub fn expected_param_count(kind: NetKind, n_inputs: usize, hidden: &[usize]) -> usize {
    match kind {
        NetKind::Fnn => {
            let mut sizes = vec![n_inputs];
            sizes.extend(hidden);
            sizes.push(1);
            sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
        }
        NetKind::Rnn => {
            let h = hidden[0];
            h * (h + 1) + h + (h + 1)
        }
        NetKind::Lstm => {
            let h = hidden[0];
            4 * (h * (h + 1) + h) + (h + 1)
        }
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy computed from the logit.
fn bce_with_logit(logit: f64, y: f64) -> f64 {
    // max(t,0) - t*y + log(1 + exp(-|t|))
    logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p()
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn grad(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

/// `out = W x + b` for a row-major `rows × cols` block.
fn affine(params: &[f64], w: usize, b: usize, rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let wr = &params[w + r * cols..w + (r + 1) * cols];
        out[r] = params[b + r] + wr.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
    }
}

/// Forward/backward engine over a fixed layout and activation.
pub struct Net<'a> {
    layout: &'a Layout,
    activation: Activation,
}

/// Per-step LSTM activations kept for backpropagation.
struct LstmStep {
    gates: [Vec<f64>; 4],
    c: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl<'a> Net<'a> {
    pub fn new(layout: &'a Layout, activation: Activation) -> Self {
        Net { layout, activation }
    }

    /// Output logit for one row.
    pub fn logit(&self, params: &[f64], x: &[f64]) -> f64 {
        self.forward_backward(params, x, None)
    }

    /// Forward pass; when `grad` is `Some((dlogit, g))`, also accumulates
    /// `dlogit * ∂logit/∂params` into `g`.
    fn forward_backward(&self, params: &[f64], x: &[f64], grad: Option<(f64, &mut [f64])>) -> f64 {
        match self.layout.kind {
            NetKind::Fnn => self.fnn(params, x, grad),
            NetKind::Rnn => self.rnn(params, x, grad),
            NetKind::Lstm => self.lstm(params, x, grad).0,
        }
    }

    fn fnn(&self, params: &[f64], x: &[f64], grad: Option<(f64, &mut [f64])>) -> f64 {
        let lay = self.layout;
        let n_layers = lay.blocks.len() / 2;
        let mut inputs: Vec<Vec<f64>> = vec![x.to_vec()];
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let wb = &lay.blocks[2 * l];
            let mut z = vec![0.0; wb.rows];
            affine(params, wb.offset, lay.off(2 * l + 1), wb.rows, wb.cols, &inputs[l], &mut z);
            if l + 1 < n_layers {
                inputs.push(z.iter().map(|&v| self.activation.apply(v)).collect());
            }
            pre.push(z);
        }
        let logit = pre[n_layers - 1][0];
        let Some((dlogit, g)) = grad else { return logit };
        let mut delta = vec![dlogit];
        for l in (0..n_layers).rev() {
            let wb = &lay.blocks[2 * l];
            let (w, b) = (wb.offset, lay.off(2 * l + 1));
            let input = &inputs[l];
            for r in 0..wb.rows {
                g[b + r] += delta[r];
                for c in 0..wb.cols {
                    g[w + r * wb.cols + c] += delta[r] * input[c];
                }
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![0.0; wb.cols];
            for r in 0..wb.rows {
                for (c, p) in prev.iter_mut().enumerate() {
                    *p += params[w + r * wb.cols + c] * delta[r];
                }
            }
            for (c, p) in prev.iter_mut().enumerate() {
                *p *= self.activation.grad(pre[l - 1][c], input[c]);
            }
            delta = prev;
        }
        logit
    }

    fn rnn(&self, params: &[f64], x: &[f64], grad: Option<(f64, &mut [f64])>) -> f64 {
        let lay = self.layout;
        let h = lay.hidden[0];
        let (wx, wh, bb, hw, hb) = (lay.off(0), lay.off(1), lay.off(2), lay.off(3), lay.off(4));
        let steps = x.len();
        let mut states: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(steps);
        states.push(vec![0.0; h]);
        for &xt in x {
            let prev = states.last().expect("initial state");
            let mut z = vec![0.0; h];
            affine(params, wh, bb, h, h, prev, &mut z);
            for (r, zr) in z.iter_mut().enumerate() {
                *zr += params[wx + r] * xt;
            }
            states.push(z.iter().map(|&v| self.activation.apply(v)).collect());
            pre.push(z);
        }
        let last = &states[steps];
        let logit = params[hb] + (0..h).map(|r| params[hw + r] * last[r]).sum::<f64>();
        let Some((dlogit, g)) = grad else { return logit };
        g[hb] += dlogit;
        let mut dh: Vec<f64> = (0..h)
            .map(|r| {
                g[hw + r] += dlogit * last[r];
                dlogit * params[hw + r]
            })
            .collect();
        for t in (0..steps).rev() {
            let dz: Vec<f64> = (0..h).map(|r| dh[r] * self.activation.grad(pre[t][r], states[t + 1][r])).collect();
            let prev = &states[t];
            let mut dprev = vec![0.0; h];
            for r in 0..h {
                g[wx + r] += dz[r] * x[t];
                g[bb + r] += dz[r];
                for c in 0..h {
                    g[wh + r * h + c] += dz[r] * prev[c];
                    dprev[c] += params[wh + r * h + c] * dz[r];
                }
            }
            dh = dprev;
        }
        logit
    }

    /// Returns the logit and the per-step gate activations.
    fn lstm(&self, params: &[f64], x: &[f64], grad: Option<(f64, &mut [f64])>) -> (f64, Vec<[Vec<f64>; 4]>) {
        let lay = self.layout;
        let h = lay.hidden[0];
        let gate_off = |k: usize| (lay.off(3 * k), lay.off(3 * k + 1), lay.off(3 * k + 2));
        let (hw, hb) = (lay.off(12), lay.off(13));
        let steps = x.len();
        let mut hs: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
        let mut cache: Vec<LstmStep> = Vec::with_capacity(steps);
        hs.push(vec![0.0; h]);
        let mut c_prev = vec![0.0; h];
        for &xt in x {
            let h_prev = hs.last().expect("initial state");
            let gates: [Vec<f64>; 4] = std::array::from_fn(|k| {
                let (wx, wh, b) = gate_off(k);
                let mut z = vec![0.0; h];
                affine(params, wh, b, h, h, h_prev, &mut z);
                for (r, zr) in z.iter_mut().enumerate() {
                    *zr += params[wx + r] * xt;
                    *zr = if k == 2 { zr.tanh() } else { sigmoid(*zr) };
                }
                z
            });
            let c: Vec<f64> = (0..h).map(|r| gates[1][r] * c_prev[r] + gates[0][r] * gates[2][r]).collect();
            let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            hs.push((0..h).map(|r| gates[3][r] * tanh_c[r]).collect());
            c_prev = c.clone();
            cache.push(LstmStep { gates, c, tanh_c });
        }
        let last = &hs[steps];
        let logit = params[hb] + (0..h).map(|r| params[hw + r] * last[r]).sum::<f64>();
        if let Some((dlogit, g)) = grad {
            g[hb] += dlogit;
            let mut dh: Vec<f64> = (0..h)
                .map(|r| {
                    g[hw + r] += dlogit * last[r];
                    dlogit * params[hw + r]
                })
                .collect();
            let mut dc = vec![0.0; h];
            let zeros = vec![0.0; h];
            for t in (0..steps).rev() {
                let step = &cache[t];
                let c_before = if t == 0 { &zeros } else { &cache[t - 1].c };
                let [i, f, gg, o] = &step.gates;
                let mut da: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; h]);
                for r in 0..h {
                    let d_o = dh[r] * step.tanh_c[r];
                    dc[r] += dh[r] * o[r] * (1.0 - step.tanh_c[r] * step.tanh_c[r]);
                    da[0][r] = dc[r] * gg[r] * i[r] * (1.0 - i[r]);
                    da[1][r] = dc[r] * c_before[r] * f[r] * (1.0 - f[r]);
                    da[2][r] = dc[r] * i[r] * (1.0 - gg[r] * gg[r]);
                    da[3][r] = d_o * o[r] * (1.0 - o[r]);
                    dc[r] *= f[r];
                }
                let h_prev = &hs[t];
                let mut dprev = vec![0.0; h];
                for (k, dak) in da.iter().enumerate() {
                    let (wx, wh, b) = gate_off(k);
                    for r in 0..h {
                        g[wx + r] += dak[r] * x[t];
                        g[b + r] += dak[r];
                        for c in 0..h {
                            g[wh + r * h + c] += dak[r] * h_prev[c];
                            dprev[c] += params[wh + r * h + c] * dak[r];
                        }
                    }
                }
                dh = dprev;
            }
        }
        (logit, cache.into_iter().map(|s| s.gates).collect())
    }

    /// Mean cross-entropy over `rows` and its gradient.
    pub fn loss_and_grad(&self, params: &[f64], x: ArrayView2<'_, f64>, y: &[Label], rows: &[usize]) -> (f64, Vec<f64>) {
        let mut g = vec![0.0; params.len()];
        let scale = 1.0 / rows.len() as f64;
        let mut loss = 0.0;
        let mut buf = vec![0.0; x.ncols()];
        for &i in rows {
            for (b, v) in buf.iter_mut().zip(x.row(i)) {
                *b = *v;
            }
            let target = f64::from(y[i]);
            let logit = self.logit(params, &buf);
            loss += bce_with_logit(logit, target);
            self.forward_backward(params, &buf, Some(((sigmoid(logit) - target) * scale, &mut g)));
        }
        (loss * scale, g)
    }

    pub fn loss(&self, params: &[f64], x: ArrayView2<'_, f64>, y: &[Label]) -> f64 {
        let mut buf = vec![0.0; x.ncols()];
        let total: f64 = (0..x.nrows())
            .map(|i| {
                for (b, v) in buf.iter_mut().zip(x.row(i)) {
                    *b = *v;
                }
                bce_with_logit(self.logit(params, &buf), f64::from(y[i]))
            })
            .sum();
        total / x.nrows() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralModel {
    pub spec: NeuralSpec,
    pub n_inputs: usize,
    pub params: Vec<f64>,
    pub final_loss: f64,
    /// Full-training-set loss after each epoch.
    pub loss_history: Vec<f64>,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Trains with a fixed per-epoch shuffle drawn from the seed.
pub fn train_neural(x: &FeatureMatrix, spec: &NeuralSpec) -> Result<NeuralModel, NeuralError> {
    train_neural_with_init(x, spec, None)
}

/// As [`train_neural`], optionally starting from given parameters.
pub fn train_neural_with_init(x: &FeatureMatrix, spec: &NeuralSpec, init: Option<Vec<f64>>) -> Result<NeuralModel, NeuralError> {
    spec.validate()?;
    let n = x.n_rows();
    if n == 0 {
        return Err(NeuralError::Empty);
    }
    let layout = Layout::new(spec, x.n_cols());
    let mut params = match init {
        Some(p) if p.len() == layout.n_params() => p,
        Some(_) => return Err(NeuralError::BadSpec("initial parameter count mismatch".into())),
        None => layout.init(&mut seeded(derive_seed(spec.seed, 0))),
    };
    let mut shuffle_rng = seeded(derive_seed(spec.seed, 1));
    let net = Net::new(&layout, spec.activation);
    let values = x.values();
    let labels = x.labels();
    let mut adam = AdamState {
        m: vec![0.0; params.len()],
        v: vec![0.0; params.len()],
        t: 0,
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(spec.epochs);
    for epoch in 0..spec.epochs {
        order.shuffle(&mut shuffle_rng);
        for (batch, rows) in order.chunks(spec.batch_size).enumerate() {
            let (loss, g) = net.loss_and_grad(&params, values, labels, rows);
            if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(NeuralError::DivergenceDetected { epoch, batch });
            }
            match spec.optimizer {
                Optimizer::Sgd => {
                    for (p, gi) in params.iter_mut().zip(&g) {
                        *p -= spec.learning_rate * gi;
                    }
                }
                Optimizer::Adam => {
                    adam.t += 1;
                    let c1 = 1.0 - ADAM_BETA1.powi(adam.t);
                    let c2 = 1.0 - ADAM_BETA2.powi(adam.t);
                    for j in 0..params.len() {
                        adam.m[j] = ADAM_BETA1 * adam.m[j] + (1.0 - ADAM_BETA1) * g[j];
                        adam.v[j] = ADAM_BETA2 * adam.v[j] + (1.0 - ADAM_BETA2) * g[j] * g[j];
                        let mhat = adam.m[j] / c1;
                        let vhat = adam.v[j] / c2;
                        params[j] -= spec.learning_rate * mhat / (vhat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        let epoch_loss = net.loss(&params, values, labels);
        if !epoch_loss.is_finite() {
            return Err(NeuralError::DivergenceDetected {
                epoch,
                batch: n.div_ceil(spec.batch_size),
            });
        }
        history.push(epoch_loss);
    }
    let final_loss = history.last().copied().unwrap_or_else(|| net.loss(&params, values, labels));
    Ok(NeuralModel {
        spec: spec.clone(),
        n_inputs: x.n_cols(),
        params,
        final_loss,
        loss_history: history,
    })
}

impl NeuralModel {
    pub fn layout(&self) -> Layout {
        Layout::new(&self.spec, self.n_inputs)
    }

    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, NeuralError> {
        if x.ncols() != self.n_inputs {
            return Err(NeuralError::DimensionMismatch {
                expected: self.n_inputs,
                got: x.ncols(),
            });
        }
        let layout = self.layout();
        let net = Net::new(&layout, self.spec.activation);
        Ok((0..x.nrows()).map(|i| net.logit(&self.params, &x.row(i).to_vec())).collect())
    }

    /// Probabilities and labels (`p >= 0.5`).
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Vec<Label>), NeuralError> {
        let probs: Vec<f64> = self.logits(x)?.into_iter().map(sigmoid).collect();
        let labels = probs.iter().map(|&p| u8::from(p >= 0.5)).collect();
        Ok((probs, labels))
    }

    /// Per-step gate activations `[input, forget, cell, output]` of an LSTM
    /// for one row; `None` for other kinds.
    pub fn lstm_gates(&self, row: &[f64]) -> Option<Vec<[Vec<f64>; 4]>> {
        if self.spec.kind != NetKind::Lstm {
            return None;
        }
        let layout = self.layout();
        Some(Net::new(&layout, self.spec.activation).lstm(&self.params, row, None).1)
    }

    /// Parameters as named 2-D arrays.
    pub fn tensors(&self) -> Vec<NamedTensor> {
        self.layout()
            .blocks
            .iter()
            .map(|b| NamedTensor {
                name: b.name.clone(),
                values: self.params[b.range()].chunks(b.cols).map(<[f64]>::to_vec).collect(),
            })
            .collect()
    }

    pub fn from_tensors(
        spec: NeuralSpec,
        n_inputs: usize,
        tensors: &[NamedTensor],
        final_loss: f64,
    ) -> Result<Self, NeuralError> {
        spec.validate()?;
        let layout = Layout::new(&spec, n_inputs);
        if tensors.len() != layout.blocks.len() {
            return Err(NeuralError::BadTensor(format!("expected {} tensors, got {}", layout.blocks.len(), tensors.len())));
        }
        let mut params: Vec<f64> = Vec::with_capacity(layout.n_params());
        for (b, t) in layout.blocks.iter().zip(tensors) {
            if t.name != b.name || t.values.len() != b.rows || t.values.iter().any(|r| r.len() != b.cols) {
                return Err(NeuralError::BadTensor(t.name.clone()));
            }
            params.extend(t.values.iter().flatten());
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(NeuralError::BadTensor("non-finite parameter".into()));
        }
        Ok(NeuralModel {
            spec,
            n_inputs,
            params,
            final_loss,
            loss_history: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub values: Vec<Vec<f64>>,
}

pub fn predict_neural(m: &NeuralModel, x: &FeatureMatrix) -> Result<(Vec<f64>, Vec<Label>), NeuralError> {
    m.predict(x.values())
}

/// Largest relative error between the analytic gradient of the mean loss
/// and central differences with step `1e-5`, over every parameter.
///
/// Parameters are initialized from `spec.seed`. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn gradient_check(spec: &NeuralSpec, x: &FeatureMatrix) -> Result<f64, NeuralError> {
    const H: f64 = 1e-5;
    spec.validate()?;
    if x.n_rows() == 0 {
        return Err(NeuralError::Empty);
    }
    if x.n_rows() > 10 {
        return Err(NeuralError::BadSpec("gradient check takes at most 10 rows".into()));
    }
    let layout = Layout::new(spec, x.n_cols());
    let mut params = layout.init(&mut seeded(derive_seed(spec.seed, 0)));
    let net = Net::new(&layout, spec.activation);
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    let (_, analytic) = net.loss_and_grad(&params, x.values(), x.labels(), &rows);
    let mut worst: f64 = 0.0;
    for j in 0..params.len() {
        let orig = params[j];
        params[j] = orig + H;
        let up = net.loss(&params, x.values(), x.labels());
        params[j] = orig - H;
        let down = net.loss(&params, x.values(), x.labels());
        params[j] = orig;
        let numeric = (up - down) / (2.0 * H);
        let err = (analytic[j] - numeric).abs() / analytic[j].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Analytic gradient of the mean loss at the seeded initialization.
pub fn initial_gradient(spec: &NeuralSpec, x: &FeatureMatrix) -> Vec<f64> {
    let layout = Layout::new(spec, x.n_cols());
    let params = layout.init(&mut seeded(derive_seed(spec.seed, 0)));
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    Net::new(&layout, spec.activation).loss_and_grad(&params, x.values(), x.labels(), &rows).1
}
