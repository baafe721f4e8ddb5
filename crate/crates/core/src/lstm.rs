//! Single-layer recurrent (LSTM) regressor trained with Adam.
//!
//! Forward pass per step: input/forget/output gates through the logistic
//! sigmoid, candidate cell through tanh, `C_t = f ⊙ C_{t-1} + i ⊙ C̃_t`,
//! `h_t = o ⊙ tanh(C_t)`; a linear readout of the final hidden state yields
//! the scalar prediction. Gradients come from full backpropagation through
//! time under mean squared error, checked against central finite differences
//! in the tests. Everything is plain `f64` vectors; weight matrices are
//! row-major `hidden x input_dim` / `hidden x hidden`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Learned parameters of the recurrent regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub hidden: usize,
    pub input_dim: usize,
    // gate weights on the input, hidden x input_dim row-major
    pub w_xi: Vec<f64>,
    pub w_xf: Vec<f64>,
    pub w_xo: Vec<f64>,
    pub w_xc: Vec<f64>,
    // recurrent gate weights, hidden x hidden row-major
    pub w_hi: Vec<f64>,
    pub w_hf: Vec<f64>,
    pub w_ho: Vec<f64>,
    pub w_hc: Vec<f64>,
    // gate biases
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_o: Vec<f64>,
    pub b_c: Vec<f64>,
    // linear readout
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl LstmParams {
    pub fn zeros(hidden: usize, input_dim: usize) -> Self {
        assert!(hidden > 0 && input_dim > 0);
        LstmParams {
            hidden,
            input_dim,
            w_xi: vec![0.0; hidden * input_dim],
            w_xf: vec![0.0; hidden * input_dim],
            w_xo: vec![0.0; hidden * input_dim],
            w_xc: vec![0.0; hidden * input_dim],
            w_hi: vec![0.0; hidden * hidden],
            w_hf: vec![0.0; hidden * hidden],
            w_ho: vec![0.0; hidden * hidden],
            w_hc: vec![0.0; hidden * hidden],
            b_i: vec![0.0; hidden],
            b_f: vec![0.0; hidden],
            b_o: vec![0.0; hidden],
            b_c: vec![0.0; hidden],
            w_out: vec![0.0; hidden],
            b_out: 0.0,
        }
    }

    /// Seeded uniform(-k, k) initialization with k = 1/sqrt(hidden); the
    /// forget-gate bias starts at 1.0 to keep early gradients flowing.
    pub fn init(hidden: usize, input_dim: usize, seed: u64) -> Self {
        let mut params = Self::zeros(hidden, input_dim);
        let k = 1.0 / (hidden as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for tensor in params.tensors_mut() {
            for v in tensor {
                *v = rng.random_range(-k..k);
            }
        }
        for b in &mut params.b_f {
            *b = 1.0;
        }
        params
    }

    /// All parameter tensors in a fixed order (used by the optimizer and the
    /// gradient checks).
    pub fn tensors(&self) -> Vec<&[f64]> {
        vec![
            &self.w_xi,
            &self.w_xf,
            &self.w_xo,
            &self.w_xc,
            &self.w_hi,
            &self.w_hf,
            &self.w_ho,
            &self.w_hc,
            &self.b_i,
            &self.b_f,
            &self.b_o,
            &self.b_c,
            &self.w_out,
            std::slice::from_ref(&self.b_out),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.w_xi,
            &mut self.w_xf,
            &mut self.w_xo,
            &mut self.w_xc,
            &mut self.w_hi,
            &mut self.w_hf,
            &mut self.w_ho,
            &mut self.w_hc,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_c,
            &mut self.w_out,
            std::slice::from_mut(&mut self.b_out),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Recurrent state carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zero(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Gate activations cached by one step, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct GateRecord {
    pub input: Vec<f64>,
    pub forget: Vec<f64>,
    pub output: Vec<f64>,
    pub candidate: Vec<f64>,
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 120,
            batch_size: 12,
            seed: 0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::config("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("beta1 and beta2 must lie in (0, 1)"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::config("epsilon must be positive"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be positive"));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out = W x + W_h h + b` for one gate, W row-major hidden x input_dim.
fn gate_preactivation(w_x: &[f64], w_h: &[f64], b: &[f64], x: &[f64], h: &[f64], out: &mut [f64]) {
    let (hid, din) = (b.len(), x.len());
    for r in 0..hid {
        let mut acc = b[r];
        let wx = &w_x[r * din..(r + 1) * din];
        for (w, xv) in wx.iter().zip(x) {
            acc += w * xv;
        }
        let wh = &w_h[r * hid..(r + 1) * hid];
        for (w, hv) in wh.iter().zip(h) {
            acc += w * hv;
        }
        out[r] = acc;
    }
}

/// One cell update; returns the new state and the gate activations.
pub fn lstm_step(params: &LstmParams, x: &[f64], prev: &LstmState) -> (LstmState, GateRecord) {
    assert_eq!(x.len(), params.input_dim, "input width mismatch");
    assert_eq!(prev.h.len(), params.hidden, "state width mismatch");
    let hid = params.hidden;

    let mut pre = vec![0.0; hid];
    let mut gates = GateRecord {
        input: vec![0.0; hid],
        forget: vec![0.0; hid],
        output: vec![0.0; hid],
        candidate: vec![0.0; hid],
    };

    gate_preactivation(
        &params.w_xi,
        &params.w_hi,
        &params.b_i,
        x,
        &prev.h,
        &mut pre,
    );
    for (g, p) in gates.input.iter_mut().zip(&pre) {
        *g = sigmoid(*p);
    }
    gate_preactivation(
        &params.w_xf,
        &params.w_hf,
        &params.b_f,
        x,
        &prev.h,
        &mut pre,
    );
    for (g, p) in gates.forget.iter_mut().zip(&pre) {
        *g = sigmoid(*p);
    }
    gate_preactivation(
        &params.w_xo,
        &params.w_ho,
        &params.b_o,
        x,
        &prev.h,
        &mut pre,
    );
    for (g, p) in gates.output.iter_mut().zip(&pre) {
        *g = sigmoid(*p);
    }
    gate_preactivation(
        &params.w_xc,
        &params.w_hc,
        &params.b_c,
        x,
        &prev.h,
        &mut pre,
    );
    for (g, p) in gates.candidate.iter_mut().zip(&pre) {
        *g = p.tanh();
    }

    let mut state = LstmState::zero(hid);
    for r in 0..hid {
        state.c[r] = gates.forget[r] * prev.c[r] + gates.input[r] * gates.candidate[r];
        state.h[r] = gates.output[r] * state.c[r].tanh();
    }
    (state, gates)
}

struct StepCache {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: GateRecord,
    tanh_c: Vec<f64>,
}

fn forward_cached(params: &LstmParams, window: &[Vec<f64>]) -> (f64, Vec<StepCache>) {
    assert!(!window.is_empty(), "window must be nonempty");
    let mut state = LstmState::zero(params.hidden);
    let mut caches = Vec::with_capacity(window.len());
    for x in window {
        let (next, gates) = lstm_step(params, x, &state);
        caches.push(StepCache {
            h_prev: state.h.clone(),
            c_prev: state.c.clone(),
            gates,
            tanh_c: next.c.iter().map(|v| v.tanh()).collect(),
        });
        state = next;
    }
    let pred = params
        .w_out
        .iter()
        .zip(&state.h)
        .map(|(w, h)| w * h)
        .sum::<f64>()
        + params.b_out;
    (pred, caches)
}

/// Folds the cell over an input window from the zero state and reads out the
/// final hidden state as a scalar prediction.
pub fn lstm_forward(params: &LstmParams, window: &[Vec<f64>]) -> f64 {
    forward_cached(params, window).0
}

/// `y^T W` for row-major W (hidden rows), accumulated into `out`.
fn add_transposed_matvec(w: &[f64], y: &[f64], cols: usize, out: &mut [f64]) {
    for (r, yv) in y.iter().enumerate() {
        if *yv == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, wv) in out.iter_mut().zip(row) {
            *o += yv * wv;
        }
    }
}

fn add_outer(dest: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    for (r, av) in a.iter().enumerate() {
        if *av == 0.0 {
            continue;
        }
        let row = &mut dest[r * cols..(r + 1) * cols];
        for (d, bv) in row.iter_mut().zip(b) {
            *d += av * bv;
        }
    }
}

/// Mean squared error over a batch and its parameter gradient, by full
/// backpropagation through time. The loss is `0.5 * mean((pred - target)^2)`.
pub fn lstm_gradients_with_loss(
    params: &LstmParams,
    batch: &[(&[Vec<f64>], f64)],
) -> (LstmParams, f64) {
    assert!(!batch.is_empty(), "batch must be nonempty");
    let hid = params.hidden;
    let m = batch.len() as f64;
    let mut grads = LstmParams::zeros(hid, params.input_dim);
    let mut loss = 0.0;

    for (window, target) in batch {
        let (pred, caches) = forward_cached(params, window);
        let err = pred - target;
        loss += 0.5 * err * err / m;
        let dpred = err / m;

        grads.b_out += dpred;
        let last_h: Vec<f64> = caches
            .last()
            .map(|c| {
                c.tanh_c
                    .iter()
                    .zip(&c.gates.output)
                    .map(|(t, o)| t * o)
                    .collect()
            })
            .expect("nonempty window");
        for (g, h) in grads.w_out.iter_mut().zip(&last_h) {
            *g += dpred * h;
        }

        let mut dh: Vec<f64> = params.w_out.iter().map(|w| w * dpred).collect();
        let mut dc = vec![0.0; hid];

        for (t, cache) in caches.iter().enumerate().rev() {
            let gates = &cache.gates;
            let mut da_i = vec![0.0; hid];
            let mut da_f = vec![0.0; hid];
            let mut da_o = vec![0.0; hid];
            let mut da_c = vec![0.0; hid];
            for r in 0..hid {
                let o = gates.output[r];
                let tc = cache.tanh_c[r];
                // h = o * tanh(c)
                let d_o = dh[r] * tc;
                dc[r] += dh[r] * o * (1.0 - tc * tc);
                // c = f * c_prev + i * candidate
                let d_f = dc[r] * cache.c_prev[r];
                let d_i = dc[r] * gates.candidate[r];
                let d_cand = dc[r] * gates.input[r];
                da_o[r] = d_o * o * (1.0 - o);
                da_f[r] = d_f * gates.forget[r] * (1.0 - gates.forget[r]);
                da_i[r] = d_i * gates.input[r] * (1.0 - gates.input[r]);
                da_c[r] = d_cand * (1.0 - gates.candidate[r] * gates.candidate[r]);
            }

            let x = &window[t];
            add_outer(&mut grads.w_xi, &da_i, x);
            add_outer(&mut grads.w_xf, &da_f, x);
            add_outer(&mut grads.w_xo, &da_o, x);
            add_outer(&mut grads.w_xc, &da_c, x);
            add_outer(&mut grads.w_hi, &da_i, &cache.h_prev);
            add_outer(&mut grads.w_hf, &da_f, &cache.h_prev);
            add_outer(&mut grads.w_ho, &da_o, &cache.h_prev);
            add_outer(&mut grads.w_hc, &da_c, &cache.h_prev);
            for r in 0..hid {
                grads.b_i[r] += da_i[r];
                grads.b_f[r] += da_f[r];
                grads.b_o[r] += da_o[r];
                grads.b_c[r] += da_c[r];
            }

            // propagate to the previous step
            let mut dh_prev = vec![0.0; hid];
            add_transposed_matvec(&params.w_hi, &da_i, hid, &mut dh_prev);
            add_transposed_matvec(&params.w_hf, &da_f, hid, &mut dh_prev);
            add_transposed_matvec(&params.w_ho, &da_o, hid, &mut dh_prev);
            add_transposed_matvec(&params.w_hc, &da_c, hid, &mut dh_prev);
            for (d, f) in dc.iter_mut().zip(&gates.forget) {
                *d *= f;
            }
            dh = dh_prev;
        }
    }
    (grads, loss)
}

/// Parameter gradient of the batch loss (see [`lstm_gradients_with_loss`]).
pub fn lstm_gradients(params: &LstmParams, batch: &[(&[Vec<f64>], f64)]) -> LstmParams {
    lstm_gradients_with_loss(params, batch).0
}

/// Result of a training run: final parameters plus the running training loss
/// of each epoch.
#[derive(Debug, Clone)]
pub struct AdamOutcome {
    pub params: LstmParams,
    pub epoch_losses: Vec<f64>,
}

/// Mini-batch Adam with per-epoch shuffling and bias-corrected moments.
pub fn adam_train(
    params: LstmParams,
    dataset: &[(Vec<Vec<f64>>, f64)],
    config: &AdamConfig,
) -> Result<AdamOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::config("training dataset is empty"));
    }
    let mut params = params;
    let mut m = LstmParams::zeros(params.hidden, params.input_dim);
    let mut v = LstmParams::zeros(params.hidden, params.input_dim);
    let mut step = 0u32;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut loss_sum = 0.0;
        for (batch_no, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(&[Vec<f64>], f64)> = chunk
                .iter()
                .map(|&i| (dataset[i].0.as_slice(), dataset[i].1))
                .collect();
            let (grads, loss) = lstm_gradients_with_loss(&params, &batch);
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_no,
                });
            }
            loss_sum += loss * chunk.len() as f64;

            step += 1;
            let bc1 = 1.0 - config.beta1.powi(step as i32);
            let bc2 = 1.0 - config.beta2.powi(step as i32);
            let mut p_t = params.tensors_mut();
            let g_t = grads.tensors();
            let mut m_t = m.tensors_mut();
            let mut v_t = v.tensors_mut();
            for k in 0..g_t.len() {
                let (ps, gs) = (&mut p_t[k], g_t[k]);
                let (ms, vs) = (&mut m_t[k], &mut v_t[k]);
                for j in 0..gs.len() {
                    let g = gs[j];
                    ms[j] = config.beta1 * ms[j] + (1.0 - config.beta1) * g;
                    vs[j] = config.beta2 * vs[j] + (1.0 - config.beta2) * g * g;
                    let m_hat = ms[j] / bc1;
                    let v_hat = vs[j] / bc2;
                    ps[j] -= config.lr * m_hat / (v_hat.sqrt() + config.epsilon);
                }
            }
        }
        epoch_losses.push(loss_sum / dataset.len() as f64);
    }

    Ok(AdamOutcome {
        params,
        epoch_losses,
    })
}

/// Z-score statistics fitted on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub input_mean: Vec<f64>,
    pub input_sd: Vec<f64>,
    pub target_mean: f64,
    pub target_sd: f64,
}

impl Standardization {
    /// Column statistics; near-constant columns get unit scale so they pass
    /// through unchanged instead of dividing by zero.
    pub fn fit(input_columns: &[Vec<f64>], targets: &[f64]) -> Self {
        fn stats(values: &[f64]) -> (f64, f64) {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            (mean, if sd > 1e-12 { sd } else { 1.0 })
        }
        let (input_mean, input_sd) = input_columns.iter().map(|c| stats(c)).unzip();
        let (target_mean, target_sd) = stats(targets);
        Standardization {
            input_mean,
            input_sd,
            target_mean,
            target_sd,
        }
    }

    pub fn scale_input(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .enumerate()
            .map(|(j, v)| (v - self.input_mean[j]) / self.input_sd[j])
            .collect()
    }

    pub fn scale_target(&self, raw: f64) -> f64 {
        (raw - self.target_mean) / self.target_sd
    }

    pub fn unscale_target(&self, scaled: f64) -> f64 {
        scaled * self.target_sd + self.target_mean
    }
}

/// Serializable trained model: parameters plus the scaling that produced its
/// training windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub params: LstmParams,
    pub standardization: Standardization,
}

impl LstmModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("model json: {e}")))
    }
}
