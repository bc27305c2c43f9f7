//! Single LSTM cell with hand-derived gradients.
//!
//! Gate rows are stacked in the order input, forget, output, candidate:
//!
//! ```text
//! i = σ(W_i x + U_i h + b_i)    f = σ(W_f x + U_f h + b_f)
//! o = σ(W_o x + U_o h + b_o)    g = tanh(W_g x + U_g h + b_g)
//! c' = f ⊙ c + i ⊙ g            h' = o ⊙ tanh(c')
//! ```

use rand::Rng;

use super::matrix::{sigmoid, Matrix};
use super::{ensure_finite, ensure_len, NumericsError};

pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_OUTPUT: usize = 2;
pub const GATE_CANDIDATE: usize = 3;

/// Weights of one LSTM cell. Also used as the gradient accumulator for itself.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `4H × I`
    pub w_x: Matrix,
    /// `4H × H`
    pub w_h: Matrix,
    /// `4H`
    pub b: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            w_x: Matrix::zeros(4 * hidden_dim, input_dim),
            w_h: Matrix::zeros(4 * hidden_dim, hidden_dim),
            b: vec![0.0; 4 * hidden_dim],
        }
    }

    /// Uniform `[-1/√H, 1/√H]` weights, zero biases except the forget gate at 1.0.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (hidden_dim.max(1) as f64).sqrt();
        let w_x = Matrix::random_uniform(4 * hidden_dim, input_dim, scale, rng);
        let w_h = Matrix::random_uniform(4 * hidden_dim, hidden_dim, scale, rng);
        let mut b = vec![0.0; 4 * hidden_dim];
        b[GATE_FORGET * hidden_dim..(GATE_FORGET + 1) * hidden_dim].fill(1.0);
        Self { w_x, w_h, b }
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_h.cols()
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        let h = self.hidden_dim();
        ensure_len("w_x rows", 4 * h, self.w_x.rows())?;
        ensure_len("w_h rows", 4 * h, self.w_h.rows())?;
        ensure_len("gate bias", 4 * h, self.b.len())?;
        ensure_finite("w_x", self.w_x.as_slice())?;
        ensure_finite("w_h", self.w_h.as_slice())?;
        ensure_finite("gate bias", &self.b)
    }

    pub fn tensors(&self) -> [&[f64]; 3] {
        [self.w_x.as_slice(), self.w_h.as_slice(), &self.b]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 3] {
        [self.w_x.as_mut_slice(), self.w_h.as_mut_slice(), &mut self.b]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            h: vec![0.0; hidden_dim],
            c: vec![0.0; hidden_dim],
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.h.len()
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates, `[i | f | o | g]`.
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

impl StepCache {
    pub fn gate(&self, which: usize) -> &[f64] {
        let h = self.h_prev.len();
        &self.gates[which * h..(which + 1) * h]
    }
}

fn check_inputs(params: &LstmParams, x: &[f64], state: &LstmState) -> Result<(), NumericsError> {
    ensure_len("lstm input", params.input_dim(), x.len())?;
    ensure_len("lstm hidden state", params.hidden_dim(), state.h.len())?;
    ensure_len("lstm cell state", params.hidden_dim(), state.c.len())?;
    ensure_finite("lstm input", x)?;
    ensure_finite("lstm hidden state", &state.h)?;
    ensure_finite("lstm cell state", &state.c)
}

fn activated_gates(params: &LstmParams, x: &[f64], h_prev: &[f64]) -> Vec<f64> {
    let hd = params.hidden_dim();
    let mut a = params.b.clone();
    params.w_x.matvec_acc(x, &mut a);
    params.w_h.matvec_acc(h_prev, &mut a);
    let (sig, cand) = a.split_at_mut(3 * hd);
    sig.iter_mut().for_each(|v| *v = sigmoid(*v));
    cand.iter_mut().for_each(|v| *v = v.tanh());
    a
}

fn next_state(gates: &[f64], c_prev: &[f64]) -> (LstmState, Vec<f64>) {
    let hd = c_prev.len();
    let (i, rest) = gates.split_at(hd);
    let (f, rest) = rest.split_at(hd);
    let (o, g) = rest.split_at(hd);
    let c: Vec<f64> = (0..hd).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = (0..hd).map(|k| o[k] * tanh_c[k]).collect();
    (LstmState { h, c }, tanh_c)
}

/// One training-mode step: returns the next state and the cache for backward.
pub fn lstm_cell_forward(
    params: &LstmParams,
    x: &[f64],
    state: &LstmState,
) -> Result<(LstmState, StepCache), NumericsError> {
    check_inputs(params, x, state)?;
    let gates = activated_gates(params, x, &state.h);
    let (next, tanh_c) = next_state(&gates, &state.c);
    ensure_finite("lstm cell output", &next.c)?;
    let cache = StepCache {
        x: x.to_vec(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        gates,
        tanh_c,
    };
    Ok((next, cache))
}

/// Inference-mode step, no cache retained.
pub fn lstm_cell_step(
    params: &LstmParams,
    x: &[f64],
    state: &LstmState,
) -> Result<LstmState, NumericsError> {
    check_inputs(params, x, state)?;
    let gates = activated_gates(params, x, &state.h);
    let (next, _) = next_state(&gates, &state.c);
    ensure_finite("lstm cell output", &next.c)?;
    Ok(next)
}

/// Backward through one step.
///
/// Parameter gradients are accumulated into `grads`; the gradients with
/// respect to the step input and the previous `(h, c)` are returned.
pub fn lstm_cell_backward(
    params: &LstmParams,
    cache: &StepCache,
    dh: &[f64],
    dc: &[f64],
    grads: &mut LstmParams,
) -> Result<(Vec<f64>, LstmState), NumericsError> {
    let hd = params.hidden_dim();
    ensure_len("cache hidden state", hd, cache.h_prev.len())?;
    ensure_len("cache input", params.input_dim(), cache.x.len())?;
    ensure_len("upstream dh", hd, dh.len())?;
    ensure_len("upstream dc", hd, dc.len())?;
    ensure_len("gradient w_x", params.w_x.as_slice().len(), grads.w_x.as_slice().len())?;
    ensure_len("gradient w_h", params.w_h.as_slice().len(), grads.w_h.as_slice().len())?;

    let i = cache.gate(GATE_INPUT);
    let f = cache.gate(GATE_FORGET);
    let o = cache.gate(GATE_OUTPUT);
    let g = cache.gate(GATE_CANDIDATE);

    let mut da = vec![0.0; 4 * hd];
    let mut dc_prev = vec![0.0; hd];
    for k in 0..hd {
        let t = cache.tanh_c[k];
        let dct = dc[k] + dh[k] * o[k] * (1.0 - t * t);
        let d_o = dh[k] * t;
        let d_i = dct * g[k];
        let d_g = dct * i[k];
        let d_f = dct * cache.c_prev[k];
        dc_prev[k] = dct * f[k];
        da[GATE_INPUT * hd + k] = d_i * i[k] * (1.0 - i[k]);
        da[GATE_FORGET * hd + k] = d_f * f[k] * (1.0 - f[k]);
        da[GATE_OUTPUT * hd + k] = d_o * o[k] * (1.0 - o[k]);
        da[GATE_CANDIDATE * hd + k] = d_g * (1.0 - g[k] * g[k]);
    }

    grads.w_x.outer_acc(&da, &cache.x);
    grads.w_h.outer_acc(&da, &cache.h_prev);
    super::matrix::add_assign(&mut grads.b, &da);

    let mut dx = vec![0.0; params.input_dim()];
    params.w_x.tmatvec_acc(&da, &mut dx);
    let mut dh_prev = vec![0.0; hd];
    params.w_h.tmatvec_acc(&da, &mut dh_prev);
    Ok((
        dx,
        LstmState {
            h: dh_prev,
            c: dc_prev,
        },
    ))
}
