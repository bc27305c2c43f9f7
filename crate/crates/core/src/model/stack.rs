//! Stacked LSTM layers: layer `l > 0` consumes layer `l-1`'s hidden output.

use crate::numerics::{
    add_assign, lstm_cell_backward, lstm_cell_forward, lstm_cell_step, LstmParams, LstmState,
    NumericsError, StepCache,
};

pub(crate) fn step(
    layers: &[LstmParams],
    x: &[f64],
    states: &[LstmState],
) -> Result<Vec<LstmState>, NumericsError> {
    let mut out: Vec<LstmState> = Vec::with_capacity(layers.len());
    for (l, (p, s)) in layers.iter().zip(states).enumerate() {
        let next = if l == 0 {
            lstm_cell_step(p, x, s)?
        } else {
            lstm_cell_step(p, &out[l - 1].h, s)?
        };
        out.push(next);
    }
    Ok(out)
}

pub(crate) fn forward(
    layers: &[LstmParams],
    x: &[f64],
    states: &[LstmState],
) -> Result<(Vec<LstmState>, Vec<StepCache>), NumericsError> {
    let mut out: Vec<LstmState> = Vec::with_capacity(layers.len());
    let mut caches = Vec::with_capacity(layers.len());
    for (l, (p, s)) in layers.iter().zip(states).enumerate() {
        let (next, cache) = if l == 0 {
            lstm_cell_forward(p, x, s)?
        } else {
            lstm_cell_forward(p, &out[l - 1].h, s)?
        };
        out.push(next);
        caches.push(cache);
    }
    Ok((out, caches))
}

/// Backward through one time step of the stack.
///
/// On entry `dstates[l]` holds the gradient w.r.t. this step's output state
/// of layer `l` (coming from later steps); `dh_top` is added to the top
/// layer's hidden gradient. On exit `dstates[l]` holds the gradient w.r.t.
/// the previous step's state. Returns the gradient w.r.t. the step input.
pub(crate) fn backward(
    layers: &[LstmParams],
    caches: &[StepCache],
    dh_top: Option<&[f64]>,
    dstates: &mut [LstmState],
    grads: &mut [LstmParams],
) -> Result<Vec<f64>, NumericsError> {
    let top = layers.len() - 1;
    if let Some(dh) = dh_top {
        add_assign(&mut dstates[top].h, dh);
    }
    let mut dx = Vec::new();
    for l in (0..layers.len()).rev() {
        let (d_in, dprev) =
            lstm_cell_backward(&layers[l], &caches[l], &dstates[l].h, &dstates[l].c, &mut grads[l])?;
        dstates[l] = dprev;
        if l > 0 {
            add_assign(&mut dstates[l - 1].h, &d_in);
        } else {
            dx = d_in;
        }
    }
    Ok(dx)
}
