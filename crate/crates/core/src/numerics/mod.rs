//! Dense arithmetic, the LSTM cell, softmax cross-entropy and finite-difference
//! gradient verification. Everything here is a pure function over caller-owned
//! buffers.

mod gradcheck;
mod loss;
mod lstm;
mod matrix;

pub use gradcheck::{gradient_check, gradient_check_detailed, GradCheckReport};
pub use loss::{log_softmax, softmax_cross_entropy};
pub use lstm::{
    lstm_cell_backward, lstm_cell_forward, lstm_cell_step, LstmParams, LstmState, StepCache,
    GATE_CANDIDATE, GATE_FORGET, GATE_INPUT, GATE_OUTPUT,
};
pub use matrix::{add_assign, axpy, dot, norm_sq, sigmoid, Matrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
    #[error("target index {target} out of range for {len} logits")]
    TargetOutOfRange { target: usize, len: usize },
    #[error("logits are empty")]
    EmptyLogits,
    #[error("loss is not deterministic: {first} then {second}")]
    NonDeterministic { first: f64, second: f64 },
}

pub(crate) fn ensure_len(what: &'static str, expected: usize, got: usize) -> Result<(), NumericsError> {
    if expected == got {
        Ok(())
    } else {
        Err(NumericsError::DimensionMismatch { what, expected, got })
    }
}

pub(crate) fn ensure_finite(what: &'static str, values: &[f64]) -> Result<(), NumericsError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NumericsError::NonFinite { what })
    }
}
