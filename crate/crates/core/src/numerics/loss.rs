use super::NumericsError;

/// Numerically stable `log softmax`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter().map(|v| v - lse).collect()
}

/// Returns `-log softmax(logits)[target]` and its gradient `softmax - onehot(target)`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>), NumericsError> {
    if logits.is_empty() {
        return Err(NumericsError::EmptyLogits);
    }
    if target >= logits.len() {
        return Err(NumericsError::TargetOutOfRange {
            target,
            len: logits.len(),
        });
    }
    super::ensure_finite("logits", logits)?;
    let logp = log_softmax(logits);
    let loss = -logp[target];
    let mut grad: Vec<f64> = logp.iter().map(|v| v.exp()).collect();
    grad[target] -= 1.0;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_v() {
        let (loss, grad) = softmax_cross_entropy(&[0.7; 4], 2).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((loss - 1.3863).abs() < 1e-4);
        assert!((grad[2] + 0.75).abs() < 1e-12);
        assert!((grad[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn saturated_logits() {
        let (loss, grad) = softmax_cross_entropy(&[30.0, -30.0], 0).unwrap();
        assert!(loss.abs() < 1e-9);
        assert!(grad.iter().all(|g| g.abs() < 1e-9));
    }

    #[test]
    fn errors() {
        assert_eq!(softmax_cross_entropy(&[], 0), Err(NumericsError::EmptyLogits));
        assert_eq!(
            softmax_cross_entropy(&[1.0, 2.0], 2),
            Err(NumericsError::TargetOutOfRange { target: 2, len: 2 })
        );
    }

    #[test]
    fn log_softmax_handles_large_values() {
        let lp = log_softmax(&[1000.0, 1000.0]);
        assert!((lp[0] + 2f64.ln()).abs() < 1e-12);
    }
}
