use super::NumericsError;

/// Compares an analytic gradient against central finite differences.
///
/// `loss` is evaluated at `params ± eps·e_k` for every coordinate `k`. The
/// result is `max_k |a_k − n_k| / max(|a_k|, |n_k|, 1e-8)`.
pub fn gradient_check<F>(
    mut loss: F,
    params: &[f64],
    analytic: &[f64],
    eps: f64,
) -> Result<f64, NumericsError>
where
    F: FnMut(&[f64]) -> f64,
{
    let report = gradient_check_detailed(&mut loss, params, analytic, eps)?;
    Ok(report.max_relative_error)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

pub fn gradient_check_detailed<F>(
    mut loss: F,
    params: &[f64],
    analytic: &[f64],
    eps: f64,
) -> Result<GradCheckReport, NumericsError>
where
    F: FnMut(&[f64]) -> f64,
{
    super::ensure_len("analytic gradient", params.len(), analytic.len())?;
    let first = loss(params);
    let second = loss(params);
    if first.to_bits() != second.to_bits() {
        return Err(NumericsError::NonDeterministic { first, second });
    }

    let mut work = params.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for k in 0..params.len() {
        let orig = work[k];
        work[k] = orig + eps;
        let plus = loss(&work);
        work[k] = orig - eps;
        let minus = loss(&work);
        work[k] = orig;

        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic[k];
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        let rel = (a - numeric).abs() / denom;
        if rel > report.max_relative_error || rel.is_nan() {
            report = GradCheckReport {
                max_relative_error: rel,
                worst_index: k,
                analytic: a,
                numeric,
            };
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let w = [0.5, -1.25, 2.0, 0.0, 0.75];
        let f = |p: &[f64]| 0.5 * p.iter().map(|v| v * v).sum::<f64>();
        let err = gradient_check(f, &w, &w, 1e-5).unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let w = [0.5, -1.25];
        let f = |p: &[f64]| 0.5 * p.iter().map(|v| v * v).sum::<f64>();
        let err = gradient_check(f, &w, &[0.5, -1.0], 1e-5).unwrap();
        assert!(err > 0.1);
    }

    #[test]
    fn nondeterminism_is_detected() {
        let mut calls = 0.0;
        let f = |_: &[f64]| {
            calls += 1.0;
            calls
        };
        assert!(matches!(
            gradient_check(f, &[1.0], &[0.0], 1e-5),
            Err(NumericsError::NonDeterministic { .. })
        ));
    }
}
