//! Log-domain helpers shared by the filter and measurement code.

/// log(exp(a) + exp(b)) without overflow.
#[inline(always)]
pub fn logsumexp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// log Σ exp(x_i) over a slice. Returns −∞ for an empty slice or when every
/// entry is −∞.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Normalize log weights in place so that Σ exp(w_i) = 1.
/// Returns the log normalizer, or None when all weights are −∞.
pub fn log_normalize(weights: &mut [f64]) -> Option<f64> {
    let norm = logsumexp(weights);
    if !norm.is_finite() {
        return None;
    }
    for w in weights.iter_mut() {
        *w -= norm;
    }
    Some(norm)
}

/// Effective sample size 1/Σw² of a normalized weight vector.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    if sum_sq > 0.0 {
        1.0 / sum_sq
    } else {
        0.0
    }
}
