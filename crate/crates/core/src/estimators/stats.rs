/// Spreads below this are degenerate even when `epsilon` is zero.
pub(crate) const MIN_SPREAD: f64 = 1e-12;

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divides by `n`).
pub(crate) fn pop_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub(crate) fn pop_std(xs: &[f64]) -> f64 {
    pop_variance(xs).sqrt()
}

pub(crate) fn is_degenerate(spread: f64, epsilon: f64) -> bool {
    !(spread >= epsilon.max(MIN_SPREAD))
}

/// Population z-scores; all zeros when the spread is degenerate.
pub(crate) fn zscores(xs: &[f64], epsilon: f64) -> Vec<f64> {
    let sd = pop_std(xs);
    if is_degenerate(sd, epsilon) {
        return vec![0.0; xs.len()];
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) / sd).collect()
}

/// `(x - mean) / sqrt(var + epsilon)`, the group-relative normalization.
pub(crate) fn group_relative(xs: &[f64], epsilon: f64) -> Vec<f64> {
    let var = pop_variance(xs);
    if is_degenerate(var.sqrt(), epsilon) {
        return vec![0.0; xs.len()];
    }
    let m = mean(xs);
    let sd = (var + epsilon).sqrt();
    xs.iter().map(|x| (x - m) / sd).collect()
}
