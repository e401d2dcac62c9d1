use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} points, got {found}")]
    InsufficientN { needed: usize, found: usize },
    #[error("series is constant, correlation undefined")]
    DegenerateSeries,
    #[error("non-finite value in series")]
    NonFinite,
    #[error("R² must lie in [0, 1], got {0}")]
    InvalidR2(String),
}

fn check(pred: &[f64], actual: &[f64]) -> Result<(), MetricError> {
    if pred.len() != actual.len() {
        return Err(MetricError::LengthMismatch(pred.len(), actual.len()));
    }
    if pred.len() < 2 {
        return Err(MetricError::InsufficientN {
            needed: 2,
            found: pred.len(),
        });
    }
    if pred.iter().chain(actual).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    Ok(())
}

/// Pearson correlation from running means and co-moments (Welford update).
pub fn pearson_r(pred: &[f64], actual: &[f64]) -> Result<f64, MetricError> {
    check(pred, actual)?;
    let (mut mx, mut my) = (0.0, 0.0);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (k, (&x, &y)) in pred.iter().zip(actual).enumerate() {
        let n = (k + 1) as f64;
        let dx = x - mx;
        let dy = y - my;
        mx += dx / n;
        my += dy / n;
        sxx += dx * (x - mx);
        syy += dy * (y - my);
        sxy += dx * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(MetricError::DegenerateSeries);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Squared Pearson correlation.
pub fn pearson_r2(pred: &[f64], actual: &[f64]) -> Result<f64, MetricError> {
    pearson_r(pred, actual).map(|r| r * r)
}

/// 1-based ranks, ties sharing the average of the positions they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman_rho(pred: &[f64], actual: &[f64]) -> Result<f64, MetricError> {
    check(pred, actual)?;
    pearson_r(&average_ranks(pred), &average_ranks(actual))
}

fn fisher_interval(r: f64, n: usize) -> (f64, f64) {
    let z = r.atanh();
    let half = 1.96 / ((n - 3) as f64).sqrt();
    ((z - half).tanh(), (z + half).tanh())
}

/// 95% interval for R² through the Fisher z-transform of r = sqrt(R²).
/// Both endpoints are squared back and clamped to [0, 1]; a lower r bound
/// below zero maps to 0.
pub fn r2_confidence_interval(r2: f64, n: usize) -> Result<(f64, f64), MetricError> {
    if n < 4 {
        return Err(MetricError::InsufficientN {
            needed: 4,
            found: n,
        });
    }
    if !(0.0..=1.0).contains(&r2) {
        return Err(MetricError::InvalidR2(r2.to_string()));
    }
    let (lo, hi) = fisher_interval(r2.sqrt(), n);
    let sq = |r: f64| if r <= 0.0 { 0.0 } else { (r * r).min(1.0) };
    Ok((sq(lo), sq(hi)))
}

/// 95% Fisher interval for a signed correlation (used for Spearman rho).
pub fn correlation_confidence_interval(r: f64, n: usize) -> Result<(f64, f64), MetricError> {
    if n < 4 {
        return Err(MetricError::InsufficientN {
            needed: 4,
            found: n,
        });
    }
    if !(-1.0..=1.0).contains(&r) || r.is_nan() {
        return Err(MetricError::InvalidR2(r.to_string()));
    }
    Ok(fisher_interval(r, n))
}
