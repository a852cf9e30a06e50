use crate::dmd::TruncatedSvd;
use crate::error::{invalid, Result};

const EIG_FLOOR: f64 = 1e-300;

/// Wax-Kailath criterion with the BIC penalty for `k = 0..=max_order`, on
/// the sample-covariance eigenvalues `sigma_i^2 / n_cols`.
pub fn bic_curve(sigma: &[f64], n_cols: usize, max_order: usize) -> Result<Vec<f64>> {
    let p = sigma.len();
    if max_order >= p {
        return Err(invalid(format!("BIC needs max_order < p = {p}, got {max_order}")));
    }
    if n_cols < 2 {
        return Err(invalid(format!("BIC needs at least 2 snapshots, got {n_cols}")));
    }
    let n = n_cols as f64;
    let ell: Vec<f64> = sigma.iter().map(|s| (s * s / n).max(EIG_FLOOR)).collect();
    Ok((0..=max_order)
        .map(|k| {
            let tail = &ell[k..];
            let q = tail.len() as f64;
            let log_g = tail.iter().map(|x| x.ln()).sum::<f64>() / q;
            let log_a = (tail.iter().sum::<f64>() / q).ln();
            let kf = k as f64;
            -2.0 * n * q * (log_g - log_a) + kf * (2.0 * p as f64 - kf) * n.ln()
        })
        .collect())
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = k;
        }
    }
    best
}

pub fn bic_order_from_sigma(sigma: &[f64], n_cols: usize, max_order: usize) -> Result<usize> {
    Ok(argmin(&bic_curve(sigma, n_cols, max_order)?))
}

/// Order minimizing the criterion over all `min(D*L, N-L)` singular values
/// of `X0`.
pub fn bic_order(svd: &TruncatedSvd, n_cols: usize, max_order: usize) -> Result<usize> {
    bic_order_from_sigma(&svd.full_sigma, n_cols, max_order)
}

pub fn gap_order_from_sigma(sigma: &[f64], max_order: usize) -> Result<usize> {
    if max_order == 0 || max_order + 1 > sigma.len() {
        return Err(invalid(format!(
            "gap rule needs 1 <= max_order <= {}, got {max_order}",
            sigma.len().saturating_sub(1)
        )));
    }
    let mut best = (1, f64::NEG_INFINITY);
    for j in 1..=max_order {
        if sigma[j] == 0.0 {
            return Ok(j);
        }
        let ratio = sigma[j - 1] / sigma[j];
        if ratio > best.1 * (1.0 + 1e-12) {
            best = (j, ratio);
        }
    }
    Ok(best.0)
}

/// `argmax_j sigma_j / sigma_{j+1}` over `1 <= j <= max_order`.
pub fn gap_order(svd: &TruncatedSvd, max_order: usize) -> Result<usize> {
    gap_order_from_sigma(&svd.full_sigma, max_order)
}
