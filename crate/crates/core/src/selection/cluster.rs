use serde::{Deserialize, Serialize};

use super::{ModeScoreVector, Orientation};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeLabel {
    True,
    Spurious,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub labels: Vec<ModeLabel>,
    pub m_hat: usize,
    /// Mean transformed score of the (true, spurious) clusters.
    pub cluster_means: (f64, f64),
    /// Scores carried no split; every mode was labelled true.
    pub degenerate: bool,
}

/// Residual scores at or below this level are numerically zero.
const ZERO_RESIDUAL: f64 = 1e-10;
/// Relative spread below which transformed scores count as identical.
const FLAT_SPREAD: f64 = 1e-8;

fn sse(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Within-cluster sum of squares of a labelling, on transformed scores.
pub fn split_cost(features: &[f64], labels: &[ModeLabel]) -> f64 {
    let (t, s): (Vec<(f64, ModeLabel)>, Vec<_>) = features
        .iter()
        .copied()
        .zip(labels.iter().copied())
        .partition(|(_, l)| *l == ModeLabel::True);
    let t: Vec<f64> = t.into_iter().map(|x| x.0).collect();
    let s: Vec<f64> = s.into_iter().map(|x| x.0).collect();
    sse(&t) + sse(&s)
}

fn is_degenerate(scores: &ModeScoreVector, features: &[f64]) -> bool {
    if scores.orientation == Orientation::SmallerIsTrue && scores.scores.iter().all(|&s| s <= ZERO_RESIDUAL) {
        return true;
    }
    let lo = features.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = features.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo <= FLAT_SPREAD * lo.abs().max(hi.abs()).max(1.0)
}

/// Exact two-cluster split of the transformed scores; the lower-mean
/// cluster is labelled true.
pub fn binary_select(scores: &ModeScoreVector) -> Result<SelectionResult> {
    let m = scores.scores.len();
    if m < 2 {
        return Err(invalid(format!("binary selection needs at least 2 modes, got {m}")));
    }
    if let Some(j) = scores.scores.iter().position(|s| !s.is_finite()) {
        return Err(invalid(format!("{} score of mode {j} is not finite", scores.method)));
    }
    let f = scores.features();
    if is_degenerate(scores, &f) {
        log::warn!(
            "{} scores are numerically identical; labelling all {m} modes true",
            scores.method
        );
        let mu = mean(&f);
        return Ok(SelectionResult {
            labels: vec![ModeLabel::True; m],
            m_hat: m,
            cluster_means: (mu, mu),
            degenerate: true,
        });
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| f[a].total_cmp(&f[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| f[i]).collect();
    let tie = 1e-12 * sse(&sorted);

    let mut best = (1, f64::INFINITY);
    for k in 1..m {
        let cost = sse(&sorted[..k]) + sse(&sorted[k..]);
        if cost < best.1 - tie {
            best = (k, cost);
        }
    }
    let k = best.0;
    let mut labels = vec![ModeLabel::Spurious; m];
    for &i in &order[..k] {
        labels[i] = ModeLabel::True;
    }
    Ok(SelectionResult {
        labels,
        m_hat: k,
        cluster_means: (mean(&sorted[..k]), mean(&sorted[k..])),
        degenerate: false,
    })
}
