use serde::{Deserialize, Serialize};

use super::assignment::min_cost_assignment;
use super::config::{ExperimentConfig, SweepParam};
use super::trial::build_instance;
use super::Runner;
use crate::dmd::decompose;
use crate::error::{invalid, Error, Result};
use crate::linalg::c64;

/// Evaluation points per empirical CDF.
pub const CDF_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpuriousCdf {
    pub l_grid: Vec<usize>,
    /// Pooled spurious magnitudes per `L`, sorted ascending.
    pub samples: Vec<Vec<f64>>,
    /// Trials per `L` whose decomposition failed.
    pub failed: Vec<usize>,
    /// Shared magnitude axis, uniform on `[0, max(1, largest sample)]`.
    pub points: Vec<f64>,
    /// `cdf[i][k]`: fraction of samples at `L = l_grid[i]` not above `points[k]`.
    /// Empty when that pool is empty.
    pub cdf: Vec<Vec<f64>>,
    pub trials: usize,
    pub master_seed: u64,
}

impl SpuriousCdf {
    pub fn is_empty(&self, i: usize) -> bool {
        self.samples[i].is_empty()
    }

    pub fn quantile(&self, i: usize, q: f64) -> Option<f64> {
        (!self.samples[i].is_empty()).then(|| quantile(&self.samples[i], q))
    }

    pub fn median(&self, i: usize) -> Option<f64> {
        self.quantile(i, 0.5)
    }
}

/// Linearly interpolated quantile of ascending `sorted` data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Fraction of ascending `sorted` samples `<= x` for each `x` in `points`.
pub fn empirical_cdf(sorted: &[f64], points: &[f64]) -> Vec<f64> {
    let n = sorted.len() as f64;
    points
        .iter()
        .map(|&x| sorted.partition_point(|&s| s <= x) as f64 / n)
        .collect()
}

/// Magnitudes of the computed eigenvalues left over after optimally
/// matching each true eigenvalue to a distinct computed one.
pub fn spurious_magnitudes(truth: &[c64], computed: &[c64]) -> Result<Vec<f64>> {
    if computed.len() < truth.len() {
        return Err(invalid(format!(
            "cannot match {} true eigenvalues to {} computed ones",
            truth.len(),
            computed.len()
        )));
    }
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| computed.iter().map(|c| (c - t).norm()).collect())
        .collect();
    let matched = min_cost_assignment(&cost)?;
    let mut taken = vec![false; computed.len()];
    for j in matched {
        taken[j] = true;
    }
    Ok(computed
        .iter()
        .zip(&taken)
        .filter(|(_, &t)| !t)
        .map(|(c, _)| c.norm())
        .collect())
}

impl Runner {
    /// Trial `t` at `l_grid[g]` uses trial index `g * trials + t`.
    pub fn spurious_cdf(&self, cfg: &ExperimentConfig, l_grid: &[usize], trials: usize) -> Result<SpuriousCdf> {
        if l_grid.is_empty() || trials == 0 {
            return Err(invalid("need a nonempty L grid and at least one trial"));
        }
        if cfg.rank < cfg.m {
            return Err(invalid(format!(
                "cannot match m = {} true eigenvalues with M = {}",
                cfg.m, cfg.rank
            )));
        }
        let configs = l_grid
            .iter()
            .map(|&l| {
                let c = cfg.with_param(SweepParam::Delay, l as f64)?;
                c.validate_instance()?;
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        let per_trial: Vec<Result<Option<Vec<f64>>>> = self.map(l_grid.len() * trials, |k| {
            let c = &configs[k / trials];
            let inst = build_instance(c, k as u64)?;
            match decompose(&inst.pair, c.rank) {
                Ok(d) => spurious_magnitudes(&inst.spec.eigenvalues(), &d.eigenvalues).map(Some),
                Err(e @ (Error::RankDeficient(_) | Error::Convergence { .. })) => {
                    log::warn!("trial {k}: decomposition failed: {e}");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        });

        let mut samples = vec![Vec::new(); l_grid.len()];
        let mut failed = vec![0; l_grid.len()];
        for (k, r) in per_trial.into_iter().enumerate() {
            match r? {
                Some(mags) => samples[k / trials].extend(mags),
                None => failed[k / trials] += 1,
            }
        }
        for (s, l) in samples.iter_mut().zip(l_grid) {
            s.sort_by(f64::total_cmp);
            if s.is_empty() {
                log::warn!("L = {l}: no spurious eigenvalues pooled; CDF omitted");
            }
        }
        let top = samples.iter().flatten().copied().fold(1.0, f64::max);
        let points: Vec<f64> = (0..CDF_POINTS)
            .map(|k| top * k as f64 / (CDF_POINTS - 1) as f64)
            .collect();
        let cdf = samples
            .iter()
            .map(|s| {
                if s.is_empty() {
                    Vec::new()
                } else {
                    empirical_cdf(s, &points)
                }
            })
            .collect();
        Ok(SpuriousCdf {
            l_grid: l_grid.to_vec(),
            samples,
            failed,
            points,
            cdf,
            trials,
            master_seed: cfg.master_seed,
        })
    }
}

pub fn spurious_cdf(cfg: &ExperimentConfig, l_grid: &[usize], trials: usize) -> Result<SpuriousCdf> {
    Runner::new(None)?.spurious_cdf(cfg, l_grid, trials)
}
