use serde::{Deserialize, Serialize};

use super::config::{check_grid, ExperimentConfig, SweepParam};
use super::trial::{run_trial, TrialOutcome};
use super::Runner;
use crate::error::{invalid, Result};
use crate::selection::Method;

/// Hit counts of one method across the grid. `trials[g]` counts only the
/// trials that produced an estimate; the rest are in `failed[g]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCurve {
    pub method: Method,
    pub hits: Vec<usize>,
    pub trials: Vec<usize>,
    pub failed: Vec<usize>,
    /// `hits / trials`; NaN where every trial failed.
    pub hit_prob: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Unknown when read back from a CSV.
    pub parameter: Option<SweepParam>,
    pub grid: Vec<f64>,
    pub curves: Vec<MethodCurve>,
    pub trials: Option<usize>,
    pub master_seed: Option<u64>,
}

impl SweepResult {
    pub fn curve(&self, method: Method) -> Option<&MethodCurve> {
        self.curves.iter().find(|c| c.method == method)
    }
}

pub struct SweepRun {
    pub result: SweepResult,
    /// Grid-major, `trials` per grid point.
    pub outcomes: Vec<TrialOutcome>,
}

impl Runner {
    /// Trial `t` at grid point `g` uses trial index `g * trials + t`.
    pub fn sweep(&self, cfg: &ExperimentConfig, param: SweepParam, grid: &[f64], trials: usize) -> Result<SweepRun> {
        check_grid(grid)?;
        if trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        let configs = grid
            .iter()
            .map(|&v| {
                let c = ExperimentConfig {
                    trials,
                    ..cfg.with_param(param, v)?
                };
                c.validate()?;
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        let outcomes = self
            .map(grid.len() * trials, |k| run_trial(&configs[k / trials], k as u64))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;

        let curves = cfg
            .methods
            .iter()
            .map(|&method| {
                let mut curve = MethodCurve {
                    method,
                    hits: vec![0; grid.len()],
                    trials: vec![0; grid.len()],
                    failed: vec![0; grid.len()],
                    hit_prob: vec![f64::NAN; grid.len()],
                };
                for (k, o) in outcomes.iter().enumerate() {
                    let g = k / trials;
                    match o.method(method).filter(|r| r.m_hat.is_some()) {
                        Some(r) => {
                            curve.trials[g] += 1;
                            curve.hits[g] += r.hit as usize;
                        }
                        None => curve.failed[g] += 1,
                    }
                }
                for g in 0..grid.len() {
                    if curve.trials[g] > 0 {
                        curve.hit_prob[g] = curve.hits[g] as f64 / curve.trials[g] as f64;
                    }
                }
                curve
            })
            .collect();
        Ok(SweepRun {
            result: SweepResult {
                parameter: Some(param),
                grid: grid.to_vec(),
                curves,
                trials: Some(trials),
                master_seed: Some(cfg.master_seed),
            },
            outcomes,
        })
    }
}

pub fn run_sweep(cfg: &ExperimentConfig, param: SweepParam, grid: &[f64], trials: usize) -> Result<SweepResult> {
    Ok(Runner::new(None)?.sweep(cfg, param, grid, trials)?.result)
}

/// Trapezoidal area under each hit-probability curve divided by the grid
/// span, so a constant curve `p` has AUC `p`.
pub fn compute_auc(sweep: &SweepResult) -> Result<Vec<(Method, f64)>> {
    let x = &sweep.grid;
    if x.len() < 2 {
        return Err(invalid(format!("AUC needs at least 2 grid points, got {}", x.len())));
    }
    check_grid(x)?;
    let span = x[x.len() - 1] - x[0];
    Ok(sweep
        .curves
        .iter()
        .map(|c| {
            let area: f64 = (1..x.len())
                .map(|i| 0.5 * (c.hit_prob[i] + c.hit_prob[i - 1]) * (x[i] - x[i - 1]))
                .sum();
            (c.method, area / span)
        })
        .collect())
}
