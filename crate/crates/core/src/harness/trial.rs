use crate::dmd::{decompose, snapshot_pair, DmdDecomposition, SnapshotPair};
use crate::error::Result;
use crate::linalg::{c64, Mat};
use crate::seed;
use crate::selection::{bic_order, binary_select, gap_order, score_modes, Method, ModeScoreVector, SelectionResult};
use crate::signal::{add_noise, generate_clean, make_spec, NoiseSpec, SignalSpec};

use super::config::ExperimentConfig;

/// Everything drawn for one trial, before decomposition.
pub struct TrialInstance {
    pub seed: u64,
    pub spec: SignalSpec,
    pub clean: Mat<c64>,
    pub noisy: Mat<c64>,
    pub pair: SnapshotPair,
}

pub fn build_instance(cfg: &ExperimentConfig, trial_index: u64) -> Result<TrialInstance> {
    let child = seed::child_seed(cfg.master_seed, trial_index);
    let spec = make_spec(
        cfg.m,
        cfg.d,
        cfg.n,
        cfg.rho,
        cfg.delta_theta,
        cfg.kappa_b,
        seed::stream_seed(child, 0),
    )?;
    let clean = generate_clean(&spec)?;
    let noisy = add_noise(clean.as_ref(), NoiseSpec::new(cfg.snr_db, seed::stream_seed(child, 1)))?;
    let pair = snapshot_pair(noisy.as_ref(), cfg.l)?;
    Ok(TrialInstance {
        seed: child,
        spec,
        clean,
        noisy,
        pair,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    /// `None` when the method itself failed.
    pub m_hat: Option<usize>,
    pub hit: bool,
    pub error: Option<String>,
    pub scores: Option<ModeScoreVector>,
    pub selection: Option<SelectionResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub index: u64,
    pub seed: u64,
    pub true_eigenvalues: Vec<c64>,
    /// Computed eigenvalues; empty when the decomposition failed.
    pub eigenvalues: Vec<c64>,
    pub methods: Vec<MethodOutcome>,
    /// Decomposition failure; such trials count for no method.
    pub failure: Option<String>,
}

impl TrialOutcome {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn method(&self, method: Method) -> Option<&MethodOutcome> {
        self.methods.iter().find(|o| o.method == method)
    }
}

/// Estimated order of one method. Order-only baselines search `0..=M`
/// (BIC) or `1..=M` (GAP); mode-scoring methods split the `M` modes.
pub fn estimate_order(
    method: Method,
    decomp: &DmdDecomposition,
    n_cols: usize,
) -> Result<(usize, Option<ModeScoreVector>, Option<SelectionResult>)> {
    match method {
        Method::Bic => Ok((bic_order(&decomp.svd, n_cols, decomp.rank)?, None, None)),
        Method::Gap => Ok((gap_order(&decomp.svd, decomp.rank)?, None, None)),
        _ => {
            let scores = score_modes(method, decomp)?;
            let sel = binary_select(&scores)?;
            Ok((sel.m_hat, Some(scores), Some(sel)))
        }
    }
}

/// Decomposes once and evaluates every configured method on the result.
pub fn run_trial(cfg: &ExperimentConfig, trial_index: u64) -> Result<TrialOutcome> {
    cfg.validate()?;
    let inst = build_instance(cfg, trial_index)?;
    let mut out = TrialOutcome {
        index: trial_index,
        seed: inst.seed,
        true_eigenvalues: inst.spec.eigenvalues(),
        eigenvalues: Vec::new(),
        methods: Vec::new(),
        failure: None,
    };
    let decomp = match decompose(&inst.pair, cfg.rank) {
        Ok(d) => d,
        Err(e) => {
            log::warn!("trial {trial_index}: decomposition failed: {e}");
            out.failure = Some(e.to_string());
            return Ok(out);
        }
    };
    out.eigenvalues = decomp.eigenvalues.clone();
    out.methods = cfg
        .methods
        .iter()
        .map(|&method| match estimate_order(method, &decomp, inst.pair.n_cols()) {
            Ok((m_hat, scores, selection)) => MethodOutcome {
                method,
                m_hat: Some(m_hat),
                hit: m_hat == cfg.m,
                error: None,
                scores,
                selection,
            },
            Err(e) => {
                log::warn!("trial {trial_index}: {method} failed: {e}");
                MethodOutcome {
                    method,
                    m_hat: None,
                    hit: false,
                    error: Some(e.to_string()),
                    scores: None,
                    selection: None,
                }
            }
        })
        .collect();
    Ok(out)
}
