use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::trial::build_instance;
use super::Runner;
use crate::companion::{
    compression_error, fit_companion, kv_form_error, moore_penrose_gap, residual_identity_error,
    subspace_deviation_bound, BlockCompanion,
};
use crate::dmd::{decompose, delay_embed, snapshot_pair, DmdDecomposition, SnapshotPair};
use crate::error::Result;
use crate::linalg::{self, c64, Mat, PINV_RTOL};
use crate::seed;
use crate::signal::{generate_clean, make_spec};

const ENERGY_TOL: f64 = 1e-10;
const OPERATOR_TOL: f64 = 1e-8;
const DATA_KV_TOL: f64 = 1e-12;
/// Largest companion materialized densely for the eigenvector check.
const DENSE_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub seed_index: u64,
    /// Worst normalized error over the modes or entries checked.
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, seed_index: u64, value: f64, tolerance: f64) -> Self {
        CheckResult {
            name: name.to_string(),
            seed_index,
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanionDiagnostics {
    pub seed_index: u64,
    pub identity_errors: Vec<f64>,
    pub kv_errors: Vec<f64>,
    pub eta: f64,
    pub measured_sin_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: ExperimentConfig,
    pub seeds: usize,
    pub checks: Vec<CheckResult>,
    pub diagnostics: Vec<CompanionDiagnostics>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values
        .into_iter()
        .fold(0.0, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) })
}

/// Operator identities tying a decomposition to its snapshot pair and
/// block companion.
pub fn check_decomposition(
    pair: &SnapshotPair,
    decomp: &DmdDecomposition,
    companion: &BlockCompanion,
    seed_index: u64,
) -> Result<Vec<CheckResult>> {
    let exact_norm: Vec<f64> = (0..decomp.rank)
        .map(|j| linalg::norm2(decomp.exact_modes.col_as_slice(j)))
        .collect();
    let energy = decomp
        .energy_identity_errors()
        .into_iter()
        .zip(&exact_norm)
        .map(|(e, n)| e / (n * n).max(1.0));
    let projection = decomp
        .projection_identity_errors()
        .into_iter()
        .zip(&exact_norm)
        .map(|(e, n)| e / (1.0 + n));
    let residual = residual_identity_error(decomp, companion)?
        .into_iter()
        .zip(&exact_norm)
        .map(|(e, n)| e / (1.0 + n));
    let mut checks = vec![
        CheckResult::new("energy_identity", seed_index, worst(energy), ENERGY_TOL),
        CheckResult::new("projection_identity", seed_index, worst(projection), OPERATOR_TOL),
        CheckResult::new("residual_identity", seed_index, worst(residual), OPERATOR_TOL),
        CheckResult::new(
            "compression",
            seed_index,
            compression_error(pair, decomp, companion)?,
            OPERATOR_TOL,
        ),
    ];
    if pair.is_wide() {
        let s = linalg::singular_values(pair.x0.as_ref())?;
        if s.iter().filter(|&&x| x > PINV_RTOL * s[0]).count() == pair.x0.nrows() {
            checks.push(CheckResult::new(
                "moore_penrose_companion",
                seed_index,
                moore_penrose_gap(pair, companion)?,
                OPERATOR_TOL,
            ));
        }
    }
    Ok(checks)
}

/// Embedded single-mode trajectory against `b (v_L(lambda) (x) phi) lambda^k`.
fn data_kv_error(cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    let spec = make_spec(1, cfg.d, cfg.n, cfg.rho, cfg.delta_theta, 1.0, seed)?;
    let h = delay_embed(generate_clean(&spec)?.as_ref(), cfg.l)?;
    let lam = spec.eigenvalues()[0];
    let b = spec.amplitudes[0];
    let template: Vec<c64> = linalg::vandermonde(lam, cfg.l)
        .into_iter()
        .flat_map(|p| {
            spec.modes
                .col_as_slice(0)
                .iter()
                .map(move |x| b * p * x)
                .collect::<Vec<_>>()
        })
        .collect();
    let mut err = 0.0f64;
    let mut power = c64::new(1.0, 0.0);
    for k in 0..h.ncols() {
        let col = h.col_as_slice(k);
        let diff: Vec<c64> = col.iter().zip(&template).map(|(x, t)| x - t * power).collect();
        err = err.max(linalg::norm2(&diff) / linalg::norm2(col).max(f64::MIN_POSITIVE));
        power *= lam;
    }
    Ok(err)
}

/// KV form of every eigenvector of a dense companion: the fitted one when
/// small, otherwise a seeded random one with `D <= 4`, `L <= 6`.
fn companion_kv_errors(companion: &BlockCompanion, seed: u64) -> Result<Vec<f64>> {
    let c = if companion.dim() <= DENSE_LIMIT {
        companion.clone()
    } else {
        let (d, l) = (companion.d.min(4), companion.l.min(6));
        let mut rng = seed::rng(seed);
        BlockCompanion {
            predictor: Mat::from_fn(d, d * l, |_, _| {
                c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            }),
            l,
            d,
        }
    };
    let evd = linalg::eig(c.to_dense().as_ref())?;
    (0..c.dim())
        .map(|j| kv_form_error(evd.vectors.col_as_slice(j), evd.values[j], c.l, c.d))
        .collect()
}

/// `sin` of the largest principal angle between two equal-dimension
/// subspaces given by orthonormal bases.
fn max_principal_sine(a: &Mat<c64>, b: &Mat<c64>) -> Result<f64> {
    let coeffs = b.adjoint() * a;
    let residual = a - b * &coeffs;
    Ok(linalg::singular_values(residual.as_ref())?[0])
}

fn verify_seed(cfg: &ExperimentConfig, index: u64) -> Result<(Vec<CheckResult>, CompanionDiagnostics)> {
    let inst = build_instance(cfg, index)?;
    let decomp = decompose(&inst.pair, cfg.rank)?;
    let companion = fit_companion(&inst.pair)?;
    let mut checks = check_decomposition(&inst.pair, &decomp, &companion, index)?;

    checks.push(CheckResult::new(
        "data_side_kv",
        index,
        data_kv_error(cfg, seed::stream_seed(inst.seed, 2))?,
        DATA_KV_TOL,
    ));
    let kv_errors = companion_kv_errors(&companion, seed::stream_seed(inst.seed, 3))?;
    checks.push(CheckResult::new(
        "companion_eigenvector_kv",
        index,
        worst(kv_errors.iter().copied()),
        OPERATOR_TOL,
    ));

    let clean = snapshot_pair(inst.clean.as_ref(), cfg.l)?;
    let noise = &inst.pair.x0 - &clean.x0;
    let noise_norm = linalg::singular_values(noise.as_ref())?[0];
    let eta = subspace_deviation_bound(&inst.spec, cfg.l, noise_norm)?;
    let m = cfg.m;
    let signal_basis = linalg::thin_svd(clean.x0.as_ref())?.u.subcols(0, m).to_owned();
    let estimate = decomp.svd.u.subcols(0, m).to_owned();
    let sin_theta = max_principal_sine(&signal_basis, &estimate)?;
    checks.push(CheckResult {
        name: "subspace_deviation_bound".into(),
        seed_index: index,
        value: sin_theta,
        tolerance: eta,
        passed: !eta.is_finite() || sin_theta <= eta,
    });

    let diagnostics = CompanionDiagnostics {
        seed_index: index,
        identity_errors: residual_identity_error(&decomp, &companion)?,
        kv_errors,
        eta,
        measured_sin_theta: sin_theta,
    };
    Ok((checks, diagnostics))
}

impl Runner {
    pub fn verify(&self, cfg: &ExperimentConfig, seeds: usize) -> Result<VerifyReport> {
        cfg.validate_instance()?;
        let per_seed = self
            .map(seeds, |i| verify_seed(cfg, i as u64))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let (checks, diagnostics): (Vec<Vec<CheckResult>>, Vec<CompanionDiagnostics>) = per_seed.into_iter().unzip();
        let checks: Vec<CheckResult> = checks.into_iter().flatten().collect();
        let passed = checks.iter().all(|c| c.passed);
        Ok(VerifyReport {
            config: cfg.clone(),
            seeds,
            checks,
            diagnostics,
            passed,
        })
    }
}

pub fn verify(cfg: &ExperimentConfig, seeds: usize) -> Result<VerifyReport> {
    Runner::new(None)?.verify(cfg, seeds)
}
