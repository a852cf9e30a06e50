//! Synthetic multi-channel exponential signals with controlled order, phase
//! separation, damping, amplitude spread and SNR.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{c64, Mat, MatRef};
use crate::seed;

/// Ground-truth parameters of `s_k = sum_j b_j phi_j lambda_j^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub m: usize,
    pub d: usize,
    pub n: usize,
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    /// `d x m`, unit-norm columns.
    pub modes: Mat<c64>,
    pub amplitudes: Vec<c64>,
}

impl SignalSpec {
    pub fn eigenvalues(&self) -> Vec<c64> {
        self.rho
            .iter()
            .zip(&self.theta)
            .map(|(&r, &t)| c64::from_polar(r, t))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m;
        if m == 0 || self.d == 0 || self.n < 2 {
            return Err(invalid(format!(
                "need m >= 1, D >= 1, N > 1 (got m={}, D={}, N={})",
                m, self.d, self.n
            )));
        }
        if self.rho.len() != m || self.theta.len() != m || self.amplitudes.len() != m {
            return Err(invalid("rho, theta and amplitudes must each have m entries"));
        }
        if self.modes.nrows() != self.d || self.modes.ncols() != m {
            return Err(Error::ShapeMismatch(format!(
                "modes must be {}x{}, got {}x{}",
                self.d,
                m,
                self.modes.nrows(),
                self.modes.ncols()
            )));
        }
        if let Some(r) = self.rho.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(invalid(format!("rho must lie in (0, 1], got {r}")));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(invalid("theta must be finite"));
        }
        if self.amplitudes.iter().any(|b| !(b.norm() > 0.0) || !b.is_finite()) {
            return Err(invalid("amplitudes must be finite and nonzero"));
        }
        for j in 0..m {
            let norm = crate::linalg::norm2(&crate::linalg::column(self.modes.as_ref(), j));
            if (norm - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("mode {j} has norm {norm}, expected 1")));
            }
        }
        Ok(())
    }
}

/// Builds a spec with common damping, equally spaced phases at a seeded
/// random offset, a log-linear amplitude ramp from 1 to `kappa_b`, and
/// normalized complex Gaussian spatial modes.
pub fn make_spec(
    m: usize,
    d: usize,
    n: usize,
    rho_common: f64,
    delta_theta: f64,
    kappa_b: f64,
    seed: u64,
) -> Result<SignalSpec> {
    if m == 0 || d == 0 || n < 2 {
        return Err(invalid(format!("need m >= 1, D >= 1, N > 1 (got m={m}, D={d}, N={n})")));
    }
    if !(rho_common > 0.0 && rho_common <= 1.0) {
        return Err(invalid(format!("rho must lie in (0, 1], got {rho_common}")));
    }
    if m > 1 && !(delta_theta > 0.0 && delta_theta <= TAU / m as f64) {
        return Err(invalid(format!(
            "delta_theta must lie in (0, 2pi/m] = (0, {:.6}], got {delta_theta}",
            TAU / m as f64
        )));
    }
    if !(kappa_b >= 1.0) || !kappa_b.is_finite() {
        return Err(invalid(format!("kappa_b must be a finite value >= 1, got {kappa_b}")));
    }

    let mut rng = seed::rng(seed);
    let offset: f64 = rng.random::<f64>() * TAU;
    let theta = (0..m)
        .map(|j| (offset + j as f64 * delta_theta).rem_euclid(TAU))
        .collect();

    let amplitudes = (0..m)
        .map(|j| {
            let t = if m == 1 { 0.0 } else { j as f64 / (m - 1) as f64 };
            c64::new(kappa_b.powf(t), 0.0)
        })
        .collect();

    let mut modes = Mat::<c64>::zeros(d, m);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..m {
        for i in 0..d {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            modes[(i, j)] = c64::new(re * scale, im * scale);
        }
        let norm = crate::linalg::norm2(modes.col_as_slice(j));
        for x in modes.col_as_slice_mut(j) {
            *x /= norm;
        }
    }

    Ok(SignalSpec {
        m,
        d,
        n,
        rho: vec![rho_common; m],
        theta,
        modes,
        amplitudes,
    })
}

/// Noiseless `D x N` trajectory.
pub fn generate_clean(spec: &SignalSpec) -> Result<Mat<c64>> {
    spec.validate()?;
    let lambdas = spec.eigenvalues();
    let mut out = Mat::<c64>::zeros(spec.d, spec.n);
    for (j, (&lam, &b)) in lambdas.iter().zip(&spec.amplitudes).enumerate() {
        let mut p = b;
        for k in 0..spec.n {
            for i in 0..spec.d {
                out[(i, k)] += spec.modes[(i, j)] * p;
            }
            p *= lam;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NoiseField {
    /// Circularly-symmetric complex Gaussian.
    #[default]
    Complex,
    /// Real Gaussian added to the real part only.
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub seed: u64,
    #[serde(default)]
    pub field: NoiseField,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        Self {
            snr_db,
            seed,
            field: NoiseField::Complex,
        }
    }
}

/// Per-entry noise variance realizing `snr_db` against `clean`.
pub fn noise_variance(clean: MatRef<'_, c64>, snr_db: f64) -> Result<f64> {
    let count = clean.nrows() * clean.ncols();
    if count == 0 {
        return Err(invalid("clean signal is empty"));
    }
    let mut power = 0.0;
    for j in 0..clean.ncols() {
        for i in 0..clean.nrows() {
            power += clean[(i, j)].norm_sqr();
        }
    }
    power /= count as f64;
    if !(power > 0.0) {
        return Err(Error::Degenerate("signal power is zero, SNR is undefined".into()));
    }
    Ok(power / 10f64.powf(snr_db / 10.0))
}

pub fn add_noise(clean: MatRef<'_, c64>, noise: NoiseSpec) -> Result<Mat<c64>> {
    if clean.nrows() == 0 || clean.ncols() == 0 {
        return Err(invalid("clean signal is empty"));
    }
    if noise.snr_db == f64::INFINITY {
        return Ok(clean.to_owned());
    }
    if !noise.snr_db.is_finite() {
        return Err(invalid(format!("snr_db must be finite or +inf, got {}", noise.snr_db)));
    }
    let var = noise_variance(clean, noise.snr_db)?;
    let mut rng = seed::rng(noise.seed);
    let mut out = clean.to_owned();
    match noise.field {
        NoiseField::Complex => {
            let sd = (var / 2.0).sqrt();
            for j in 0..out.ncols() {
                for i in 0..out.nrows() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    out[(i, j)] += c64::new(re * sd, im * sd);
                }
            }
        }
        NoiseField::Real => {
            let sd = var.sqrt();
            for j in 0..out.ncols() {
                for i in 0..out.nrows() {
                    let re: f64 = rng.sample(StandardNormal);
                    out[(i, j)] += c64::new(re * sd, 0.0);
                }
            }
        }
    }
    Ok(out)
}

/// Minimal circular pairwise gap.
pub fn measure_delta_theta(theta: &[f64]) -> Result<f64> {
    if theta.len() < 2 {
        return Err(invalid("phase gap needs at least two phases"));
    }
    let mut best = f64::INFINITY;
    for (a, &ta) in theta.iter().enumerate() {
        for &tb in &theta[a + 1..] {
            let diff = (ta - tb).abs().rem_euclid(TAU);
            best = best.min(diff.min(TAU - diff));
        }
    }
    Ok(best)
}

/// On-disk form, shared with fixtures produced by other tools.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalSpecDoc {
    pub m: usize,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    /// Row-major, `D` rows of `m` entries.
    pub modes_re: Vec<Vec<f64>>,
    pub modes_im: Vec<Vec<f64>>,
    pub amp_re: Vec<f64>,
    pub amp_im: Vec<f64>,
}

impl From<&SignalSpec> for SignalSpecDoc {
    fn from(s: &SignalSpec) -> Self {
        let rows = |f: fn(&c64) -> f64| {
            (0..s.d)
                .map(|i| (0..s.m).map(|j| f(&s.modes[(i, j)])).collect())
                .collect()
        };
        Self {
            m: s.m,
            d: s.d,
            n: s.n,
            rho: s.rho.clone(),
            theta: s.theta.clone(),
            modes_re: rows(|z| z.re),
            modes_im: rows(|z| z.im),
            amp_re: s.amplitudes.iter().map(|b| b.re).collect(),
            amp_im: s.amplitudes.iter().map(|b| b.im).collect(),
        }
    }
}

impl TryFrom<SignalSpecDoc> for SignalSpec {
    type Error = Error;

    fn try_from(doc: SignalSpecDoc) -> Result<Self> {
        let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == doc.d && rows.iter().all(|r| r.len() == doc.m);
        if !shape_ok(&doc.modes_re) || !shape_ok(&doc.modes_im) {
            return Err(Error::ShapeMismatch(format!(
                "modes must be {} rows of {} entries",
                doc.d, doc.m
            )));
        }
        if doc.amp_re.len() != doc.m || doc.amp_im.len() != doc.m {
            return Err(Error::ShapeMismatch("amplitude arrays must have m entries".into()));
        }
        let modes = Mat::from_fn(doc.d, doc.m, |i, j| c64::new(doc.modes_re[i][j], doc.modes_im[i][j]));
        let amplitudes = doc
            .amp_re
            .iter()
            .zip(&doc.amp_im)
            .map(|(&r, &i)| c64::new(r, i))
            .collect();
        let spec = SignalSpec {
            m: doc.m,
            d: doc.d,
            n: doc.n,
            rho: doc.rho,
            theta: doc.theta,
            modes,
            amplitudes,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl SignalSpec {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SignalSpecDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: SignalSpecDoc = serde_json::from_str(s)?;
        doc.try_into()
    }
}
