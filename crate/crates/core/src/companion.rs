//! Block-companion least-squares operator `C_L` of a delay-embedded pair.
//!
//! The top `L-1` block rows of `C_L` are the exact one-block shift and are
//! never stored; only the last block row `B = [B_1 ... B_L]`, the
//! Moore-Penrose predictor of the next sample from the stacked history, is
//! kept. The diagnostics here evaluate the operator identities that tie
//! `C_L` to the rank-`M` DMD quantities.

use crate::dmd::{reduced_propagator, DmdDecomposition, SnapshotPair};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c64, Mat, MatRef, PINV_RTOL};
use crate::signal::{measure_delta_theta, SignalSpec};

#[derive(Debug, Clone)]
pub struct BlockCompanion {
    /// `D x D*L` last block row.
    pub predictor: Mat<c64>,
    pub l: usize,
    pub d: usize,
}

impl BlockCompanion {
    pub fn dim(&self) -> usize {
        self.d * self.l
    }

    pub fn matvec(&self, v: &[c64]) -> Result<Vec<c64>> {
        let n = self.dim();
        if v.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "companion acts on vectors of length {n}, got {}",
                v.len()
            )));
        }
        let mut out = Vec::with_capacity(n);
        out.extend_from_slice(&v[self.d..]);
        out.extend(linalg::matvec(self.predictor.as_ref(), v));
        Ok(out)
    }

    /// `C_L X`, column by column.
    pub fn apply(&self, x: MatRef<'_, c64>) -> Result<Mat<c64>> {
        let n = self.dim();
        if x.nrows() != n {
            return Err(Error::ShapeMismatch(format!(
                "companion acts on {n} rows, got {}",
                x.nrows()
            )));
        }
        let tail = &self.predictor * x;
        let shift = n - self.d;
        Ok(Mat::from_fn(n, x.ncols(), |i, j| {
            if i < shift {
                x[(i + self.d, j)]
            } else {
                tail[(i - shift, j)]
            }
        }))
    }

    /// Dense `D*L x D*L` matrix. Only meant for small oracles.
    pub fn to_dense(&self) -> Mat<c64> {
        let n = self.dim();
        let shift = n - self.d;
        Mat::from_fn(n, n, |i, j| {
            if i < shift {
                if j == i + self.d {
                    c64::new(1.0, 0.0)
                } else {
                    c64::new(0.0, 0.0)
                }
            } else {
                self.predictor[(i - shift, j)]
            }
        })
    }
}

/// `B = X1^{(L-1)} X0^+`, the last `D` rows of `X1` times the
/// pseudoinverse of `X0`.
pub fn fit_companion(pair: &SnapshotPair) -> Result<BlockCompanion> {
    let (rows, d, l) = (pair.x0.nrows(), pair.d, pair.l);
    if rows != d * l || pair.x1.nrows() != rows || pair.x1.ncols() != pair.x0.ncols() {
        return Err(Error::ShapeMismatch("snapshot pair does not match D*L".into()));
    }
    let svd = linalg::thin_svd(pair.x0.as_ref())?;
    if !(svd.s[0] > 0.0) {
        return Err(Error::Degenerate("X0 is zero".into()));
    }
    let cutoff = PINV_RTOL * svd.s[0];
    let kept = svd.s.iter().take_while(|&&s| s > cutoff).count();
    let last = pair.x1.subrows(rows - d, d);
    let lv = last * svd.v.subcols(0, kept);
    let scaled = Mat::from_fn(d, kept, |i, j| lv[(i, j)] / svd.s[j]);
    let predictor = &scaled * svd.u.subcols(0, kept).adjoint();
    Ok(BlockCompanion { predictor, l, d })
}

pub fn companion_matvec(c: &BlockCompanion, v: &[c64]) -> Result<Vec<c64>> {
    c.matvec(v)
}

/// `||(C_L - lambda_j I) phi_p_j - (I - U_M U_M^H) phi_e_j||` for every mode.
pub fn residual_identity_error(decomp: &DmdDecomposition, c: &BlockCompanion) -> Result<Vec<f64>> {
    if decomp.projected_modes.nrows() != c.dim() || decomp.d != c.d || decomp.l != c.l {
        return Err(Error::ShapeMismatch(format!(
            "decomposition is {}x{} with (D, L) = ({}, {}), companion has (D, L) = ({}, {})",
            decomp.projected_modes.nrows(),
            decomp.rank,
            decomp.d,
            decomp.l,
            c.d,
            c.l
        )));
    }
    let cp = c.apply(decomp.projected_modes.as_ref())?;
    Ok((0..decomp.rank)
        .map(|j| {
            let lam = decomp.eigenvalues[j];
            let p = decomp.projected_modes.col_as_slice(j);
            let r = linalg::orthogonal_residual(decomp.svd.u.as_ref(), decomp.exact_modes.col_as_slice(j));
            let diff: Vec<c64> = (0..p.len()).map(|i| cp[(i, j)] - lam * p[i] - r[i]).collect();
            linalg::norm2(&diff)
        })
        .collect())
}

/// `||A_M - U_M^H C_L U_M||_F`, with the compression evaluated through the
/// matrix-free companion action.
pub fn compression_error(pair: &SnapshotPair, decomp: &DmdDecomposition, c: &BlockCompanion) -> Result<f64> {
    let (a, _) = reduced_propagator(pair, &decomp.svd);
    let cu = c.apply(decomp.svd.u.as_ref())?;
    let compressed = decomp.svd.u.adjoint() * &cu;
    Ok(linalg::frobenius((&a - &compressed).as_ref()))
}

/// `||X1 X0^+ - C_L||_F`. Zero exactly when `X0` has full row rank.
pub fn moore_penrose_gap(pair: &SnapshotPair, c: &BlockCompanion) -> Result<f64> {
    let (p, _) = linalg::pinv(pair.x0.as_ref())?;
    let amp = &pair.x1 * &p;
    Ok(linalg::frobenius((&amp - &c.to_dense()).as_ref()))
}

/// Relative distance of a `D*L` vector from the Kronecker-Vandermonde form
/// `v_L(mu) (x) phi`, with `phi` fitted by least squares.
pub fn kv_form_error(v: &[c64], mu: c64, l: usize, d: usize) -> Result<f64> {
    if l == 0 || d == 0 || v.len() != d * l {
        return Err(Error::ShapeMismatch(format!(
            "vector of length {} cannot be reshaped to {d}x{l}",
            v.len()
        )));
    }
    let total = linalg::norm2(v);
    if !(total > 0.0) {
        return Err(invalid("KV form of the zero vector is undefined"));
    }
    let a = linalg::unit_vandermonde(mu, l);
    let mut err = 0.0;
    for i in 0..d {
        let phi: c64 = (0..l).map(|lag| v[lag * d + i] * a[lag].conj()).sum();
        for lag in 0..l {
            err += (v[lag * d + i] - phi * a[lag]).norm_sqr();
        }
    }
    Ok(err.sqrt() / total)
}

/// Perturbation bound `eta` on `sin theta_max(col(U_m), S)` for an embedded
/// signal under noise of spectral norm `noise_norm`, using the explicit
/// smallest singular values of the spatial factor and both Vandermonde
/// factors. Returns `+inf` once the denominator is no longer positive.
pub fn subspace_deviation_bound(spec: &SignalSpec, l: usize, noise_norm: f64) -> Result<f64> {
    spec.validate()?;
    if !(noise_norm >= 0.0) || !noise_norm.is_finite() {
        return Err(invalid(format!(
            "noise norm must be finite and nonnegative, got {noise_norm}"
        )));
    }
    if l == 0 || l >= spec.n {
        return Err(invalid(format!("need 1 <= L < N (L={l}, N={})", spec.n)));
    }
    let m = spec.m;
    if m >= 2 && !(measure_delta_theta(&spec.theta)? > 0.0) {
        return Err(Error::Degenerate("repeated phases".into()));
    }
    let smallest = |a: MatRef<'_, c64>| -> Result<f64> {
        if a.nrows() < a.ncols() {
            return Ok(0.0);
        }
        Ok(*linalg::singular_values(a)?.last().unwrap_or(&0.0))
    };
    let sigma_phi = smallest(spec.modes.as_ref())?;
    if !(sigma_phi > 0.0) {
        return Err(Error::Degenerate("spatial modes are linearly dependent".into()));
    }
    let lambdas = spec.eigenvalues();
    let vandermonde = |n: usize| {
        let cols: Vec<Vec<c64>> = lambdas.iter().map(|&lam| linalg::vandermonde(lam, n)).collect();
        linalg::from_columns(n, &cols)
    };
    let sigma_l = smallest(vandermonde(l).as_ref())?;
    let sigma_n = smallest(vandermonde(spec.n - l).as_ref())?;
    let b_min = spec.amplitudes.iter().map(|b| b.norm()).fold(f64::INFINITY, f64::min);

    if noise_norm == 0.0 {
        return Ok(0.0);
    }
    let denominator = sigma_phi * b_min * sigma_l * sigma_n - noise_norm;
    if denominator <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(noise_norm / denominator)
}
