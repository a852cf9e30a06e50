//! Delay embedding, snapshot pairing and rank-`M` DMD with projected and
//! exact lifting.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c64, Mat, MatRef, PINV_RTOL};

/// Hankel-stacked trajectory: column `k` is `[x_k; x_{k+1}; ...; x_{k+L-1}]`.
pub fn delay_embed(samples: MatRef<'_, c64>, l: usize) -> Result<Mat<c64>> {
    let (d, n) = (samples.nrows(), samples.ncols());
    if d == 0 {
        return Err(invalid("samples have no channels"));
    }
    if l == 0 || l >= n {
        return Err(invalid(format!(
            "embedding length must satisfy 1 <= L < N (L={l}, N={n})"
        )));
    }
    Ok(Mat::from_fn(d * l, n - l + 1, |r, k| samples[(r % d, k + r / d)]))
}

/// Time-shifted pair `(X0, X1)` of delay-embedded snapshots.
#[derive(Debug, Clone)]
pub struct SnapshotPair {
    pub x0: Mat<c64>,
    pub x1: Mat<c64>,
    pub l: usize,
    pub d: usize,
}

impl SnapshotPair {
    pub fn n_cols(&self) -> usize {
        self.x0.ncols()
    }

    /// Largest `|X1[:, k] - X0[:, k+1]|` over the overlap.
    pub fn shift_consistency_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.n_cols().saturating_sub(1) {
            for i in 0..self.x0.nrows() {
                worst = worst.max((self.x1[(i, k)] - self.x0[(i, k + 1)]).norm());
            }
        }
        worst
    }

    /// `D*L < N-L`, the regime where `X0` can have full row rank.
    pub fn is_wide(&self) -> bool {
        self.x0.nrows() < self.x0.ncols()
    }
}

pub fn snapshot_pair(samples: MatRef<'_, c64>, l: usize) -> Result<SnapshotPair> {
    let n = samples.ncols();
    if l == 0 || n < l + 2 {
        return Err(invalid(format!(
            "snapshot pairing needs N - L >= 2 and L >= 1 (N={n}, L={l})"
        )));
    }
    let h = delay_embed(samples, l)?;
    let cols = h.ncols() - 1;
    Ok(SnapshotPair {
        x0: h.subcols(0, cols).to_owned(),
        x1: h.subcols(1, cols).to_owned(),
        l,
        d: samples.nrows(),
    })
}

#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// `D*L x M`, orthonormal columns.
    pub u: Mat<c64>,
    /// Leading `M` singular values, nonincreasing and positive.
    pub sigma: Vec<f64>,
    /// `(N-L) x M`, orthonormal columns.
    pub v: Mat<c64>,
    /// All `min(D*L, N-L)` singular values.
    pub full_sigma: Vec<f64>,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }
}

pub fn truncated_svd(x0: MatRef<'_, c64>, rank: usize) -> Result<TruncatedSvd> {
    let bound = x0.nrows().min(x0.ncols());
    if rank == 0 || rank > bound {
        return Err(invalid(format!(
            "truncation rank must satisfy 1 <= M <= {bound}, got {rank}"
        )));
    }
    let svd = linalg::thin_svd(x0)?;
    let s1 = svd.s[0];
    let sm = svd.s[rank - 1];
    if !(sm > 0.0) || sm < PINV_RTOL * s1 {
        return Err(Error::RankDeficient(format!(
            "sigma_{rank} = {sm:.3e} is below {PINV_RTOL:e} * sigma_1 = {:.3e}; Sigma_M is not invertible",
            PINV_RTOL * s1
        )));
    }
    Ok(TruncatedSvd {
        u: svd.u.subcols(0, rank).to_owned(),
        sigma: svd.s[..rank].to_vec(),
        v: svd.v.subcols(0, rank).to_owned(),
        full_sigma: svd.s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DmdWarning {
    /// `D*L <= N-L`: outside the tall regime the residual scores only see
    /// the truncation term.
    NotTall,
    /// The projected-mode matrix lost rank in the amplitude fit.
    AmplitudeRankDeficient,
}

#[derive(Debug, Clone)]
pub struct DmdDecomposition {
    /// Sorted by descending modulus, then descending phase.
    pub eigenvalues: Vec<c64>,
    /// `M x M`, unit-norm columns `w_j` with the first nonzero entry real and positive.
    pub reduced_vectors: Mat<c64>,
    /// `U_M w_j`.
    pub projected_modes: Mat<c64>,
    /// `X1 V_M Sigma_M^{-1} w_j`.
    pub exact_modes: Mat<c64>,
    pub amplitudes: Vec<c64>,
    pub svd: TruncatedSvd,
    pub l: usize,
    pub d: usize,
    pub rank: usize,
    pub warnings: Vec<DmdWarning>,
}

/// Reduced propagator `A_M = U_M^H X1 V_M Sigma_M^{-1}` and the lifted
/// operator `X1 V_M Sigma_M^{-1}`.
pub fn reduced_propagator(pair: &SnapshotPair, svd: &TruncatedSvd) -> (Mat<c64>, Mat<c64>) {
    let xv = &pair.x1 * &svd.v;
    let lifted = Mat::from_fn(xv.nrows(), xv.ncols(), |i, j| xv[(i, j)] / svd.sigma[j]);
    let a = svd.u.adjoint() * &lifted;
    (a, lifted)
}

fn fix_gauge(w: &mut [c64]) {
    let norm = linalg::norm2(w);
    let tol = 1e-12 * norm;
    let phase = w
        .iter()
        .find(|x| x.norm() > tol)
        .map(|x| x.conj() / x.norm())
        .unwrap_or(c64::new(1.0, 0.0));
    for x in w.iter_mut() {
        *x = *x * phase / norm;
    }
}

fn eig_order(a: &c64, b: &c64) -> std::cmp::Ordering {
    b.norm().total_cmp(&a.norm()).then(b.arg().total_cmp(&a.arg()))
}

pub fn decompose(pair: &SnapshotPair, rank: usize) -> Result<DmdDecomposition> {
    if pair.x0.nrows() != pair.x1.nrows() || pair.x0.ncols() != pair.x1.ncols() {
        return Err(Error::ShapeMismatch("X0 and X1 differ in shape".into()));
    }
    let svd = truncated_svd(pair.x0.as_ref(), rank)?;
    let (a, lifted) = reduced_propagator(pair, &svd);
    let evd = linalg::eig(a.as_ref())?;

    let mut pairs: Vec<(c64, Vec<c64>)> = evd
        .values
        .iter()
        .enumerate()
        .map(|(j, &lam)| {
            let mut w = linalg::column(evd.vectors.as_ref(), j);
            fix_gauge(&mut w);
            (lam, w)
        })
        .collect();
    pairs.sort_by(|x, y| eig_order(&x.0, &y.0));

    let eigenvalues: Vec<c64> = pairs.iter().map(|p| p.0).collect();
    let cols: Vec<Vec<c64>> = pairs.into_iter().map(|p| p.1).collect();
    let w = linalg::from_columns(rank, &cols);

    let ws = linalg::singular_values(w.as_ref())?;
    let inv_cond = ws[rank - 1] / ws[0];
    if !(inv_cond > 1e-13) {
        return Err(Error::Convergence {
            operation: "reduced eigendecomposition",
            detail: format!(
                "eigenvector matrix is numerically singular (1/cond = {inv_cond:.3e}); A_M is defective or nearly so"
            ),
        });
    }

    let projected_modes = &svd.u * &w;
    let exact_modes = &lifted * &w;

    let mut decomp = DmdDecomposition {
        eigenvalues,
        reduced_vectors: w,
        projected_modes,
        exact_modes,
        amplitudes: vec![c64::new(0.0, 0.0); rank],
        svd,
        l: pair.l,
        d: pair.d,
        rank,
        warnings: Vec::new(),
    };
    if !(pair.x0.ncols() < pair.x0.nrows()) {
        log::debug!(
            "D*L = {} <= N-L = {}: outside the tall regime",
            pair.x0.nrows(),
            pair.x0.ncols()
        );
        decomp.warnings.push(DmdWarning::NotTall);
    }
    let fit = fit_amplitudes(&decomp, &linalg::column(pair.x0.as_ref(), 0))?;
    decomp.amplitudes = fit.amplitudes;
    if fit.rank_deficient {
        decomp.warnings.push(DmdWarning::AmplitudeRankDeficient);
    }
    Ok(decomp)
}

#[derive(Debug, Clone)]
pub struct AmplitudeFit {
    pub amplitudes: Vec<c64>,
    /// Minimum-norm solution was returned.
    pub rank_deficient: bool,
}

/// Least-squares amplitudes `b = pinv(Phi_p) x0` against the projected modes.
pub fn fit_amplitudes(decomp: &DmdDecomposition, first_column: &[c64]) -> Result<AmplitudeFit> {
    let modes = &decomp.projected_modes;
    if first_column.len() != modes.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "initial column has length {}, modes have {} rows",
            first_column.len(),
            modes.nrows()
        )));
    }
    let (p, rank_deficient) = linalg::pinv(modes.as_ref())?;
    if rank_deficient {
        log::warn!("projected mode matrix is rank deficient; returning minimum-norm amplitudes");
    }
    Ok(AmplitudeFit {
        amplitudes: linalg::matvec(p.as_ref(), first_column),
        rank_deficient,
    })
}

/// Delay-coordinate state `Phi Lambda^k b`.
pub fn reconstruct(decomp: &DmdDecomposition, k: u32) -> Vec<c64> {
    let coeffs: Vec<c64> = decomp
        .eigenvalues
        .iter()
        .zip(&decomp.amplitudes)
        .map(|(lam, b)| lam.powu(k) * b)
        .collect();
    linalg::matvec(decomp.projected_modes.as_ref(), &coeffs)
}

/// First `D` entries of [`reconstruct`], i.e. the sample `x_k` itself.
pub fn predict_original(decomp: &DmdDecomposition, k: u32) -> Vec<c64> {
    let mut v = reconstruct(decomp, k);
    v.truncate(decomp.d);
    v
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionExport {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "M")]
    pub rank: usize,
    pub eigenvalues_re: Vec<f64>,
    pub eigenvalues_im: Vec<f64>,
    pub amplitudes_re: Vec<f64>,
    pub amplitudes_im: Vec<f64>,
    /// Column-major: one inner array per mode.
    pub projected_modes_re: Vec<Vec<f64>>,
    pub projected_modes_im: Vec<Vec<f64>>,
    pub exact_modes_re: Vec<Vec<f64>>,
    pub exact_modes_im: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
}

impl DmdDecomposition {
    pub fn export(&self) -> DecompositionExport {
        let cols = |m: &Mat<c64>, f: fn(&c64) -> f64| -> Vec<Vec<f64>> {
            (0..m.ncols())
                .map(|j| m.col_as_slice(j).iter().map(f).collect())
                .collect()
        };
        DecompositionExport {
            l: self.l,
            d: self.d,
            rank: self.rank,
            eigenvalues_re: self.eigenvalues.iter().map(|z| z.re).collect(),
            eigenvalues_im: self.eigenvalues.iter().map(|z| z.im).collect(),
            amplitudes_re: self.amplitudes.iter().map(|z| z.re).collect(),
            amplitudes_im: self.amplitudes.iter().map(|z| z.im).collect(),
            projected_modes_re: cols(&self.projected_modes, |z| z.re),
            projected_modes_im: cols(&self.projected_modes, |z| z.im),
            exact_modes_re: cols(&self.exact_modes, |z| z.re),
            exact_modes_im: cols(&self.exact_modes, |z| z.im),
            singular_values: self.svd.full_sigma.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.export())?)
    }

    /// `index,re,im,modulus,phase` table.
    pub fn eigenvalue_csv(&self) -> String {
        let mut out = String::from("index,re,im,modulus,phase\n");
        for (j, z) in self.eigenvalues.iter().enumerate() {
            let _ = writeln!(out, "{j},{},{},{},{}", z.re, z.im, z.norm(), z.arg());
        }
        out
    }

    /// `||P_U phi_e - lambda phi_p||` per mode.
    pub fn projection_identity_errors(&self) -> Vec<f64> {
        (0..self.rank)
            .map(|j| {
                let e = self.exact_modes.col_as_slice(j);
                let coeffs = linalg::adjoint_matvec(self.svd.u.as_ref(), e);
                let proj = linalg::matvec(self.svd.u.as_ref(), &coeffs);
                let p = self.projected_modes.col_as_slice(j);
                let lam = self.eigenvalues[j];
                let diff: Vec<c64> = proj.iter().zip(p).map(|(a, b)| a - lam * b).collect();
                linalg::norm2(&diff)
            })
            .collect()
    }

    /// `| ||phi_e||^2 - |lambda|^2 - ||(I - P_U) phi_e||^2 |` per mode, with
    /// the residual formed through an explicit projector.
    pub fn energy_identity_errors(&self) -> Vec<f64> {
        (0..self.rank)
            .map(|j| {
                let e = self.exact_modes.col_as_slice(j);
                let r = linalg::orthogonal_residual(self.svd.u.as_ref(), e);
                (linalg::norm2_sqr(e) - self.eigenvalues[j].norm_sqr() - linalg::norm2_sqr(&r)).abs()
            })
            .collect()
    }
}
