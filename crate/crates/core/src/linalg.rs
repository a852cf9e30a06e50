//! Thin wrappers over `faer` for the handful of dense complex kernels the
//! rest of the crate needs.

pub use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};

/// Relative cutoff applied wherever a pseudoinverse or a numerical rank is
/// needed: singular values below `PINV_RTOL * sigma_1` are treated as zero.
pub const PINV_RTOL: f64 = 1e-12;

pub struct ThinSvd {
    pub u: Mat<c64>,
    pub s: Vec<f64>,
    pub v: Mat<c64>,
}

pub fn thin_svd(a: MatRef<'_, c64>) -> Result<ThinSvd> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::ShapeMismatch("svd of an empty matrix".into()));
    }
    if !is_finite(a) {
        return Err(Error::InvalidParameter("svd input contains non-finite entries".into()));
    }
    let svd = a.thin_svd().map_err(|e| Error::Convergence {
        operation: "svd",
        detail: format!("{e:?}"),
    })?;
    Ok(ThinSvd {
        u: svd.U().to_owned(),
        s: svd.S().column_vector().iter().map(|x| x.re).collect(),
        v: svd.V().to_owned(),
    })
}

pub fn singular_values(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    a.singular_values().map_err(|e| Error::Convergence {
        operation: "singular values",
        detail: format!("{e:?}"),
    })
}

/// Moore-Penrose pseudoinverse with the crate-wide relative cutoff.
///
/// The flag is `true` when at least one singular value was discarded.
pub fn pinv(a: MatRef<'_, c64>) -> Result<(Mat<c64>, bool)> {
    let ThinSvd { u, s, v } = thin_svd(a)?;
    let cutoff = PINV_RTOL * s[0];
    let kept = s.iter().take_while(|&&x| x > cutoff && x > 0.0).count();
    let deficient = kept < s.len();
    // V_k diag(1/s_k) U_k^H
    let vs = Mat::from_fn(v.nrows(), kept, |i, j| v[(i, j)] / s[j]);
    let out = &vs * u.subcols(0, kept).adjoint();
    Ok((out, deficient))
}

pub struct Eigen {
    pub values: Vec<c64>,
    pub vectors: Mat<c64>,
}

pub fn eig(a: MatRef<'_, c64>) -> Result<Eigen> {
    if a.nrows() != a.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !is_finite(a) {
        return Err(Error::InvalidParameter(
            "eigen input contains non-finite entries".into(),
        ));
    }
    let evd = a.eigen().map_err(|e| Error::Convergence {
        operation: "eigendecomposition",
        detail: format!("{e:?} (n = {}, |A|_F = {:.3e})", a.nrows(), a.norm_l2()),
    })?;
    Ok(Eigen {
        values: evd.S().column_vector().iter().copied().collect(),
        vectors: evd.U().to_owned(),
    })
}

pub fn is_finite(a: MatRef<'_, c64>) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].is_finite()))
}

pub fn norm2(v: &[c64]) -> f64 {
    norm2_sqr(v).sqrt()
}

pub fn norm2_sqr(v: &[c64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

/// Frobenius norm.
pub fn frobenius(a: MatRef<'_, c64>) -> f64 {
    a.norm_l2()
}

/// `[1, lambda, ..., lambda^(len-1)]`.
pub fn vandermonde(lambda: c64, len: usize) -> Vec<c64> {
    let mut out = Vec::with_capacity(len);
    let mut p = c64::new(1.0, 0.0);
    for _ in 0..len {
        out.push(p);
        p *= lambda;
    }
    out
}

/// Unit vector parallel to `vandermonde(lambda, len)`, computed without
/// overflow for `|lambda| > 1` by running the recursion from the top power.
pub fn unit_vandermonde(lambda: c64, len: usize) -> Vec<c64> {
    let mut v = if lambda.norm() <= 1.0 {
        vandermonde(lambda, len)
    } else {
        let mut rev = vandermonde(lambda.inv(), len);
        rev.reverse();
        rev
    };
    let n = norm2(&v);
    for x in &mut v {
        *x /= n;
    }
    v
}

/// Column `j` of a matrix as an owned vector.
pub fn column(a: MatRef<'_, c64>, j: usize) -> Vec<c64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn from_columns(nrows: usize, cols: &[Vec<c64>]) -> Mat<c64> {
    Mat::from_fn(nrows, cols.len(), |i, j| cols[j][i])
}

pub fn matvec(a: MatRef<'_, c64>, x: &[c64]) -> Vec<c64> {
    debug_assert_eq!(a.ncols(), x.len());
    let mut out = vec![c64::new(0.0, 0.0); a.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == c64::new(0.0, 0.0) {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += a[(i, j)] * xj;
        }
    }
    out
}

/// `a^H x`.
pub fn adjoint_matvec(a: MatRef<'_, c64>, x: &[c64]) -> Vec<c64> {
    debug_assert_eq!(a.nrows(), x.len());
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].conj() * x[i]).sum())
        .collect()
}

/// Component of `x` orthogonal to the column space of the orthonormal `u`.
pub fn orthogonal_residual(u: MatRef<'_, c64>, x: &[c64]) -> Vec<c64> {
    let coeffs = adjoint_matvec(u, x);
    let proj = matvec(u, &coeffs);
    x.iter().zip(&proj).map(|(a, b)| a - b).collect()
}

/// Largest absolute deviation of `a^H a` from the identity.
pub fn orthonormality_error(a: MatRef<'_, c64>) -> f64 {
    let g = a.adjoint() * a;
    let mut worst = 0.0f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - c64::new(target, 0.0)).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    #[test]
    fn pinv_of_diagonal_inverts_nonzero_entries() {
        let a = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                c([2.0, 4.0, 0.0][i], 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let (p, deficient) = pinv(a.as_ref()).unwrap();
        assert!(deficient);
        assert!((p[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((p[(1, 1)] - c(0.25, 0.0)).norm() < 1e-15);
        assert!(p[(2, 2)].norm() < 1e-15);
    }

    #[test]
    fn unit_vandermonde_matches_normalized_direct_form() {
        for &lam in &[c(0.3, 0.4), c(1.2, -0.7), c(-2.0, 0.1)] {
            let direct = vandermonde(lam, 12);
            let n = norm2(&direct);
            let unit = unit_vandermonde(lam, 12);
            // same direction, same normalization, up to a unimodular factor
            let inner: c64 = direct.iter().zip(&unit).map(|(a, b)| a.conj() * b).sum();
            assert!((inner.norm() / n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_recovers_triangular_spectrum() {
        let a = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                c(i as f64 + 1.0, 0.5)
            } else if j > i {
                c(0.3, -0.2)
            } else {
                c(0.0, 0.0)
            }
        });
        let e = eig(a.as_ref()).unwrap();
        let mut re: Vec<f64> = e.values.iter().map(|x| x.re).collect();
        re.sort_by(f64::total_cmp);
        for (k, r) in re.iter().enumerate() {
            assert!((r - (k as f64 + 1.0)).abs() < 1e-12);
        }
    }
}
