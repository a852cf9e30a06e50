use super::{Method, ModeScoreVector};
use crate::dmd::DmdDecomposition;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c64, Mat};

/// Score assigned to modes a structural test cannot evaluate.
pub const SENTINEL_SCORE: f64 = 1e300;

/// Relative magnitude gate for the quotient test.
const STC_GATE: f64 = 1e-6;

fn check_shape(v: &[c64], l: usize, d: usize) -> Result<()> {
    if l == 0 || d == 0 || v.len() != l * d {
        return Err(Error::ShapeMismatch(format!(
            "mode of length {} cannot be reshaped to {d}x{l}",
            v.len()
        )));
    }
    Ok(())
}

/// `D x L` lag matrix: block `l` of the mode becomes column `l`.
fn lag_matrix(v: &[c64], l: usize, d: usize) -> Mat<c64> {
    Mat::from_fn(d, l, |i, lag| v[lag * d + i])
}

fn finite_or_sentinel(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        SENTINEL_SCORE
    }
}

/// `||phi_e||^2 - |lambda|^2`, clamped at zero.
pub fn esr_scores(decomp: &DmdDecomposition) -> ModeScoreVector {
    let scores = (0..decomp.rank)
        .map(|j| {
            let e = linalg::norm2_sqr(decomp.exact_modes.col_as_slice(j));
            (e - decomp.eigenvalues[j].norm_sqr()).max(0.0)
        })
        .collect();
    ModeScoreVector::new(Method::EsrEnergy, scores).expect("mode method")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NestedKvFit {
    pub score: f64,
    /// Lag-axis propagator of the inner rank-1 fit.
    pub lambda: c64,
}

/// Rank-1 DMD along the lag axis of one mode and the mean squared error of
/// the resulting Kronecker-Vandermonde reconstruction.
pub fn nested_kv_fit(v: &[c64], l: usize, d: usize) -> Result<NestedKvFit> {
    check_shape(v, l, d)?;
    if l < 3 {
        return Err(invalid(format!("nested KV score needs L >= 3, got L = {l}")));
    }
    let y = lag_matrix(v, l, d);
    let y0 = y.subcols(0, l - 1);
    let y1 = y.subcols(1, l - 1);
    let svd = linalg::thin_svd(y0)?;
    let s1 = svd.s[0];
    if !(s1 > 0.0) {
        log::warn!("nested KV: zero lag matrix, assigning sentinel score");
        return Ok(NestedKvFit {
            score: SENTINEL_SCORE,
            lambda: c64::new(0.0, 0.0),
        });
    }
    let u1 = linalg::column(svd.u.as_ref(), 0);
    let v1 = linalg::column(svd.v.as_ref(), 0);
    let y1v = linalg::matvec(y1, &v1);
    let lambda = u1.iter().zip(&y1v).map(|(u, x)| u.conj() * x).sum::<c64>() / s1;
    let amp: c64 = (0..d).map(|i| u1[i].conj() * y[(i, 0)]).sum();
    let powers = linalg::vandermonde(lambda, l);
    let mut err = 0.0;
    for (lag, p) in powers.iter().enumerate() {
        for i in 0..d {
            err += (y[(i, lag)] - u1[i] * amp * p).norm_sqr();
        }
    }
    Ok(NestedKvFit {
        score: finite_or_sentinel(err / (d * l) as f64),
        lambda,
    })
}

pub fn nested_kv_score(v: &[c64], l: usize, d: usize) -> Result<f64> {
    nested_kv_fit(v, l, d).map(|f| f.score)
}

pub fn nested_kv_scores(decomp: &DmdDecomposition) -> Result<ModeScoreVector> {
    let scores = (0..decomp.rank)
        .map(|j| nested_kv_score(decomp.projected_modes.col_as_slice(j), decomp.l, decomp.d))
        .collect::<Result<Vec<_>>>()?;
    ModeScoreVector::new(Method::NestedKv, scores)
}

/// Residual of the rank-1 fit `u a^T` with `a = v_L(lambda)` held fixed,
/// divided by `D*L`.
pub fn fekvf_score(v: &[c64], lambda: c64, l: usize, d: usize) -> Result<f64> {
    check_shape(v, l, d)?;
    let a = linalg::unit_vandermonde(lambda, l);
    let mut err = 0.0;
    for i in 0..d {
        let u: c64 = (0..l).map(|lag| v[lag * d + i] * a[lag].conj()).sum();
        for lag in 0..l {
            err += (v[lag * d + i] - u * a[lag]).norm_sqr();
        }
    }
    Ok(finite_or_sentinel(err / (d * l) as f64))
}

pub fn fekvf_scores(decomp: &DmdDecomposition) -> Result<ModeScoreVector> {
    let scores = (0..decomp.rank)
        .map(|j| {
            fekvf_score(
                decomp.projected_modes.col_as_slice(j),
                decomp.eigenvalues[j],
                decomp.l,
                decomp.d,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ModeScoreVector::new(Method::Fekvf, scores)
}

fn median(mut x: Vec<f64>) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

/// Median relative deviation of consecutive-block entry quotients from
/// `lambda`, over entries above the magnitude gate.
pub fn stc_score(v: &[c64], lambda: c64, l: usize, d: usize) -> Result<f64> {
    check_shape(v, l, d)?;
    if l < 2 {
        return Err(invalid(format!("quotient test needs L >= 2, got L = {l}")));
    }
    let scale = lambda.norm();
    if !(scale > 0.0) {
        return Ok(SENTINEL_SCORE);
    }
    let gate = STC_GATE * v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let errs: Vec<f64> = (0..l - 1)
        .flat_map(|lag| (0..d).map(move |i| (lag * d + i, (lag + 1) * d + i)))
        .filter(|&(cur, _)| v[cur].norm() > gate)
        .map(|(cur, next)| (v[next] / v[cur] - lambda).norm() / scale)
        .collect();
    if errs.is_empty() {
        return Ok(SENTINEL_SCORE);
    }
    Ok(finite_or_sentinel(median(errs)))
}

pub fn stc_scores(decomp: &DmdDecomposition) -> Result<ModeScoreVector> {
    let scores = (0..decomp.rank)
        .map(|j| {
            stc_score(
                decomp.projected_modes.col_as_slice(j),
                decomp.eigenvalues[j],
                decomp.l,
                decomp.d,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ModeScoreVector::new(Method::Stc, scores)
}

pub fn mode_norm_scores(decomp: &DmdDecomposition) -> ModeScoreVector {
    let scores = (0..decomp.rank)
        .map(|j| linalg::norm2(decomp.exact_modes.col_as_slice(j)))
        .collect();
    ModeScoreVector::new(Method::ExactModeNorm, scores).expect("mode method")
}

pub fn eig_magnitude_scores(decomp: &DmdDecomposition) -> ModeScoreVector {
    let scores = decomp.eigenvalues.iter().map(|x| x.norm()).collect();
    ModeScoreVector::new(Method::EigMagnitude, scores).expect("mode method")
}

/// Scores of any per-mode method.
pub fn score_modes(method: Method, decomp: &DmdDecomposition) -> Result<ModeScoreVector> {
    match method {
        Method::EsrEnergy => Ok(esr_scores(decomp)),
        Method::NestedKv => nested_kv_scores(decomp),
        Method::Fekvf => fekvf_scores(decomp),
        Method::Stc => stc_scores(decomp),
        Method::ExactModeNorm => Ok(mode_norm_scores(decomp)),
        Method::EigMagnitude => Ok(eig_magnitude_scores(decomp)),
        Method::Bic | Method::Gap => Err(invalid(format!("{method} does not score modes"))),
    }
}
