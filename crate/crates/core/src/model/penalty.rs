use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::AnalysisOperator;

/// Gram determinants at or below this value count as rank deficient.
const MIN_LOG_DET: f64 = -690.775_527_898_213_7; // ln(1e-300)
const COINCIDENT: f64 = 1.0 - 1e-12;

/// `Σ_j log(1 + ν x_j²)`.
pub fn sparsity_measure(x: &[f64], nu: f64) -> f64 {
    x.iter().map(|v| (nu * v * v).ln_1p()).sum()
}

/// `Σ_j log(1 + ν (a_j² + b_j²))`.
pub fn coupled_sparsity(a: &[f64], b: &[f64], nu: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "coupled_sparsity: length mismatch");
    a.iter().zip(b).map(|(x, y)| (nu * (x * x + y * y)).ln_1p()).sum()
}

/// The `n - 1` non-constant vectors of the orthonormal DCT-II basis, as columns.
pub fn dct_complement_basis(n: usize) -> DMatrix<f64> {
    let scale = (2.0 / n as f64).sqrt();
    DMatrix::from_fn(n, n - 1, |j, k| {
        scale * (std::f64::consts::PI * (k + 1) as f64 * (j as f64 + 0.5) / n as f64).cos()
    })
}

/// Rank regularizer `-(1/((n-1) log(n-1))) log det((1/k) WᵀΩᵀΩW)`.
pub fn rank_penalty(op: &AnalysisOperator) -> Result<f64> {
    rank_value_and_gradient(op.rows(), &dct_complement_basis(op.n()), false).map(|(v, _)| v)
}

/// Log-barrier on pairwise row coherence, `-Σ_{i<l} log(1 - (ω_iᵀω_l)²)`.
pub fn coherence_penalty(op: &AnalysisOperator) -> Result<f64> {
    coherence_value_and_gradient(op.rows(), false).map(|(v, _)| v)
}

/// Value of the rank penalty and, if requested, its gradient with respect to the rows.
pub(crate) fn rank_value_and_gradient(
    rows: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    with_gradient: bool,
) -> Result<(f64, Option<DMatrix<f64>>)> {
    let (k, n) = rows.shape();
    if n < 3 {
        return Err(Error::PatchTooSmall(n));
    }
    let omega_w = rows * basis;
    let gram = omega_w.transpose() * &omega_w / k as f64;
    let chol = gram.cholesky().ok_or(Error::RankDeficient(0.0))?;
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !(log_det > MIN_LOG_DET) {
        return Err(Error::RankDeficient(log_det.exp()));
    }
    let scale = 1.0 / ((n - 1) as f64 * ((n - 1) as f64).ln());
    let value = -scale * log_det;
    let gradient = with_gradient.then(|| {
        // d log det(A) = (2/k) <Ω W A⁻¹ Wᵀ, dΩ>
        let inv = chol.inverse();
        (&omega_w * inv * basis.transpose()) * (-2.0 * scale / k as f64)
    });
    Ok((value, gradient))
}

pub(crate) fn coherence_value_and_gradient(
    rows: &DMatrix<f64>,
    with_gradient: bool,
) -> Result<(f64, Option<DMatrix<f64>>)> {
    let k = rows.nrows();
    let gram = rows * rows.transpose();
    let mut weights = DMatrix::zeros(k, k);
    let mut terms = Vec::with_capacity(k * (k.saturating_sub(1)) / 2);
    for i in 0..k {
        for l in (i + 1)..k {
            let c = gram[(i, l)];
            if c.abs() >= COINCIDENT {
                return Err(Error::CoincidentRows(i, l));
            }
            let one_minus = 1.0 - c * c;
            terms.push(-one_minus.ln());
            let w = 2.0 * c / one_minus;
            weights[(i, l)] = w;
            weights[(l, i)] = w;
        }
    }
    let value = super::pairwise_sum(&terms);
    Ok((value, with_gradient.then(|| weights * rows)))
}
