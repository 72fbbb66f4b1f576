use nalgebra::DMatrix;

use super::patches::PatchDataset;
use super::penalty::{coherence_value_and_gradient, dct_complement_basis, rank_value_and_gradient};
use super::{pairwise_sum, LearningParams, OperatorPair};
use crate::error::{mismatch, Error, Result};
use crate::manifold::{ConstraintManifold, ManifoldPoint, Objective};

/// Terms of the learning function and its Euclidean gradient per operator.
#[derive(Debug, Clone)]
pub struct ObjectiveValue {
    pub value: f64,
    pub coupling: f64,
    pub rank_u: f64,
    pub rank_v: f64,
    pub coherence_u: f64,
    pub coherence_v: f64,
    /// `∂L/∂Ω_U`, shape `k x n`.
    pub grad_u: DMatrix<f64>,
    pub grad_v: DMatrix<f64>,
}

/// `G = (1/M) Σ_i g(Ω_U s_U⁽ⁱ⁾, Ω_V s_V⁽ⁱ⁾)`.
pub fn empirical_coupling(pair: &OperatorPair, data: &PatchDataset, nu: f64) -> Result<f64> {
    check_dims(pair.n(), data)?;
    Ok(coupling(pair.omega_u().rows(), pair.omega_v().rows(), data, nu, false).0)
}

/// `L = G + κ_U h(Ω_U) + μ_U r(Ω_U) + κ_V h(Ω_V) + μ_V r(Ω_V)` with gradients.
pub fn learning_objective(
    pair: &OperatorPair,
    data: &PatchDataset,
    params: &LearningParams,
) -> Result<ObjectiveValue> {
    check_dims(pair.n(), data)?;
    params.validate()?;
    let basis = dct_complement_basis(pair.n());
    evaluate(pair.omega_u().rows(), pair.omega_v().rows(), data, params, &basis, true)
}

/// [`learning_objective`] at arbitrary `k x n` matrices, which need not lie on the manifold.
pub fn ambient_learning_objective(
    omega_u: &DMatrix<f64>,
    omega_v: &DMatrix<f64>,
    data: &PatchDataset,
    params: &LearningParams,
) -> Result<ObjectiveValue> {
    if omega_u.shape() != omega_v.shape() {
        return Err(mismatch(format!("{:?}", omega_u.shape()), format!("{:?}", omega_v.shape())));
    }
    check_dims(omega_u.ncols(), data)?;
    params.validate()?;
    let basis = dct_complement_basis(omega_u.ncols());
    evaluate(omega_u, omega_v, data, params, &basis, true)
}

fn check_dims(n: usize, data: &PatchDataset) -> Result<()> {
    if data.n() != n {
        return Err(mismatch(format!("patch dimension {n}"), format!("patch dimension {}", data.n())));
    }
    if data.is_empty() {
        return Err(Error::InsufficientSamples { requested: 1, found: 0 });
    }
    Ok(())
}

fn coupling(
    omega_u: &DMatrix<f64>,
    omega_v: &DMatrix<f64>,
    data: &PatchDataset,
    nu: f64,
    with_gradient: bool,
) -> (f64, Option<(DMatrix<f64>, DMatrix<f64>)>) {
    let m = data.len() as f64;
    let a = omega_u * data.u();
    let b = omega_v * data.v();
    let mut terms = Vec::with_capacity(a.len());
    let mut da = DMatrix::zeros(a.nrows(), a.ncols());
    let mut db = DMatrix::zeros(b.nrows(), b.ncols());
    for idx in 0..a.len() {
        let (x, y) = (a[idx], b[idx]);
        let inner = nu * (x * x + y * y);
        terms.push(inner.ln_1p());
        if with_gradient {
            let w = 2.0 * nu / ((1.0 + inner) * m);
            da[idx] = w * x;
            db[idx] = w * y;
        }
    }
    let value = pairwise_sum(&terms) / m;
    let grads = with_gradient.then(|| (da * data.u().transpose(), db * data.v().transpose()));
    (value, grads)
}

fn evaluate(
    omega_u: &DMatrix<f64>,
    omega_v: &DMatrix<f64>,
    data: &PatchDataset,
    params: &LearningParams,
    basis: &DMatrix<f64>,
    with_gradient: bool,
) -> Result<ObjectiveValue> {
    let (coupling_value, coupling_grads) =
        coupling(omega_u, omega_v, data, params.nu, with_gradient);
    let (rank_u, rank_grad_u) =
        weighted(params.kappa_u, omega_u, |m| rank_value_and_gradient(m, basis, with_gradient))?;
    let (rank_v, rank_grad_v) =
        weighted(params.kappa_v, omega_v, |m| rank_value_and_gradient(m, basis, with_gradient))?;
    let (coherence_u, coh_grad_u) =
        weighted(params.mu_u, omega_u, |m| coherence_value_and_gradient(m, with_gradient))?;
    let (coherence_v, coh_grad_v) =
        weighted(params.mu_v, omega_v, |m| coherence_value_and_gradient(m, with_gradient))?;

    let value = coupling_value
        + params.kappa_u * rank_u
        + params.mu_u * coherence_u
        + params.kappa_v * rank_v
        + params.mu_v * coherence_v;

    let (grad_u, grad_v) = match coupling_grads {
        Some((gu, gv)) => {
            let gu = gu
                + rank_grad_u.unwrap() * params.kappa_u
                + coh_grad_u.unwrap() * params.mu_u;
            let gv = gv
                + rank_grad_v.unwrap() * params.kappa_v
                + coh_grad_v.unwrap() * params.mu_v;
            (gu, gv)
        }
        None => (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)),
    };
    Ok(ObjectiveValue {
        value,
        coupling: coupling_value,
        rank_u,
        rank_v,
        coherence_u,
        coherence_v,
        grad_u,
        grad_v,
    })
}

type Term = (f64, Option<DMatrix<f64>>);

/// Terms with zero weight are skipped and report a zero value and gradient.
fn weighted(
    weight: f64,
    rows: &DMatrix<f64>,
    eval: impl FnOnce(&DMatrix<f64>) -> Result<Term>,
) -> Result<Term> {
    if weight == 0.0 {
        Ok((0.0, Some(DMatrix::zeros(rows.nrows(), rows.ncols()))))
    } else {
        eval(rows)
    }
}

/// The learning function over stacked points `[Ω_Uᵀ, Ω_Vᵀ]` with `2k` columns.
pub struct LearningObjective<'a> {
    data: &'a PatchDataset,
    params: LearningParams,
    k: usize,
    basis: DMatrix<f64>,
}

impl<'a> LearningObjective<'a> {
    pub fn new(data: &'a PatchDataset, params: LearningParams, k: usize) -> Result<Self> {
        params.validate()?;
        check_dims(data.n(), data)?;
        Ok(Self { data, params, k, basis: dct_complement_basis(data.n()) })
    }

    fn split(&self, at: &ManifoldPoint) -> (DMatrix<f64>, DMatrix<f64>) {
        let cols = at.columns();
        (cols.columns(0, self.k).transpose(), cols.columns(self.k, self.k).transpose())
    }

    pub fn evaluate(&self, at: &ManifoldPoint, with_gradient: bool) -> Result<ObjectiveValue> {
        if at.dim() != self.data.n() || at.count() != 2 * self.k {
            return Err(mismatch(
                format!("{}x{}", self.data.n(), 2 * self.k),
                format!("{}x{}", at.dim(), at.count()),
            ));
        }
        let (u, v) = self.split(at);
        evaluate(&u, &v, self.data, &self.params, &self.basis, with_gradient)
    }
}

impl Objective<ConstraintManifold> for LearningObjective<'_> {
    fn value(&self, at: &ManifoldPoint) -> Result<f64> {
        self.evaluate(at, false).map(|v| v.value)
    }

    fn value_and_gradient(&self, at: &ManifoldPoint) -> Result<(f64, DMatrix<f64>)> {
        let out = self.evaluate(at, true)?;
        let k = self.k;
        let mut ambient = DMatrix::zeros(self.data.n(), 2 * k);
        ambient.columns_mut(0, k).copy_from(&out.grad_u.transpose());
        ambient.columns_mut(k, k).copy_from(&out.grad_v.transpose());
        Ok((out.value, ambient))
    }
}
