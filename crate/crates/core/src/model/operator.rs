use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Modality;
use crate::manifold::ManifoldPoint;

const ROW_TOLERANCE: f64 = 1e-10;

/// Weights of the learning function: coupling sharpness `nu`, rank weights
/// `kappa_*` and coherence weights `mu_*` per modality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningParams {
    pub nu: f64,
    pub kappa_u: f64,
    pub kappa_v: f64,
    pub mu_u: f64,
    pub mu_v: f64,
}

impl LearningParams {
    /// Intensity (U) and depth (V).
    pub const INTENSITY_DEPTH: LearningParams =
        LearningParams { nu: 400.0, kappa_u: 5.0, kappa_v: 22.0, mu_u: 1e2, mu_v: 2.5e4 };

    /// Intensity (U) and near infrared (V).
    pub const INTENSITY_NIR: LearningParams =
        LearningParams { nu: 200.0, kappa_u: 250.0, kappa_v: 1000.0, mu_u: 250.0, mu_v: 1000.0 };

    pub fn preset(name: &str) -> Option<LearningParams> {
        match name {
            "intensity-depth" => Some(Self::INTENSITY_DEPTH),
            "intensity-nir" => Some(Self::INTENSITY_NIR),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [self.kappa_u, self.kappa_v, self.mu_u, self.mu_v];
        if !(self.nu > 0.0 && self.nu.is_finite())
            || weights.iter().any(|w| !(*w >= 0.0 && w.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "learning parameters must satisfy nu > 0 and non-negative weights: {self:?}"
            )));
        }
        Ok(())
    }
}

/// `k x n` operator whose rows have unit norm and zero mean.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOperator {
    rows: DMatrix<f64>,
    modality: Modality,
}

impl AnalysisOperator {
    pub fn new(rows: DMatrix<f64>, modality: Modality) -> Result<Self> {
        let (k, n) = rows.shape();
        if n < 3 {
            return Err(Error::PatchTooSmall(n));
        }
        if k + 1 < n {
            return Err(Error::InvalidParameter(format!(
                "operator needs at least n - 1 = {} rows, got {k}",
                n - 1
            )));
        }
        for (i, row) in rows.row_iter().enumerate() {
            if (row.norm() - 1.0).abs() > ROW_TOLERANCE || row.sum().abs() > ROW_TOLERANCE {
                return Err(Error::InvalidParameter(format!(
                    "row {i} is not unit-norm and zero-mean (norm {}, sum {})",
                    row.norm(),
                    row.sum()
                )));
            }
        }
        Ok(Self { rows, modality })
    }

    /// Builds the operator from the columns of a manifold point (`Ω = X^T`).
    pub fn from_point(point: &ManifoldPoint, modality: Modality) -> Result<Self> {
        Self::new(point.columns().transpose(), modality)
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn k(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n(&self) -> usize {
        self.rows.ncols()
    }

    /// Side length of the square patches this operator analyzes, if `n` is a square.
    pub fn patch_side(&self) -> Option<usize> {
        let n = self.n();
        let side = (n as f64).sqrt().round() as usize;
        (side * side == n).then_some(side)
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    /// Largest absolute off-diagonal entry of the row Gram matrix.
    pub fn max_coherence(&self) -> f64 {
        let gram = &self.rows * self.rows.transpose();
        let mut worst = 0.0f64;
        for i in 0..self.k() {
            for l in (i + 1)..self.k() {
                worst = worst.max(gram[(i, l)].abs());
            }
        }
        worst
    }
}

/// Operators for modalities U and V sharing the row count `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorPair {
    omega_u: AnalysisOperator,
    omega_v: AnalysisOperator,
    params: LearningParams,
}

impl OperatorPair {
    pub fn new(
        omega_u: AnalysisOperator,
        omega_v: AnalysisOperator,
        params: LearningParams,
    ) -> Result<Self> {
        if omega_u.k() != omega_v.k() || omega_u.n() != omega_v.n() {
            return Err(crate::error::mismatch(
                format!("{}x{}", omega_u.k(), omega_u.n()),
                format!("{}x{}", omega_v.k(), omega_v.n()),
            ));
        }
        Ok(Self { omega_u, omega_v, params })
    }

    pub fn omega_u(&self) -> &AnalysisOperator {
        &self.omega_u
    }

    pub fn omega_v(&self) -> &AnalysisOperator {
        &self.omega_v
    }

    pub fn params(&self) -> &LearningParams {
        &self.params
    }

    pub fn k(&self) -> usize {
        self.omega_u.k()
    }

    pub fn n(&self) -> usize {
        self.omega_u.n()
    }

    /// Stacks `[Ω_U^T, Ω_V^T]` as one point with `2k` columns.
    pub fn to_point(&self) -> ManifoldPoint {
        let (k, n) = (self.k(), self.n());
        let mut cols = DMatrix::zeros(n, 2 * k);
        cols.columns_mut(0, k).copy_from(&self.omega_u.rows.transpose());
        cols.columns_mut(k, k).copy_from(&self.omega_v.rows.transpose());
        ManifoldPoint::from_columns_unchecked(cols)
    }

    pub fn from_point(
        point: &ManifoldPoint,
        k: usize,
        modalities: (Modality, Modality),
        params: LearningParams,
    ) -> Result<Self> {
        let cols = point.columns();
        let omega_u = AnalysisOperator::new(cols.columns(0, k).transpose(), modalities.0)?;
        let omega_v = AnalysisOperator::new(cols.columns(k, k).transpose(), modalities.1)?;
        Self::new(omega_u, omega_v, params)
    }
}
