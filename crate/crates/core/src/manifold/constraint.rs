//! The product manifold `(S^{n-1} ∩ 1⊥)^k` of unit-norm, zero-mean columns.
//!
//! Each factor is a great sphere inside the hyperplane orthogonal to the
//! all-ones vector, so geodesics and parallel transport are the great-circle
//! formulas of the oblique manifold applied column by column.

use nalgebra::{DMatrix, DVector};

use super::Manifold;
use crate::error::{Error, Result};

const DEGENERATE_NORM: f64 = 1e-12;

/// `k` unit-norm, zero-mean columns in `R^n` (the transposed operator rows).
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint {
    columns: DMatrix<f64>,
}

/// A tangent vector: column `i` is orthogonal to base column `i` and to `1_n`.
///
/// The base point is not stored; callers keep tangent vectors next to the
/// point they were projected at.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    columns: DMatrix<f64>,
}

impl ManifoldPoint {
    /// Wraps columns that already satisfy the constraints to within `tol`.
    pub fn from_columns(columns: DMatrix<f64>, tol: f64) -> Result<Self> {
        let point = Self { columns };
        let (norm_err, mean_err) = point.constraint_violation();
        if norm_err > tol || mean_err > tol {
            return Err(Error::InvalidParameter(format!(
                "columns violate manifold constraints (norm error {norm_err:e}, sum error {mean_err:e})"
            )));
        }
        Ok(point)
    }

    pub(crate) fn from_columns_unchecked(columns: DMatrix<f64>) -> Self {
        Self { columns }
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn into_columns(self) -> DMatrix<f64> {
        self.columns
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    /// Number of factors `k`.
    pub fn count(&self) -> usize {
        self.columns.ncols()
    }

    /// Largest `|‖x_i‖ - 1|` and largest `|Σ_j x_ij|` over all columns.
    pub fn constraint_violation(&self) -> (f64, f64) {
        self.columns.column_iter().fold((0.0f64, 0.0f64), |(n, s), col| {
            (n.max((col.norm() - 1.0).abs()), s.max(col.sum().abs()))
        })
    }
}

impl TangentVector {
    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn into_columns(self) -> DMatrix<f64> {
        self.columns
    }

    pub fn zeros_like(base: &ManifoldPoint) -> Self {
        Self { columns: DMatrix::zeros(base.dim(), base.count()) }
    }

    /// Sum of per-column standard inner products.
    pub fn inner(&self, other: &TangentVector) -> f64 {
        self.columns.dot(&other.columns)
    }

    pub fn norm(&self) -> f64 {
        self.columns.norm()
    }
}

/// Centers every column and scales it to unit norm.
pub fn project_to_manifold(raw: &DMatrix<f64>) -> Result<ManifoldPoint> {
    let mut columns = raw.clone();
    for (i, mut col) in columns.column_iter_mut().enumerate() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        if !(norm >= DEGENERATE_NORM) {
            return Err(Error::DegenerateColumn { column: i, norm });
        }
        col /= norm;
    }
    Ok(ManifoldPoint { columns })
}

/// Column-wise `P_x y = (I - x x^T - 1 1^T / n) y`.
pub fn tangent_project(base: &ManifoldPoint, ambient: &DMatrix<f64>) -> TangentVector {
    assert_eq!(base.columns.shape(), ambient.shape(), "tangent_project: shape mismatch");
    let mut columns = ambient.clone();
    for (mut y, x) in columns.column_iter_mut().zip(base.columns.column_iter()) {
        let mean = y.mean();
        y.add_scalar_mut(-mean);
        let along = x.dot(&y);
        y.axpy(-along, &x, 1.0);
    }
    TangentVector { columns }
}

/// Strips rounding residue so `direction` is tangent at `base` to working precision.
fn clean_direction(base: &ManifoldPoint, direction: &TangentVector) -> DMatrix<f64> {
    tangent_project(base, &direction.columns).columns
}

/// Great-circle geodesic per column: `x cos(σt) + (h/σ) sin(σt)` with `σ = ‖h‖`.
pub fn geodesic(base: &ManifoldPoint, direction: &TangentVector, t: f64) -> ManifoldPoint {
    let mut columns = base.columns.clone();
    let direction = clean_direction(base, direction);
    for (mut out, h) in columns.column_iter_mut().zip(direction.column_iter()) {
        let sigma = h.norm();
        if sigma == 0.0 {
            continue;
        }
        let (s, c) = (sigma * t).sin_cos();
        out *= c;
        out.axpy(s / sigma, &h, 1.0);
    }
    ManifoldPoint { columns }
}

/// Parallel transport of `payload` along `geodesic(base, direction, ·)` up to `t`.
///
/// Per column, the component of the payload along `u = h/‖h‖` is rotated in the
/// `(x, u)` plane; the orthogonal remainder is unchanged.
pub fn parallel_transport(
    base: &ManifoldPoint,
    direction: &TangentVector,
    t: f64,
    payload: &TangentVector,
) -> TangentVector {
    let mut columns = payload.columns.clone();
    let direction = clean_direction(base, direction);
    for ((mut v, h), x) in columns
        .column_iter_mut()
        .zip(direction.column_iter())
        .zip(base.columns.column_iter())
    {
        let sigma = h.norm();
        if sigma == 0.0 {
            continue;
        }
        let u: DVector<f64> = h / sigma;
        let a = u.dot(&v);
        let (s, c) = (sigma * t).sin_cos();
        v.axpy(-a * s, &x, 1.0);
        v.axpy(a * (c - 1.0), &u, 1.0);
    }
    TangentVector { columns }
}

/// `(S^{n-1} ∩ 1⊥)^k` as a solver geometry.
#[derive(Debug, Clone, Copy)]
pub struct ConstraintManifold {
    pub n: usize,
    pub k: usize,
}

impl Manifold for ConstraintManifold {
    type Point = ManifoldPoint;
    type Tangent = TangentVector;
    type Ambient = DMatrix<f64>;

    fn inner(&self, _at: &ManifoldPoint, a: &TangentVector, b: &TangentVector) -> f64 {
        a.inner(b)
    }

    fn combine(&self, a: f64, x: &TangentVector, b: f64, y: &TangentVector) -> TangentVector {
        TangentVector { columns: &x.columns * a + &y.columns * b }
    }

    fn riemannian_gradient(&self, at: &ManifoldPoint, ambient: &DMatrix<f64>) -> TangentVector {
        tangent_project(at, ambient)
    }

    fn geodesic(&self, at: &ManifoldPoint, direction: &TangentVector, t: f64) -> ManifoldPoint {
        geodesic(at, direction, t)
    }

    fn transport(
        &self,
        at: &ManifoldPoint,
        direction: &TangentVector,
        t: f64,
        payload: &TangentVector,
    ) -> TangentVector {
        parallel_transport(at, direction, t, payload)
    }

    fn restart_period(&self) -> usize {
        self.n * self.k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, n: usize, k: usize) -> ManifoldPoint {
        let raw = DMatrix::from_fn(n, k, |_, _| rng.gen_range(-1.0..1.0));
        project_to_manifold(&raw).unwrap()
    }

    fn random_tangent(rng: &mut ChaCha8Rng, base: &ManifoldPoint) -> TangentVector {
        let raw = DMatrix::from_fn(base.dim(), base.count(), |_, _| rng.gen_range(-1.0..1.0));
        tangent_project(base, &raw)
    }

    fn col(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(values.len(), 1, values)
    }

    #[test]
    fn project_examples() {
        let s = 1.0 / 2f64.sqrt();
        let p = project_to_manifold(&col(&[s, -s, 0.0])).unwrap();
        assert!((p.columns()[(0, 0)] - s).abs() < 1e-15);
        assert!((p.columns()[(1, 0)] + s).abs() < 1e-15);

        let p = project_to_manifold(&col(&[2.0, 0.0, 0.0])).unwrap();
        let r6 = 6f64.sqrt();
        for (got, want) in p.columns().iter().zip([2.0 / r6, -1.0 / r6, -1.0 / r6]) {
            assert!((got - want).abs() < 1e-15);
        }

        let err = project_to_manifold(&col(&[3.0, 3.0, 3.0])).unwrap_err();
        assert!(matches!(err, Error::DegenerateColumn { column: 0, .. }));
    }

    #[test]
    fn tangent_project_kills_normal_directions() {
        let s = 1.0 / 2f64.sqrt();
        let base = project_to_manifold(&col(&[s, -s, 0.0])).unwrap();
        let h = tangent_project(&base, base.columns());
        assert!(h.norm() < 1e-15);
        let h = tangent_project(&base, &col(&[1.0, 1.0, 1.0]));
        assert!(h.norm() < 1e-15);
    }

    #[test]
    fn tangent_project_matches_gram_schmidt() {
        let s = 1.0 / 2f64.sqrt();
        let x = [s, -s, 0.0];
        let base = project_to_manifold(&col(&x)).unwrap();
        let y = [1.0, 0.0, 0.0];
        let got = tangent_project(&base, &col(&y));

        // Gram-Schmidt on {x, 1}, then subtract the span component from y.
        let ones = [1.0, 1.0, 1.0];
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        let q1: Vec<f64> = x.to_vec();
        let proj = dot(&ones, &q1);
        let mut q2: Vec<f64> = ones.iter().zip(&q1).map(|(o, q)| o - proj * q).collect();
        let nq2 = dot(&q2, &q2).sqrt();
        q2.iter_mut().for_each(|v| *v /= nq2);
        let (a1, a2) = (dot(&y, &q1), dot(&y, &q2));
        let want: Vec<f64> = (0..3).map(|i| y[i] - a1 * q1[i] - a2 * q2[i]).collect();

        for i in 0..3 {
            assert!((got.columns()[(i, 0)] - want[i]).abs() < 1e-14);
        }
        let out: Vec<f64> = got.columns().iter().copied().collect();
        assert!(dot(&out, &x).abs() < 1e-14);
        assert!(dot(&out, &ones).abs() < 1e-14);
        // residual lies in span{x, 1}
        let residual: Vec<f64> = (0..3).map(|i| y[i] - out[i]).collect();
        let back: Vec<f64> = (0..3)
            .map(|i| dot(&residual, &q1) * q1[i] + dot(&residual, &q2) * q2[i])
            .collect();
        for i in 0..3 {
            assert!((back[i] - residual[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn projector_is_symmetric_idempotent_rank_n_minus_2() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [3, 5, 9] {
            let base = random_point(&mut rng, n, 1);
            let mut p = DMatrix::zeros(n, n);
            for j in 0..n {
                let mut e = DMatrix::zeros(n, 1);
                e[(j, 0)] = 1.0;
                p.set_column(j, &tangent_project(&base, &e).columns().column(0));
            }
            assert!((&p - p.transpose()).norm() < 1e-12);
            assert!((&p * &p - &p).norm() < 1e-12);
            assert_eq!(p.clone().svd(false, false).rank(1e-8), n - 2);
            // idempotence of the operation itself
            let y = DMatrix::from_fn(n, 1, |_, _| rng.gen_range(-1.0..1.0));
            let once = tangent_project(&base, &y);
            let twice = tangent_project(&base, once.columns());
            assert!((once.columns() - twice.columns()).norm() < 1e-14);
        }
    }

    #[test]
    fn geodesic_stationary_and_periodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = random_point(&mut rng, 5, 1);
        let zero = TangentVector::zeros_like(&base);
        assert_eq!(geodesic(&base, &zero, 3.7), base);

        let h = random_tangent(&mut rng, &base);
        let t = 2.0 * std::f64::consts::PI / h.norm();
        let back = geodesic(&base, &h, t);
        assert!((back.columns() - base.columns()).norm() < 1e-12);
    }

    /// RK4 integration of the sphere geodesic equation x'' = -‖x'‖² x.
    fn rk4_geodesic(x0: &[f64], v0: &[f64], t: f64, steps: usize) -> Vec<f64> {
        let n = x0.len();
        let accel = |x: &[f64], v: &[f64]| -> Vec<f64> {
            let vv: f64 = v.iter().map(|a| a * a).sum();
            x.iter().map(|xi| -vv * xi).collect()
        };
        let (mut x, mut v) = (x0.to_vec(), v0.to_vec());
        let dt = t / steps as f64;
        for _ in 0..steps {
            let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> {
                a.iter().zip(b).map(|(p, q)| p + s * q).collect()
            };
            let k1x = v.clone();
            let k1v = accel(&x, &v);
            let (x2, v2) = (add(&x, &k1x, dt / 2.0), add(&v, &k1v, dt / 2.0));
            let k2x = v2.clone();
            let k2v = accel(&x2, &v2);
            let (x3, v3) = (add(&x, &k2x, dt / 2.0), add(&v, &k2v, dt / 2.0));
            let k3x = v3.clone();
            let k3v = accel(&x3, &v3);
            let (x4, v4) = (add(&x, &k3x, dt), add(&v, &k3v, dt));
            let k4x = v4.clone();
            let k4v = accel(&x4, &v4);
            for i in 0..n {
                x[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
                v[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
            }
        }
        x
    }

    #[test]
    fn geodesic_matches_ode_integration() {
        let s2 = 1.0 / 2f64.sqrt();
        let s6 = 1.0 / 6f64.sqrt();
        let x = [s2, -s2, 0.0];
        let h = [s6, s6, -2.0 * s6];
        let base = ManifoldPoint::from_columns(col(&x), 1e-14).unwrap();
        let dir = tangent_project(&base, &col(&h));
        assert!((dir.columns() - col(&h)).norm() < 1e-15);
        let got = geodesic(&base, &dir, 0.3);
        let (ne, se) = got.constraint_violation();
        assert!(ne < 1e-14 && se < 1e-14);
        let want = rk4_geodesic(&x, &h, 0.3, 2000);
        for i in 0..3 {
            assert!((got.columns()[(i, 0)] - want[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn geodesic_velocity_at_zero_is_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base = random_point(&mut rng, 6, 3);
        let h = random_tangent(&mut rng, &base);
        let eps = 1e-6;
        let fwd = geodesic(&base, &h, eps);
        let bwd = geodesic(&base, &h, -eps);
        let vel = (fwd.columns() - bwd.columns()) / (2.0 * eps);
        assert!((vel - h.columns()).norm() < 1e-8);
    }

    #[test]
    fn transport_identity_velocity_and_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let base = random_point(&mut rng, 4, 3);
        let h = random_tangent(&mut rng, &base);
        let a = random_tangent(&mut rng, &base);
        let b = random_tangent(&mut rng, &base);

        assert_eq!(parallel_transport(&base, &h, 0.0, &a), a);

        let t = 0.8;
        let moved = parallel_transport(&base, &h, t, &h);
        let eps = 1e-6;
        let vel = (geodesic(&base, &h, t + eps).columns() - geodesic(&base, &h, t - eps).columns())
            / (2.0 * eps);
        assert!((moved.columns() - vel).norm() < 1e-8);
        assert!((moved.norm() - h.norm()).abs() < 1e-12);

        let (ta, tb) = (parallel_transport(&base, &h, t, &a), parallel_transport(&base, &h, t, &b));
        assert!((ta.inner(&tb) - a.inner(&b)).abs() < 1e-10);

        // transported vectors are tangent at the endpoint
        let end = geodesic(&base, &h, t);
        let reproj = tangent_project(&end, ta.columns());
        assert!((reproj.columns() - ta.columns()).norm() < 1e-12);
    }

    #[test]
    fn zero_direction_transport_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let base = random_point(&mut rng, 5, 2);
        let a = random_tangent(&mut rng, &base);
        let zero = TangentVector::zeros_like(&base);
        assert_eq!(parallel_transport(&base, &zero, 2.0, &a), a);
    }
}
