use nalgebra::DVector;

use super::Manifold;

/// Flat space `R^dim`: straight lines and identity transport.
#[derive(Debug, Clone, Copy)]
pub struct Euclidean {
    pub dim: usize,
}

impl Manifold for Euclidean {
    type Point = DVector<f64>;
    type Tangent = DVector<f64>;
    type Ambient = DVector<f64>;

    fn inner(&self, _at: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(b)
    }

    fn combine(&self, a: f64, x: &DVector<f64>, b: f64, y: &DVector<f64>) -> DVector<f64> {
        x * a + y * b
    }

    fn riemannian_gradient(&self, _at: &DVector<f64>, ambient: &DVector<f64>) -> DVector<f64> {
        ambient.clone()
    }

    fn geodesic(&self, at: &DVector<f64>, direction: &DVector<f64>, t: f64) -> DVector<f64> {
        at + direction * t
    }

    fn transport(
        &self,
        _at: &DVector<f64>,
        _direction: &DVector<f64>,
        _t: f64,
        payload: &DVector<f64>,
    ) -> DVector<f64> {
        payload.clone()
    }

    fn restart_period(&self) -> usize {
        self.dim.max(1)
    }
}
