//! Line-search optimization on Riemannian manifolds.
//!
//! Iterates move along geodesics, `X' = Γ(X, H, t)`, where `H` is either the
//! negative Riemannian gradient or a conjugate direction built from the hybrid
//! Dai-Yuan / Hestenes-Stiefel rule. Previous directions and gradients are
//! carried to the new tangent space by parallel transport.

mod constraint;
mod euclidean;
mod solver;

pub use constraint::{
    geodesic, parallel_transport, project_to_manifold, tangent_project, ConstraintManifold,
    ManifoldPoint, TangentVector,
};
pub use euclidean::Euclidean;
pub use solver::{
    cg_beta_hybrid, minimize, minimize_cg, Iterate, Method, Solution, SolverConfig, StopReason,
};

use crate::error::Result;

/// The geometry a line-search solver needs.
pub trait Manifold {
    type Point: Clone;
    type Tangent: Clone;
    /// Euclidean gradient representation produced by objectives.
    type Ambient;

    fn inner(&self, at: &Self::Point, a: &Self::Tangent, b: &Self::Tangent) -> f64;

    /// `a * x + b * y`.
    fn combine(&self, a: f64, x: &Self::Tangent, b: f64, y: &Self::Tangent) -> Self::Tangent;

    /// Orthogonal projection of the ambient gradient onto the tangent space.
    fn riemannian_gradient(&self, at: &Self::Point, ambient: &Self::Ambient) -> Self::Tangent;

    /// The curve the solver searches along; `geodesic(x, h, 0) == x`.
    fn geodesic(&self, at: &Self::Point, direction: &Self::Tangent, t: f64) -> Self::Point;

    /// Moves `payload` from the tangent space at `at` to the one at
    /// `geodesic(at, direction, t)`.
    fn transport(
        &self,
        at: &Self::Point,
        direction: &Self::Tangent,
        t: f64,
        payload: &Self::Tangent,
    ) -> Self::Tangent;

    /// Conjugate gradient falls back to steepest descent after this many steps.
    fn restart_period(&self) -> usize {
        usize::MAX
    }
}

/// A smooth function on the points of manifold `M`.
pub trait Objective<M: Manifold> {
    fn value(&self, at: &M::Point) -> Result<f64>;
    fn value_and_gradient(&self, at: &M::Point) -> Result<(f64, M::Ambient)>;
}
