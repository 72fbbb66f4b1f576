use serde::{Deserialize, Serialize};

use super::{Manifold, Objective};
use crate::error::{Error, Result};

/// Smallest admissible Armijo step before the line search gives up.
const MIN_STEP: f64 = 1e-16;
/// CG denominators below this magnitude trigger a steepest-descent restart.
const BETA_DENOMINATOR_EPS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub gradient_norm_tolerance: f64,
    pub armijo_shrink: f64,
    pub armijo_slope: f64,
    pub initial_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_norm_tolerance: 1e-8,
            armijo_shrink: 0.5,
            armijo_slope: 0.1,
            initial_step: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn with_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.gradient_norm_tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.gradient_norm_tolerance > 0.0
            && self.armijo_shrink > 0.0
            && self.armijo_shrink < 1.0
            && self.armijo_slope > 0.0
            && self.armijo_slope < 1.0
            && self.initial_step > 0.0
            && self.initial_step.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid solver configuration {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    SteepestDescent,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// The expected Armijo decrease fell below the resolution of the objective value.
    Stalled,
}

/// Snapshot handed to observers after every accepted step.
#[derive(Debug)]
pub struct Iterate<'a, P> {
    pub iteration: usize,
    pub point: &'a P,
    pub value: f64,
    pub gradient_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct Solution<P> {
    pub point: P,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub stop: StopReason,
    /// Objective value at the start and after every accepted step.
    pub values: Vec<f64>,
}

/// Hybrid conjugate-gradient coefficient `max(0, min(β_DY, β_HS))`.
///
/// All arguments live in the tangent space at `at`; the previous gradient and
/// direction must already be transported there.
pub fn cg_beta_hybrid<M: Manifold>(
    manifold: &M,
    at: &M::Point,
    grad_new: &M::Tangent,
    grad_old_transported: &M::Tangent,
    dir_old_transported: &M::Tangent,
) -> Result<f64> {
    let y = manifold.combine(1.0, grad_new, -1.0, grad_old_transported);
    let denom = manifold.inner(at, dir_old_transported, &y);
    if !(denom.abs() >= BETA_DENOMINATOR_EPS) {
        return Err(Error::ZeroDenominator(denom));
    }
    let beta_hs = manifold.inner(at, grad_new, &y) / denom;
    let beta_dy = manifold.inner(at, grad_new, grad_new) / denom;
    Ok(beta_dy.min(beta_hs).max(0.0))
}

/// Conjugate gradient with the hybrid coefficient and Armijo backtracking.
pub fn minimize_cg<M, O>(
    manifold: &M,
    objective: &O,
    start: M::Point,
    config: &SolverConfig,
) -> Result<Solution<M::Point>>
where
    M: Manifold,
    O: Objective<M> + ?Sized,
{
    minimize(manifold, objective, start, config, Method::ConjugateGradient, &mut |_| {})
}

/// Line search along `manifold.geodesic`, accepting a step `t` when
/// `f(Γ(X,H,t)) <= f(X) + slope * t * <G, H>`.
///
/// The trial step starts at `config.initial_step`; after backtracking the next
/// trial starts from the accepted step, and two consecutive first-try
/// acceptances double it.
pub fn minimize<M, O>(
    manifold: &M,
    objective: &O,
    start: M::Point,
    config: &SolverConfig,
    method: Method,
    observer: &mut dyn FnMut(&Iterate<'_, M::Point>),
) -> Result<Solution<M::Point>>
where
    M: Manifold,
    O: Objective<M> + ?Sized,
{
    config.validate()?;
    let mut point = start;
    let (_, ambient) = objective.value_and_gradient(&point)?;
    let mut value = objective.value(&point)?;
    if !value.is_finite() {
        return Err(Error::NonFiniteObjective(value));
    }
    let mut grad = manifold.riemannian_gradient(&point, &ambient);
    let mut grad_norm = manifold.inner(&point, &grad, &grad).sqrt();
    let mut values = vec![value];

    if grad_norm < config.gradient_norm_tolerance {
        return Ok(Solution {
            point,
            value,
            gradient_norm: grad_norm,
            iterations: 0,
            stop: StopReason::GradientTolerance,
            values,
        });
    }

    let mut direction = manifold.combine(-1.0, &grad, 0.0, &grad);
    let mut trial = config.initial_step;
    let mut first_try_streak = 0usize;
    let mut since_restart = 0usize;
    let period = manifold.restart_period();
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        let mut slope = manifold.inner(&point, &grad, &direction);
        if !(slope < 0.0) {
            direction = manifold.combine(-1.0, &grad, 0.0, &grad);
            slope = -grad_norm * grad_norm;
            since_restart = 0;
        }

        let mut t = trial;
        let mut backtracks = 0usize;
        let (next, next_value) = loop {
            let candidate = manifold.geodesic(&point, &direction, t);
            let f = objective.value(&candidate)?;
            if f.is_finite() && f <= value + config.armijo_slope * t * slope {
                break (candidate, f);
            }
            t *= config.armijo_shrink;
            backtracks += 1;
            if t < MIN_STEP {
                if (config.armijo_slope * t * slope).abs() <= f64::EPSILON * value.abs() {
                    stop = StopReason::Stalled;
                    return Ok(Solution {
                        point,
                        value,
                        gradient_norm: grad_norm,
                        iterations,
                        stop,
                        values,
                    });
                }
                return Err(Error::LineSearchFailure { iteration: iterations, min_step: MIN_STEP });
            }
        };

        if backtracks == 0 {
            first_try_streak += 1;
            trial = if first_try_streak == 2 {
                first_try_streak = 0;
                t * 2.0
            } else {
                t
            };
        } else {
            first_try_streak = 0;
            trial = t;
        }

        let (_, ambient) = objective.value_and_gradient(&next)?;
        let next_grad = manifold.riemannian_gradient(&next, &ambient);
        let next_norm = manifold.inner(&next, &next_grad, &next_grad).sqrt();
        iterations += 1;
        values.push(next_value);
        observer(&Iterate {
            iteration: iterations,
            point: &next,
            value: next_value,
            gradient_norm: next_norm,
            step: t,
        });

        let next_direction = match method {
            Method::SteepestDescent => manifold.combine(-1.0, &next_grad, 0.0, &next_grad),
            Method::ConjugateGradient => {
                since_restart += 1;
                let beta = if since_restart >= period {
                    since_restart = 0;
                    0.0
                } else {
                    let grad_t = manifold.transport(&point, &direction, t, &grad);
                    let dir_t = manifold.transport(&point, &direction, t, &direction);
                    match cg_beta_hybrid(manifold, &next, &next_grad, &grad_t, &dir_t) {
                        Ok(beta) => beta,
                        Err(Error::ZeroDenominator(_)) => {
                            since_restart = 0;
                            0.0
                        }
                        Err(e) => return Err(e),
                    }
                };
                if beta == 0.0 {
                    manifold.combine(-1.0, &next_grad, 0.0, &next_grad)
                } else {
                    let dir_t = manifold.transport(&point, &direction, t, &direction);
                    manifold.combine(-1.0, &next_grad, beta, &dir_t)
                }
            }
        };

        point = next;
        value = next_value;
        grad = next_grad;
        grad_norm = next_norm;
        direction = next_direction;

        if grad_norm < config.gradient_norm_tolerance {
            stop = StopReason::GradientTolerance;
            break;
        }
    }

    Ok(Solution { point, value, gradient_norm: grad_norm, iterations, stop, values })
}
