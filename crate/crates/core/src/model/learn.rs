use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::objective::LearningObjective;
use super::patches::PatchDataset;
use super::{LearningParams, OperatorPair};
use crate::error::{Error, Result};
use crate::manifold::{
    minimize, project_to_manifold, ConstraintManifold, Iterate, ManifoldPoint, Method,
    SolverConfig, StopReason,
};

#[derive(Debug, Clone)]
pub struct LearningReport {
    pub initial_value: f64,
    pub final_value: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub stop: StopReason,
}

/// Learns a coupled operator pair with `k` rows each.
pub fn learn_pair(
    data: &PatchDataset,
    k: usize,
    params: &LearningParams,
    solver: &SolverConfig,
    seed: u64,
) -> Result<OperatorPair> {
    learn_pair_with(data, k, params, solver, seed, &mut |_| {}).map(|(pair, _)| pair)
}

/// As [`learn_pair`], reporting every accepted iterate to `observer`.
///
/// Both operators start from independent Gaussian rows, centered and
/// normalized, drawn from `seed`.
pub fn learn_pair_with(
    data: &PatchDataset,
    k: usize,
    params: &LearningParams,
    solver: &SolverConfig,
    seed: u64,
    observer: &mut dyn FnMut(&Iterate<'_, ManifoldPoint>),
) -> Result<(OperatorPair, LearningReport)> {
    let n = data.n();
    if k + 1 < n {
        return Err(Error::InvalidParameter(format!("k = {k} must be at least n - 1 = {}", n - 1)));
    }
    let objective = LearningObjective::new(data, *params, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::from_fn(n, 2 * k, |_, _| StandardNormal.sample(&mut rng));
    let start = project_to_manifold(&raw)?;

    let manifold = ConstraintManifold { n, k: 2 * k };
    let solution =
        minimize(&manifold, &objective, start, solver, Method::ConjugateGradient, observer)?;
    let pair = OperatorPair::from_point(&solution.point, k, data.modalities(), *params)?;
    let report = LearningReport {
        initial_value: solution.values[0],
        final_value: solution.value,
        iterations: solution.iterations,
        gradient_norm: solution.gradient_norm,
        stop: solution.stop,
    };
    Ok((pair, report))
}
