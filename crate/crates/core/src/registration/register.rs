use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::global::{Boundary, GlobalAnalysis};
use crate::image::ModalImage;
use crate::manifold::SolverConfig;
use crate::model::OperatorPair;

use super::group::{AlgebraElement, Group, GroupElement, MetricWeights};
use super::warp::{gaussian_pyramid, sample_with_gradient, warp_about, Region};

pub const DEFAULT_PYRAMID_LEVELS: usize = 4;
/// Steps moving no point of the region further than this count as converged.
const MIN_DISPLACEMENT: f64 = 1e-4;
/// Trial steps are capped at this many multiples of the configured initial displacement.
const MAX_STEP_GROWTH: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct RegistrationProblem {
    pub fixed: ModalImage,
    pub moving: ModalImage,
    pub pair: OperatorPair,
    pub group: Group,
    /// `None` balances translation against the region diagonal at every level.
    pub weights: Option<MetricWeights>,
    /// Region of the finest level; `None` uses the whole fixed image.
    pub region: Option<Region>,
    pub levels: usize,
}

impl RegistrationProblem {
    pub fn new(fixed: ModalImage, moving: ModalImage, pair: OperatorPair, group: Group) -> Self {
        Self { fixed, moving, pair, group, weights: None, region: None, levels: DEFAULT_PYRAMID_LEVELS }
    }

    pub fn with_levels(mut self, levels: usize) -> Self {
        self.levels = levels;
        self
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.region = Some(region);
        self
    }

    pub fn with_weights(mut self, weights: MetricWeights) -> Self {
        self.weights = Some(weights);
        self
    }

    /// 100 iterations per level, gradient tolerance `1e-6`, first trial step of one pixel.
    pub fn default_solver() -> SolverConfig {
        SolverConfig { max_iterations: 100, gradient_norm_tolerance: 1e-6, ..SolverConfig::default() }
    }

    fn finest_region(&self) -> Region {
        self.region.unwrap_or_else(|| Region::full(&self.fixed))
    }

    fn side(&self) -> Result<usize> {
        self.pair.omega_u().patch_side().ok_or_else(|| {
            Error::InvalidParameter(format!("patch dimension {} is not a square", self.pair.n()))
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::InvalidParameter("at least one pyramid level is required".into()));
        }
        let region = self.finest_region();
        if !region.fits(&self.fixed) || !region.fits(&self.moving) {
            return Err(Error::InvalidParameter(format!("region {region:?} exceeds the images")));
        }
        let side = self.side()?;
        let coarsest = level_region(&region, self.levels - 1);
        if coarsest.width < 2 * side || coarsest.height < 2 * side {
            return Err(Error::TooSmall(format!(
                "coarsest region {}x{} is smaller than twice the patch side {side}",
                coarsest.width, coarsest.height
            )));
        }
        Ok(())
    }
}

/// Pixels of a coarser level whose finer ancestors lie in `region`.
fn level_region(region: &Region, level: usize) -> Region {
    let s = 1usize << level;
    let col = region.col.div_ceil(s);
    let row = region.row.div_ceil(s);
    let last_col = (region.col + region.width - 1) / s;
    let last_row = (region.row + region.height - 1) / s;
    Region::new(col, row, (last_col + 1).saturating_sub(col), (last_row + 1).saturating_sub(row))
}

/// The objective restricted to one pyramid level.
pub struct LevelObjective<'a> {
    moving: &'a ModalImage,
    region: Region,
    origin: (f64, f64),
    analysis_v: GlobalAnalysis,
    fixed_coeffs: Vec<f64>,
    nu: f64,
    group: Group,
    weights: MetricWeights,
}

#[derive(Debug, Clone, Copy)]
pub struct LevelGradient {
    pub value: f64,
    /// Euclidean gradient `vec⁻¹(r)` with respect to the left-multiplied matrix.
    pub euclidean: Matrix3<f64>,
    pub riemannian: AlgebraElement,
}

impl<'a> LevelObjective<'a> {
    /// `origin` is the pixel position of the transform coordinates' origin.
    pub fn new(
        fixed: &ModalImage,
        moving: &'a ModalImage,
        pair: &OperatorPair,
        group: Group,
        region: Region,
        origin: (f64, f64),
        weights: MetricWeights,
    ) -> Result<Self> {
        if !region.fits(fixed) || !region.fits(moving) {
            return Err(Error::InvalidParameter(format!("region {region:?} exceeds the images")));
        }
        let crop = fixed.crop(region.row, region.col, region.height, region.width)?;
        let analysis_u = GlobalAnalysis::new(pair.omega_u(), region.width, region.height, Boundary::Valid)?;
        let analysis_v = GlobalAnalysis::new(pair.omega_v(), region.width, region.height, Boundary::Valid)?;
        let fixed_coeffs = analysis_u.apply(&crop)?;
        Ok(Self { moving, region, origin, analysis_v, fixed_coeffs, nu: pair.params().nu, group, weights })
    }

    pub fn weights(&self) -> &MetricWeights {
        &self.weights
    }

    /// Corners of the region in transform coordinates.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let x0 = self.region.col as f64 - self.origin.0;
        let y0 = self.region.row as f64 - self.origin.1;
        let x1 = x0 + (self.region.width - 1) as f64;
        let y1 = y0 + (self.region.height - 1) as f64;
        [(x0, y0), (x1, y0), (x0, y1), (x1, y1)]
    }

    /// Coefficients of the warped moving image and the mask of fully valid patches.
    fn analyze(&self, tau: &GroupElement) -> Result<(Vec<f64>, Vec<bool>)> {
        let warped = warp_about(self.moving, tau, &self.region, self.origin);
        let coeffs = self.analysis_v.apply(&warped.image)?;
        let usable = (0..self.analysis_v.positions())
            .map(|b| self.analysis_v.patch_indices(b).iter().all(|&i| warped.valid[i as usize]))
            .collect();
        Ok((coeffs, usable))
    }

    /// Mean coupled sparsity over patches whose samples all fall inside the moving image.
    pub fn value(&self, tau: &GroupElement) -> Result<f64> {
        let (coeffs, usable) = self.analyze(tau)?;
        self.mean_coupling(&coeffs, &usable)
    }

    fn mean_coupling(&self, coeffs: &[f64], usable: &[bool]) -> Result<f64> {
        let k = self.analysis_v.k();
        let mut total = 0.0;
        let mut count = 0usize;
        for (b, ok) in usable.iter().enumerate() {
            if !ok {
                continue;
            }
            count += 1;
            let range = b * k..(b + 1) * k;
            total += self.fixed_coeffs[range.clone()]
                .iter()
                .zip(&coeffs[range])
                .map(|(c, v)| (self.nu * (c * c + v * v)).ln_1p())
                .sum::<f64>();
        }
        if count == 0 {
            return Err(Error::TooSmall("no patch of the region overlaps the moving image".into()));
        }
        let value = total / count as f64;
        if !value.is_finite() {
            return Err(Error::NonFiniteObjective(value));
        }
        Ok(value)
    }

    pub fn gradient(&self, tau: &GroupElement) -> Result<LevelGradient> {
        let (coeffs, usable) = self.analyze(tau)?;
        let value = self.mean_coupling(&coeffs, &usable)?;
        let k = self.analysis_v.k();
        let count = usable.iter().filter(|u| **u).count() as f64;
        let mut dcoeffs = vec![0.0; coeffs.len()];
        for (b, ok) in usable.iter().enumerate() {
            if !ok {
                continue;
            }
            for j in b * k..(b + 1) * k {
                let (c, v) = (self.fixed_coeffs[j], coeffs[j]);
                dcoeffs[j] = 2.0 * self.nu * v / (1.0 + self.nu * (c * c + v * v)) / count;
            }
        }
        let dpixels = self.analysis_v.apply_adjoint(&dcoeffs)?;
        let m = tau.matrix();
        let mut r = Matrix3::zeros();
        for (idx, &w) in dpixels.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let x = (self.region.col + idx % self.region.width) as f64 - self.origin.0;
            let y = (self.region.row + idx / self.region.width) as f64 - self.origin.1;
            let px = m[(0, 0)] * x + m[(0, 1)] * y + m[(0, 2)];
            let py = m[(1, 0)] * x + m[(1, 1)] * y + m[(1, 2)];
            let (_, gx, gy) = sample_with_gradient(self.moving, px + self.origin.0, py + self.origin.1)
                .ok_or(Error::NonFiniteGradient)?;
            let (ax, ay) = (w * gx, w * gy);
            r[(0, 0)] += ax * px;
            r[(0, 1)] += ax * py;
            r[(0, 2)] += ax;
            r[(1, 0)] += ay * px;
            r[(1, 1)] += ay * py;
            r[(1, 2)] += ay;
        }
        if r.iter().any(|v: &f64| !v.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        let riemannian = AlgebraElement::projected(&self.weights.raise(&r), self.group);
        Ok(LevelGradient { value, euclidean: r, riemannian })
    }
}

fn finest_objective(problem: &RegistrationProblem) -> Result<LevelObjective<'_>> {
    problem.validate()?;
    let region = problem.finest_region();
    let weights = problem.weights.unwrap_or_else(|| MetricWeights::balanced(region.diagonal()));
    LevelObjective::new(
        &problem.fixed,
        &problem.moving,
        &problem.pair,
        problem.group,
        region,
        region.centre(),
        weights,
    )
}

/// Objective on the finest level, without the pyramid.
pub fn registration_objective(problem: &RegistrationProblem, tau: &GroupElement) -> Result<f64> {
    finest_objective(problem)?.value(tau)
}

/// Riemannian gradient at `τ` on the finest level, without the pyramid.
pub fn registration_gradient(problem: &RegistrationProblem, tau: &GroupElement) -> Result<AlgebraElement> {
    Ok(finest_objective(problem)?.gradient(tau)?.riemannian)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub level: usize,
    pub iterations: usize,
    pub initial_value: f64,
    pub final_value: f64,
    pub gradient_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct Registration {
    pub transform: GroupElement,
    /// Coarsest level first.
    pub levels: Vec<LevelReport>,
}

/// Gradient descent along `e^{-tG} τ` with Armijo steps, one pass per pyramid level.
pub fn descend(
    objective: &LevelObjective<'_>,
    start: GroupElement,
    solver: &SolverConfig,
    tolerance: f64,
    level: usize,
) -> Result<(GroupElement, LevelReport)> {
    solver.validate()?;
    let corners = objective.corners();
    let mut tau = start;
    let mut current = objective.gradient(&tau)?;
    let initial_value = current.value;
    let mut step_px = solver.initial_step;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < solver.max_iterations {
        let g = current.riemannian;
        let norm_sq = objective.weights().inner(g.matrix(), g.matrix());
        if norm_sq.sqrt() < tolerance {
            converged = true;
            break;
        }
        let reach = g.displacement(&corners);
        if !(reach > 0.0) {
            converged = true;
            break;
        }
        let mut t = step_px / reach;
        let mut accepted = None;
        let mut first_try = true;
        while t * reach >= MIN_DISPLACEMENT {
            let candidate = g.scale(-t).exp().compose(&tau);
            match objective.value(&candidate) {
                Ok(v) if v <= current.value - solver.armijo_slope * t * norm_sq => {
                    accepted = Some(candidate);
                    break;
                }
                Ok(_) | Err(Error::TooSmall(_)) => {}
                Err(e) => return Err(e),
            }
            t *= solver.armijo_shrink;
            first_try = false;
        }
        let Some(next) = accepted else {
            converged = true;
            break;
        };
        iterations += 1;
        tau = next;
        current = objective.gradient(&tau)?;
        let moved = t * reach;
        step_px = if first_try { (2.0 * moved).min(MAX_STEP_GROWTH * solver.initial_step) } else { moved };
    }
    let gradient_norm = objective.weights().norm(current.riemannian.matrix());
    let report = LevelReport { level, iterations, initial_value, final_value: current.value, gradient_norm, converged };
    Ok((tau, report))
}

/// Coarse-to-fine registration starting from the identity.
pub fn register(problem: &RegistrationProblem, solver: &SolverConfig) -> Result<Registration> {
    problem.validate()?;
    solver.validate()?;
    let fixed = gaussian_pyramid(&problem.fixed, problem.levels)?;
    let moving = gaussian_pyramid(&problem.moving, problem.levels)?;
    let finest = problem.finest_region();
    let (ox, oy) = finest.centre();
    let mut tau = GroupElement::identity(problem.group);
    for _ in 1..problem.levels {
        tau = tau.coarsen();
    }
    let mut reports = Vec::with_capacity(problem.levels);
    for level in (0..problem.levels).rev() {
        let scale = (1usize << level) as f64;
        let region = level_region(&finest, level);
        let weights = problem.weights.unwrap_or_else(|| MetricWeights::balanced(region.diagonal()));
        let objective = LevelObjective::new(
            &fixed[level],
            &moving[level],
            &problem.pair,
            problem.group,
            region,
            (ox / scale, oy / scale),
            weights,
        )?;
        let tolerance = solver.gradient_norm_tolerance * scale;
        let (next, report) = descend(&objective, tau, solver, tolerance, level)?;
        reports.push(report);
        tau = if level > 0 { next.refine() } else { next };
    }
    Ok(Registration { transform: tau, levels: reports })
}

/// Remaining misalignment `D τ` of a recovered transform against a known deregistration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub x: f64,
    pub y: f64,
    pub theta_deg: f64,
}

impl Residual {
    pub fn between(recovered: &GroupElement, deregistration: &GroupElement) -> Self {
        let e = deregistration.compose(recovered);
        let (x, y) = e.translation();
        Self { x, y, theta_deg: e.angle_deg() }
    }

    /// `√(ε_x² + ε_y² + ε_θ²)`, mixing pixels and degrees.
    pub fn combined(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.theta_deg * self.theta_deg).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Modality;
    use crate::model::{dct_complement_basis, AnalysisOperator, LearningParams};
    use crate::synth::{Layer, Scene};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// 2-D difference filters over 3x3 patches, shared by both modalities.
    fn fixed_pair() -> OperatorPair {
        let basis = dct_complement_basis(3);
        let mut rows = nalgebra::DMatrix::zeros(8, 9);
        let mut r = 0;
        for a in 0..3 {
            for b in 0..3 {
                if a == 0 && b == 0 {
                    continue;
                }
                for i in 0..3 {
                    for j in 0..3 {
                        let fa = if a == 0 { 1.0 / 3f64.sqrt() } else { basis[(i, a - 1)] };
                        let fb = if b == 0 { 1.0 / 3f64.sqrt() } else { basis[(j, b - 1)] };
                        rows[(r, i * 3 + j)] = fa * fb;
                    }
                }
                r += 1;
            }
        }
        let u = AnalysisOperator::new(rows.clone(), Modality::Intensity).unwrap();
        let v = AnalysisOperator::new(rows, Modality::Depth).unwrap();
        OperatorPair::new(u, v, LearningParams::INTENSITY_DEPTH).unwrap()
    }

    fn scene_pair(seed: u64, size: usize, dereg: &GroupElement) -> (ModalImage, ModalImage) {
        let scene = Scene::generate(seed, size).unwrap();
        (scene.render(Layer::Intensity, None), scene.render(Layer::Depth, Some(dereg.matrix())))
    }

    #[test]
    fn level_regions_nest() {
        let r = Region::new(5, 3, 50, 41);
        assert_eq!(level_region(&r, 0), r);
        let l1 = level_region(&r, 1);
        assert_eq!(l1, Region::new(3, 2, 25, 20));
        let l2 = level_region(&r, 2);
        assert_eq!(l2, Region::new(2, 1, 12, 10));
    }

    #[test]
    fn too_small_for_pyramid() {
        let img = ModalImage::constant(40, 40, 0.5, Modality::Intensity);
        let p = RegistrationProblem::new(img.clone(), img.clone(), fixed_pair(), Group::SE2);
        assert!(matches!(p.validate(), Err(Error::TooSmall(_))));
        assert!(p.with_levels(2).validate().is_ok());
    }

    #[test]
    fn gradient_matches_group_finite_differences() {
        let (fixed, moving) = scene_pair(4, 64, &GroupElement::rigid(1.3, -0.6, 2.0));
        let pair = fixed_pair();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for group in Group::ALL {
            let problem = RegistrationProblem::new(fixed.clone(), moving.clone(), pair.clone(), group)
                .with_region(Region::inset(&fixed, 10).unwrap())
                .with_levels(1);
            let start = AlgebraElement::projected(
                &Matrix3::new(0.01, -0.02, 0.4, 0.02, -0.005, -0.3, 0.0, 0.0, 0.0),
                group,
            )
            .exp();
            let grad = registration_gradient(&problem, &start).unwrap();
            let weights = MetricWeights::balanced(Region::inset(&fixed, 10).unwrap().diagonal());
            for _ in 0..3 {
                let raw = Matrix3::from_fn(|_, c| if c == 2 { rng.gen_range(-1.0..1.0) } else { rng.gen_range(-0.02..0.02) });
                let h = AlgebraElement::projected(&raw, group);
                let t = 1e-4;
                let plus = registration_objective(&problem, &h.scale(t).exp().compose(&start)).unwrap();
                let minus = registration_objective(&problem, &h.scale(-t).exp().compose(&start)).unwrap();
                let fd = (plus - minus) / (2.0 * t);
                let analytic = weights.inner(h.matrix(), grad.matrix());
                assert!((fd - analytic).abs() < 1e-3 * (1.0 + analytic.abs()), "{group}: fd {fd} vs {analytic}");
            }
        }
    }

    #[test]
    fn aligned_pair_stays_put() {
        let (fixed, moving) = scene_pair(2, 96, &GroupElement::identity(Group::SE2));
        let problem = RegistrationProblem::new(fixed, moving, fixed_pair(), Group::SE2).with_levels(3);
        let out = register(&problem, &RegistrationProblem::default_solver()).unwrap();
        let res = Residual::between(&out.transform, &GroupElement::identity(Group::SE2));
        assert!(res.x.abs() < 0.5 && res.y.abs() < 0.5 && res.theta_deg.abs() < 0.5, "{res:?}");
    }

    #[test]
    fn recovers_translation() {
        let dereg = GroupElement::rigid(3.0, -2.0, 0.0);
        let (fixed, moving) = scene_pair(6, 96, &dereg);
        let problem = RegistrationProblem::new(fixed, moving, fixed_pair(), Group::SE2).with_levels(3);
        let out = register(&problem, &RegistrationProblem::default_solver()).unwrap();
        let res = Residual::between(&out.transform, &dereg);
        assert!(res.combined() < 1.0, "{res:?} {:?}", out.levels);
        for report in &out.levels {
            assert!(report.final_value <= report.initial_value);
        }
    }

    #[test]
    fn residual_of_exact_inverse_vanishes() {
        let d = GroupElement::rigid(-5.0, 4.0, 8.0);
        let r = Residual::between(&d.inverse(), &d);
        assert!(r.combined() < 1e-12);
        let off = Residual::between(&GroupElement::rigid(3.0, 4.0, 0.0).compose(&d.inverse()), &d);
        assert!((off.combined() - 5.0).abs() < 1e-9);
    }
}
