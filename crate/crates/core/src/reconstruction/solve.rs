use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::measurement::MeasurementOperator;
use crate::error::{mismatch, Error, Result};
use crate::global::{Boundary, GlobalAnalysis};
use crate::image::ModalImage;
use crate::manifold::{minimize, Euclidean, Method, Objective, SolverConfig};
use crate::model::{coupled_sparsity, OperatorPair};

pub const DEFAULT_LAMBDA_SCHEDULE: [f64; 4] = [1000.0, 100.0, 10.0, 1.0];
pub const DEFAULT_STAGE_ITERATIONS: usize = 50;

/// Starting point of the first continuation stage.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// I.i.d. uniform `[0, 1)` from a seeded generator.
    Random(u64),
    Given(Vec<f64>),
}

impl Init {
    fn materialize(&self, len: usize) -> Result<Vec<f64>> {
        match self {
            Init::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..len).map(|_| rng.gen::<f64>()).collect())
            }
            Init::Given(v) if v.len() == len => Ok(v.clone()),
            Init::Given(v) => Err(mismatch(len, v.len())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StageReport {
    pub lambda: f64,
    pub iterations: usize,
    /// Objective values at the stage start and after every accepted step.
    pub values: Vec<f64>,
    /// Coupled sparsity `g` at the end of the stage.
    pub coupling: f64,
}

pub fn validate_schedule(schedule: &[f64]) -> Result<()> {
    let ok = !schedule.is_empty()
        && schedule.iter().all(|l| l.is_finite() && *l > 0.0)
        && schedule.windows(2).all(|w| w[0] > w[1])
        && *schedule.last().unwrap() == 1.0;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "lambda schedule {schedule:?} must be positive, strictly decreasing and end at 1"
        )))
    }
}

/// `c = Ω_U^F s_U` over the whole guide with reflective borders.
pub fn precompute_guide_coeffs(pair: &OperatorPair, guide: &ModalImage) -> Result<Vec<f64>> {
    GlobalAnalysis::new(pair.omega_u(), guide.width(), guide.height(), Boundary::Reflective)?
        .apply(guide)
}

/// Depth-from-guide problem: `min λ g(c, Ω_V^F s) + ‖Φ s − y‖²`.
#[derive(Debug, Clone)]
pub struct ReconstructionProblem {
    pub pair: OperatorPair,
    pub guide: ModalImage,
    pub measurements: Vec<f64>,
    pub phi: MeasurementOperator,
    pub lambda_schedule: Vec<f64>,
}

impl ReconstructionProblem {
    pub fn new(
        pair: OperatorPair,
        guide: ModalImage,
        measurements: Vec<f64>,
        phi: MeasurementOperator,
    ) -> Result<Self> {
        let problem = Self { pair, guide, measurements, phi, lambda_schedule: DEFAULT_LAMBDA_SCHEDULE.to_vec() };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_schedule(mut self, schedule: Vec<f64>) -> Result<Self> {
        self.lambda_schedule = schedule;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        validate_schedule(&self.lambda_schedule)?;
        if self.phi.input_dims() != (self.guide.width(), self.guide.height()) {
            return Err(mismatch(
                format!("{:?}", self.phi.input_dims()),
                format!("{:?}", (self.guide.width(), self.guide.height())),
            ));
        }
        if self.measurements.len() != self.phi.output_len() {
            return Err(mismatch(self.phi.output_len(), self.measurements.len()));
        }
        if self.measurements.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite measurement".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image: ModalImage,
    pub stages: Vec<StageReport>,
}

/// `λ g(c, Ω^F s) + ‖Φ s − y‖²` for a fixed guide response `c`.
pub struct GuidedObjective<'a> {
    analysis: GlobalAnalysis,
    guide_coeffs: &'a [f64],
    nu: f64,
    lambda: f64,
    phi: &'a MeasurementOperator,
    measurements: &'a [f64],
}

impl<'a> GuidedObjective<'a> {
    pub fn new(problem: &'a ReconstructionProblem, guide_coeffs: &'a [f64], lambda: f64) -> Result<Self> {
        let (w, h) = problem.phi.input_dims();
        let analysis = GlobalAnalysis::new(problem.pair.omega_v(), w, h, Boundary::Reflective)?;
        if guide_coeffs.len() != analysis.output_len() {
            return Err(mismatch(analysis.output_len(), guide_coeffs.len()));
        }
        Ok(Self {
            analysis,
            guide_coeffs,
            nu: problem.pair.params().nu,
            lambda,
            phi: &problem.phi,
            measurements: &problem.measurements,
        })
    }

    pub fn coupling(&self, s: &[f64]) -> Result<f64> {
        Ok(coupled_sparsity(self.guide_coeffs, &self.analysis.apply_slice(s)?, self.nu))
    }

    fn residual(&self, s: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.phi.apply(s)?;
        r.iter_mut().zip(self.measurements).for_each(|(a, y)| *a -= y);
        Ok(r)
    }
}

impl Objective<Euclidean> for GuidedObjective<'_> {
    fn value(&self, at: &DVector<f64>) -> Result<f64> {
        let s = at.as_slice();
        let fidelity: f64 = self.residual(s)?.iter().map(|r| r * r).sum();
        Ok(self.lambda * self.coupling(s)? + fidelity)
    }

    fn value_and_gradient(&self, at: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let s = at.as_slice();
        let b = self.analysis.apply_slice(s)?;
        let (g, db) = coupled_value_and_partial(self.guide_coeffs, &b, self.nu);
        let r = self.residual(s)?;
        let fidelity: f64 = r.iter().map(|v| v * v).sum();
        let mut grad = self.analysis.apply_adjoint(&db)?;
        let back = self.phi.adjoint(&r)?;
        for (gi, bi) in grad.iter_mut().zip(&back) {
            *gi = self.lambda * *gi + 2.0 * bi;
        }
        let value = self.lambda * g + fidelity;
        if !value.is_finite() {
            return Err(Error::NonFiniteObjective(value));
        }
        Ok((value, DVector::from_vec(grad)))
    }
}

/// `g(a, b)` and its partial derivative in `b`: `2ν b / (1 + ν (a² + b²))`.
fn coupled_value_and_partial(a: &[f64], b: &[f64], nu: f64) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let partial = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let q = 1.0 + nu * (x * x + y * y);
            value += q.ln();
            2.0 * nu * y / q
        })
        .collect();
    (value, partial)
}

fn run_stage<O: Objective<Euclidean>>(
    objective: &O,
    start: Vec<f64>,
    lambda: f64,
    solver: &SolverConfig,
) -> Result<(Vec<f64>, StageReport)> {
    let dim = start.len();
    let sol = minimize(
        &Euclidean { dim },
        objective,
        DVector::from_vec(start),
        solver,
        Method::ConjugateGradient,
        &mut |_| {},
    )?;
    let report = StageReport { lambda, iterations: sol.iterations, values: sol.values, coupling: 0.0 };
    Ok((sol.point.as_slice().to_vec(), report))
}

/// Guided reconstruction with λ-continuation, each stage warm-started from the last.
pub fn reconstruct_guided(
    problem: &ReconstructionProblem,
    init: &Init,
    solver: &SolverConfig,
) -> Result<Reconstruction> {
    problem.validate()?;
    let c = precompute_guide_coeffs(&problem.pair, &problem.guide)?;
    let mut s = init.materialize(problem.phi.input_len())?;
    let mut stages = Vec::with_capacity(problem.lambda_schedule.len());
    for &lambda in &problem.lambda_schedule {
        let objective = GuidedObjective::new(problem, &c, lambda)?;
        let (next, mut report) = run_stage(&objective, s, lambda, solver)?;
        report.coupling = objective.coupling(&next)?;
        stages.push(report);
        s = next;
    }
    let (w, h) = problem.phi.input_dims();
    let image = ModalImage::new(w, h, s, problem.pair.omega_v().modality())?;
    Ok(Reconstruction { image, stages })
}

/// Both modalities unknown: `min λ g(Ω_U^F s_U, Ω_V^F s_V) + ‖Φ_U s_U − y_U‖² + ‖Φ_V s_V − y_V‖²`.
#[derive(Debug, Clone)]
pub struct JointProblem {
    pub pair: OperatorPair,
    pub width: usize,
    pub height: usize,
    pub y_u: Vec<f64>,
    pub phi_u: MeasurementOperator,
    pub y_v: Vec<f64>,
    pub phi_v: MeasurementOperator,
    pub lambda_schedule: Vec<f64>,
    /// Holds `s_U` at its initial value; requires an identity `Φ_U`.
    pub clamp_u: bool,
}

impl JointProblem {
    pub fn validate(&self) -> Result<()> {
        validate_schedule(&self.lambda_schedule)?;
        for (phi, y) in [(&self.phi_u, &self.y_u), (&self.phi_v, &self.y_v)] {
            if phi.input_dims() != (self.width, self.height) {
                return Err(mismatch(
                    format!("{:?}", (self.width, self.height)),
                    format!("{:?}", phi.input_dims()),
                ));
            }
            if y.len() != phi.output_len() {
                return Err(mismatch(phi.output_len(), y.len()));
            }
        }
        if self.clamp_u && self.phi_u.output_len() != self.phi_u.input_len() {
            return Err(Error::InvalidParameter("clamping s_U needs an identity measurement".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct JointReconstruction {
    pub u: ModalImage,
    pub v: ModalImage,
    pub stages: Vec<StageReport>,
}

pub struct JointObjective<'a> {
    problem: &'a JointProblem,
    analysis_u: GlobalAnalysis,
    analysis_v: GlobalAnalysis,
    lambda: f64,
}

impl<'a> JointObjective<'a> {
    pub fn new(problem: &'a JointProblem, lambda: f64) -> Result<Self> {
        let (w, h) = (problem.width, problem.height);
        Ok(Self {
            analysis_u: GlobalAnalysis::new(problem.pair.omega_u(), w, h, Boundary::Reflective)?,
            analysis_v: GlobalAnalysis::new(problem.pair.omega_v(), w, h, Boundary::Reflective)?,
            problem,
            lambda,
        })
    }

    fn split<'x>(&self, x: &'x [f64]) -> (&'x [f64], &'x [f64]) {
        x.split_at(self.problem.width * self.problem.height)
    }

    pub fn coupling(&self, x: &[f64]) -> Result<f64> {
        let (su, sv) = self.split(x);
        Ok(coupled_sparsity(
            &self.analysis_u.apply_slice(su)?,
            &self.analysis_v.apply_slice(sv)?,
            self.problem.pair.params().nu,
        ))
    }
}

fn fidelity(phi: &MeasurementOperator, s: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut r = phi.apply(s)?;
    r.iter_mut().zip(y).for_each(|(a, b)| *a -= b);
    Ok((r.iter().map(|v| v * v).sum(), r))
}

impl Objective<Euclidean> for JointObjective<'_> {
    fn value(&self, at: &DVector<f64>) -> Result<f64> {
        let (su, sv) = self.split(at.as_slice());
        let p = self.problem;
        let fu = fidelity(&p.phi_u, su, &p.y_u)?.0;
        let fv = fidelity(&p.phi_v, sv, &p.y_v)?.0;
        Ok(self.lambda * self.coupling(at.as_slice())? + fu + fv)
    }

    fn value_and_gradient(&self, at: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let p = self.problem;
        let nu = p.pair.params().nu;
        let (su, sv) = self.split(at.as_slice());
        let a = self.analysis_u.apply_slice(su)?;
        let b = self.analysis_v.apply_slice(sv)?;
        let (g, db) = coupled_value_and_partial(&a, &b, nu);
        let (_, da) = coupled_value_and_partial(&b, &a, nu);
        let (fu, ru) = fidelity(&p.phi_u, su, &p.y_u)?;
        let (fv, rv) = fidelity(&p.phi_v, sv, &p.y_v)?;

        let mut grad = Vec::with_capacity(at.len());
        if p.clamp_u {
            grad.extend(std::iter::repeat(0.0).take(su.len()));
        } else {
            let prior = self.analysis_u.apply_adjoint(&da)?;
            let back = p.phi_u.adjoint(&ru)?;
            grad.extend(prior.iter().zip(&back).map(|(x, y)| self.lambda * x + 2.0 * y));
        }
        let prior = self.analysis_v.apply_adjoint(&db)?;
        let back = p.phi_v.adjoint(&rv)?;
        grad.extend(prior.iter().zip(&back).map(|(x, y)| self.lambda * x + 2.0 * y));

        let value = self.lambda * g + fu + fv;
        if !value.is_finite() {
            return Err(Error::NonFiniteObjective(value));
        }
        Ok((value, DVector::from_vec(grad)))
    }
}

/// Joint reconstruction. `init_u` seeds `s_U` (a clamped `s_U` keeps it);
/// `init_v` seeds `s_V`.
pub fn reconstruct_joint(
    problem: &JointProblem,
    init_u: &Init,
    init_v: &Init,
    solver: &SolverConfig,
) -> Result<JointReconstruction> {
    problem.validate()?;
    let n = problem.width * problem.height;
    let mut x = init_u.materialize(n)?;
    x.extend(init_v.materialize(n)?);
    let mut stages = Vec::with_capacity(problem.lambda_schedule.len());
    for &lambda in &problem.lambda_schedule {
        let objective = JointObjective::new(problem, lambda)?;
        let (next, mut report) = run_stage(&objective, x, lambda, solver)?;
        report.coupling = objective.coupling(&next)?;
        stages.push(report);
        x = next;
    }
    let v = x.split_off(n);
    let (w, h) = (problem.width, problem.height);
    Ok(JointReconstruction {
        u: ModalImage::new(w, h, x, problem.pair.omega_u().modality())?,
        v: ModalImage::new(w, h, v, problem.pair.omega_v().modality())?,
        stages,
    })
}
