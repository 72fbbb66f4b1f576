use clap::Args;
use cosparse::global::{Boundary, GlobalAnalysis};
use cosparse::io::{decode_image, decode_operator_pair, encode_image, encode_operator_pair, ImageFormat};
use cosparse::manifold::{geodesic, project_to_manifold, tangent_project, ManifoldPoint};
use cosparse::model::{LearningObjective, LearningParams, OperatorPair};
use cosparse::reconstruction::MeasurementOperator;
use cosparse::registration::{AlgebraElement, Group, GroupElement};
use cosparse::synth::{generate_scene, synthetic_training_set, ModalityPair};
use cosparse::{Modality, Result};
use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{CliError, Common};

#[derive(Args, Debug)]
pub struct SelftestArgs {
    #[command(flatten)]
    common: Common,
}

struct Check {
    name: &'static str,
    measured: f64,
    bound: f64,
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn manifold_checks(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let point = project_to_manifold(&random_matrix(rng, 9, 32))?;
    let (norm_err, mean_err) = point.constraint_violation();
    let ambient = random_matrix(rng, 9, 32);
    let once = tangent_project(&point, &ambient);
    let twice = tangent_project(&point, once.columns());
    let moved = geodesic(&point, &once, 0.7);
    let (moved_norm, moved_mean) = moved.constraint_violation();
    Ok(vec![
        Check { name: "manifold projection", measured: norm_err.max(mean_err), bound: 1e-12 },
        Check { name: "tangent projection idempotent", measured: (once.columns() - twice.columns()).amax(), bound: 1e-12 },
        Check { name: "geodesic stays on manifold", measured: moved_norm.max(moved_mean), bound: 1e-12 },
    ])
}

fn learning_gradient_check(rng: &mut ChaCha8Rng) -> Result<Check> {
    let k = 12;
    let data = synthetic_training_set(0..2, 48, ModalityPair::IntensityDepth, 3, 40)?;
    let params = LearningParams { nu: 400.0, kappa_u: 5.0, kappa_v: 22.0, mu_u: 1.0, mu_v: 1.0 };
    let objective = LearningObjective::new(&data, params, k)?;
    let point = project_to_manifold(&random_matrix(rng, 9, 2 * k))?;
    let eval = objective.evaluate(&point, true)?;
    let mut grad = DMatrix::zeros(9, 2 * k);
    grad.columns_mut(0, k).copy_from(&eval.grad_u.transpose());
    grad.columns_mut(k, k).copy_from(&eval.grad_v.transpose());
    let h = tangent_project(&point, &random_matrix(rng, 9, 2 * k));
    let analytic = grad.dot(h.columns());
    let t = 1e-5;
    let value = |p: &ManifoldPoint| objective.evaluate(p, false).map(|v| v.value);
    let fd = (value(&geodesic(&point, &h, t))? - value(&geodesic(&point, &h, -t))?) / (2.0 * t);
    Ok(Check { name: "learning gradient vs differences", measured: relative(analytic, fd), bound: 1e-4 })
}

fn adjoint_checks(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let rows = random_matrix(rng, 10, 9);
    for (name, boundary) in [("analysis adjoint (reflective)", Boundary::Reflective), ("analysis adjoint (valid)", Boundary::Valid)] {
        let op = GlobalAnalysis::from_rows(&rows, 3, 13, 11, boundary)?;
        let x = random_vec(rng, op.input_len());
        let y = random_vec(rng, op.output_len());
        let lhs = dot(&op.apply_slice(&x)?, &y);
        let rhs = dot(&x, &op.apply_adjoint(&y)?);
        out.push(Check { name, measured: relative(lhs, rhs), bound: 1e-12 });
    }
    let phi = MeasurementOperator::blur_downsample(14, 12, 2)?;
    let x = random_vec(rng, phi.input_len());
    let y = random_vec(rng, phi.output_len());
    let lhs = dot(&phi.apply(&x)?, &y);
    let rhs = dot(&x, &phi.adjoint(&y)?);
    out.push(Check { name: "measurement adjoint", measured: relative(lhs, rhs), bound: 1e-12 });
    Ok(out)
}

fn group_checks(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for group in Group::ALL {
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let raw = Matrix3::from_fn(|_, _| rng.gen_range(-0.5..0.5));
            let h = AlgebraElement::projected(&raw, group);
            let again = AlgebraElement::projected(h.matrix(), group);
            worst = worst.max((h.matrix() - again.matrix()).amax());
            let e = h.exp();
            GroupElement::new(*e.matrix(), group)?;
            let back = e.compose(&h.scale(-1.0).exp());
            worst = worst.max((back.matrix() - Matrix3::identity()).amax());
        }
        let name = match group {
            Group::SO2 => "exponential and projection SO2",
            Group::SE2 => "exponential and projection SE2",
            Group::SA2 => "exponential and projection SA2",
            Group::A2 => "exponential and projection A2",
        };
        out.push(Check { name, measured: worst, bound: 1e-10 });
    }
    Ok(out)
}

fn io_checks(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let (u, _) = generate_scene(7, 40, ModalityPair::IntensityDepth)?;
    let back = decode_image(&encode_image(&u, ImageFormat::Floatmap), Modality::Intensity)?;
    let image_err = u.values().iter().zip(back.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let point = project_to_manifold(&random_matrix(rng, 9, 24))?;
    let params = LearningParams { nu: 400.0, kappa_u: 5.0, kappa_v: 22.0, mu_u: 1.0, mu_v: 1.0 };
    let pair = OperatorPair::from_point(&point, 12, (Modality::Intensity, Modality::Depth), params)?;
    let decoded = decode_operator_pair(&encode_operator_pair(&pair))?;
    let op_err = (decoded.to_point().columns() - point.columns()).amax();
    Ok(vec![
        Check { name: "float image round trip", measured: image_err, bound: 1e-6 },
        Check { name: "operator pair round trip", measured: op_err, bound: 0.0 },
    ])
}

pub fn run(args: SelftestArgs) -> std::result::Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.common.seed);
    let mut checks = manifold_checks(&mut rng)?;
    checks.push(learning_gradient_check(&mut rng)?);
    checks.extend(adjoint_checks(&mut rng)?);
    checks.extend(group_checks(&mut rng)?);
    checks.extend(io_checks(&mut rng)?);
    let mut failed = 0;
    for c in &checks {
        let ok = c.measured <= c.bound;
        if !ok {
            failed += 1;
        }
        println!("{:<4} {:<36} {:.3e} (bound {:.0e})", if ok { "PASS" } else { "FAIL" }, c.name, c.measured, c.bound);
    }
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} of {} checks failed", checks.len())));
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}
