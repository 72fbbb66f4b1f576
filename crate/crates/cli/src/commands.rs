use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use cosparse::io::{format_transform, parse_transform, read_image, read_operator_pair, write_image, write_operator_pair};
use cosparse::manifold::SolverConfig;
use cosparse::model::{
    extract_training_patches, learn_pair_with, LearningParams, PatchDataset, DEFAULT_STD_THRESHOLD,
};
use cosparse::reconstruction::{
    evaluate_metrics, nearest_neighbor_upsample, reconstruct_guided, to_8bit_scale, Init, MeasurementOperator,
    ReconstructionProblem,
};
use cosparse::registration::{register as run_registration, warp, GroupElement, Region, RegistrationProblem, Residual};
use cosparse::synth::{synthetic_training_set, Layer, ModalityPair, Scene};
use cosparse::{Error, ModalImage};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::{CliError, Common};

type CliResult = std::result::Result<(), CliError>;

/// `x,y,θ` with the angle in degrees.
fn parse_triple(text: &str) -> std::result::Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected 'x,y,theta', got '{text}'"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| format!("invalid number '{p}'"))?;
    }
    Ok((out[0], out[1], out[2]))
}

fn parse_schedule(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',').map(|p| p.trim().parse().map_err(|_| format!("invalid number '{p}'"))).collect()
}

fn load_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    match &common.config {
        Some(path) => {
            if !path.exists() {
                return Err(Error::InvalidParameter(format!("config {} does not exist", path.display())).into());
            }
            Ok(ExperimentConfig::load(path)?)
        }
        None => Ok(ExperimentConfig::default()),
    }
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{} does not exist", path.display())).into())
    }
}

fn dereg_transform(d: (f64, f64, f64)) -> GroupElement {
    GroupElement::rigid(d.0, d.1, d.2)
}

/// Aligned columns on stdout.
fn print_table(headers: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        println!("{}", padded.join("  "));
    };
    line(headers.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
}

fn write_csv(path: &Path, headers: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut text = headers.join(",");
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(Error::from)?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct LearnArgs {
    #[command(flatten)]
    common: Common,
    /// A training pair `U V`; repeat for more pairs. Without any, synthetic scenes are used.
    #[arg(long, num_args = 2, value_names = ["U", "V"], action = clap::ArgAction::Append)]
    images: Vec<PathBuf>,
    /// Modality pair of the training data.
    #[arg(long, default_value = "intensity-depth")]
    pair: ModalityPair,
    /// Use published learning weights instead of the configured ones.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    output: PathBuf,
}

pub fn learn(args: LearnArgs) -> CliResult {
    let mut config = load_config(&args.common)?;
    if let Some(name) = &args.preset {
        let params = LearningParams::preset(name)
            .ok_or_else(|| CliError::Usage(format!("unknown preset '{name}'")))?;
        config.learn.set_params(params);
    }
    let l = &config.learn;
    let data = if args.images.is_empty() {
        let size = config.synth.size;
        let seeds = args.common.seed..args.common.seed + l.scenes as u64;
        synthetic_training_set(seeds, size, args.pair, l.patch_side, l.patches_per_image)?
    } else {
        let (mu, mv) = args.pair.modalities();
        let mut parts = Vec::new();
        for (i, pair) in args.images.chunks(2).enumerate() {
            require_file(&pair[0])?;
            require_file(&pair[1])?;
            let u = read_image(&pair[0], mu)?;
            let v = read_image(&pair[1], mv)?;
            let seed = args.common.seed + i as u64;
            parts.push(extract_training_patches(&u, &v, l.patch_side, l.patches_per_image, seed, DEFAULT_STD_THRESHOLD)?);
        }
        PatchDataset::merge(&parts)?
    };
    let solver = SolverConfig::default().with_iterations(l.iterations);
    let (pair, report) = learn_pair_with(&data, l.rows, &l.params(), &solver, args.common.seed, &mut |_| {})?;
    write_operator_pair(&args.output, &pair)?;
    println!("patch pairs      {}", data.len());
    println!("iterations       {}", report.iterations);
    println!("objective        {:.6} -> {:.6}", report.initial_value, report.final_value);
    println!("gradient norm    {:.3e}", report.gradient_norm);
    println!("stop             {:?}", report.stop);
    println!("wrote            {}", args.output.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    operators: PathBuf,
    /// High-resolution image of the first modality.
    #[arg(long)]
    guide: PathBuf,
    /// High-resolution ground truth; measurements are simulated from it.
    #[arg(long, conflicts_with = "low", required_unless_present = "low")]
    truth: Option<PathBuf>,
    /// Measured low-resolution image.
    #[arg(long)]
    low: Option<PathBuf>,
    #[arg(long)]
    factor: Option<usize>,
    /// Decreasing weights ending at 1, e.g. `100,10,1`.
    #[arg(long, value_parser = parse_schedule)]
    lambda_schedule: Option<Vec<f64>>,
    /// Iterations per schedule stage.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    output: PathBuf,
    /// Also write the nearest-neighbour upsampling.
    #[arg(long)]
    nn_output: Option<PathBuf>,
}

pub fn reconstruct(args: ReconstructArgs) -> CliResult {
    let config = load_config(&args.common)?;
    let r = &config.reconstruct;
    let factor = args.factor.unwrap_or(r.factor);
    let schedule = args.lambda_schedule.clone().unwrap_or_else(|| r.lambda_schedule.clone());
    let iterations = args.iterations.unwrap_or(r.stage_iterations);
    require_file(&args.operators)?;
    require_file(&args.guide)?;
    let pair = read_operator_pair(&args.operators)?;
    let guide = read_image(&args.guide, pair.omega_u().modality())?;
    let (w, h) = (guide.width(), guide.height());
    let phi = MeasurementOperator::blur_downsample(w, h, factor)?;
    let (ow, oh) = phi.output_dims();
    let modality_v = pair.omega_v().modality();
    let truth = match &args.truth {
        Some(path) => {
            require_file(path)?;
            let t = read_image(path, modality_v)?;
            t.same_shape(&guide)?;
            Some(t)
        }
        None => None,
    };
    let low = match (&truth, &args.low) {
        (Some(t), _) => ModalImage::new(ow, oh, phi.apply(t.values())?, modality_v)?,
        (None, Some(path)) => {
            require_file(path)?;
            let low = read_image(path, modality_v)?;
            if (low.width(), low.height()) != (ow, oh) {
                return Err(Error::InvalidParameter(format!(
                    "low-resolution image is {}x{}, expected {ow}x{oh}",
                    low.width(),
                    low.height()
                ))
                .into());
            }
            low
        }
        (None, None) => return Err(CliError::Usage("either --truth or --low is required".into())),
    };
    let s = r.value_scale;
    let scaled_guide = ModalImage::new(w, h, guide.values().iter().map(|v| v * s).collect(), guide.modality())?;
    let y: Vec<f64> = low.values().iter().map(|v| v * s).collect();
    let problem = ReconstructionProblem::new(pair, scaled_guide, y, phi)?.with_schedule(schedule)?;
    let solver = SolverConfig::default().with_iterations(iterations);
    let result = reconstruct_guided(&problem, &Init::Random(args.common.seed), &solver)?;
    let image = ModalImage::new(w, h, result.image.values().iter().map(|v| v / s).collect(), modality_v)?;
    write_image(&args.output, &image)?;
    let nn = nearest_neighbor_upsample(&low, factor, w, h)?;
    if let Some(path) = &args.nn_output {
        write_image(path, &nn)?;
    }
    for stage in &result.stages {
        println!("lambda {:>8}  iterations {:>4}  coupling {:.4}", stage.lambda, stage.iterations, stage.coupling);
    }
    if let Some(t) = &truth {
        let truth8 = to_8bit_scale(t);
        let mut rows = Vec::new();
        for (name, img) in [("guided", &image), ("nearest", &nn)] {
            let m = evaluate_metrics(&to_8bit_scale(img), &truth8, 1.0)?;
            rows.push(vec![name.to_string(), format!("{:.4}", m.rmse), format!("{:.2}", m.bad_pixel_pct)]);
        }
        print_table(&["method", "rmse", "bad%"], &rows);
    }
    println!("wrote {}", args.output.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct RegisterArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    operators: PathBuf,
    #[arg(long)]
    fixed: PathBuf,
    #[arg(long)]
    moving: PathBuf,
    /// One of SO2, SE2, SA2, A2.
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    levels: Option<usize>,
    /// Known deregistration `x,y,theta` applied to the moving image before registering.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    dereg: Option<(f64, f64, f64)>,
    /// Register every cell of x in [-10, 10] px and theta in [-10, 10] degrees, step 2.
    #[arg(long, conflicts_with = "dereg")]
    sweep: bool,
    /// Worker threads for the sweep.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Transform record, or delimited rows for a sweep.
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn register(args: RegisterArgs) -> CliResult {
    let config = load_config(&args.common)?;
    let g = &config.register;
    let group = match &args.group {
        Some(name) => name.parse()?,
        None => g.group()?,
    };
    let levels = args.levels.unwrap_or(g.levels);
    for path in [&args.operators, &args.fixed, &args.moving] {
        require_file(path)?;
    }
    let pair = read_operator_pair(&args.operators)?;
    let fixed = read_image(&args.fixed, pair.omega_u().modality())?;
    let source = read_image(&args.moving, pair.omega_v().modality())?;
    let region = Region::inset(&fixed, g.margin)?;
    let solver = SolverConfig {
        max_iterations: g.max_iterations,
        gradient_norm_tolerance: g.gradient_tolerance,
        ..RegistrationProblem::default_solver()
    };
    let solve = |d: Option<GroupElement>| -> cosparse::Result<(GroupElement, Option<Residual>)> {
        let moving = match &d {
            Some(d) => warp(&source, d, &Region::full(&source)).image,
            None => source.clone(),
        };
        let problem = RegistrationProblem::new(fixed.clone(), moving, pair.clone(), group)
            .with_levels(levels)
            .with_region(region);
        let out = run_registration(&problem, &solver)?;
        let residual = d.map(|d| Residual::between(&out.transform, &d));
        Ok((out.transform, residual))
    };

    if args.sweep {
        if args.jobs == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        let cells: Vec<(f64, f64)> = (-5..=5)
            .flat_map(|t| (-5..=5).map(move |x| (2.0 * x as f64, 2.0 * t as f64)))
            .collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .map_err(|e| CliError::Failed(e.to_string()))?;
        let results: Vec<_> = pool.install(|| {
            cells.par_iter().map(|&(x, t)| solve(Some(dereg_transform((x, 0.0, t))))).collect()
        });
        let mut rows = Vec::new();
        let mut good = 0;
        for (&(x, t), result) in cells.iter().zip(results) {
            let (_, res) = result?;
            let res = res.expect("sweep cells carry a deregistration");
            if res.combined() < 1.0 {
                good += 1;
            }
            rows.push(vec![
                format!("{x}"),
                format!("{t}"),
                format!("{:.3}", res.x),
                format!("{:.3}", res.y),
                format!("{:.3}", res.theta_deg),
                format!("{:.3}", res.combined()),
            ]);
        }
        let headers = ["x", "theta", "eps_x", "eps_y", "eps_theta", "eps"];
        print_table(&headers, &rows);
        println!("cells with eps < 1: {good}/{}", cells.len());
        if let Some(path) = &args.output {
            write_csv(path, &headers, &rows)?;
        }
        return Ok(());
    }

    let (tau, residual) = solve(args.dereg.map(dereg_transform))?;
    let (tx, ty) = tau.translation();
    print!("{}", format_transform(&tau));
    println!("translation {tx:.3} {ty:.3}  rotation {:.3} deg", tau.angle_deg());
    if let Some(r) = residual {
        print_table(
            &["eps_x", "eps_y", "eps_theta", "eps"],
            &[vec![format!("{:.3}", r.x), format!("{:.3}", r.y), format!("{:.3}", r.theta_deg), format!("{:.3}", r.combined())]],
        );
    }
    if let Some(path) = &args.output {
        fs::write(path, format_transform(&tau)).map_err(Error::from)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    pair: Option<ModalityPair>,
    /// Render the second layer deregistered by `x,y,theta`.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    dereg: Option<(f64, f64, f64)>,
    /// Output directory; receives `<modality>.pfm` for both layers.
    #[arg(long)]
    output: PathBuf,
}

pub fn synth(args: SynthArgs) -> CliResult {
    let config = load_config(&args.common)?;
    let size = args.size.unwrap_or(config.synth.size);
    let pair = match args.pair {
        Some(p) => p,
        None => config.synth.pair()?,
    };
    let scene = Scene::generate(args.common.seed, size)?;
    let (mu, mv) = pair.modalities();
    let u = scene.render(Layer::of(mu), None);
    let d = args.dereg.map(dereg_transform);
    let v = scene.render(Layer::of(mv), d.as_ref().map(|d| d.matrix()));
    fs::create_dir_all(&args.output).map_err(Error::from)?;
    for (m, img) in [(mu, &u), (mv, &v)] {
        let path = args.output.join(format!("{m}.pfm"));
        write_image(&path, img)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, requires = "truth")]
    result: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Bad-pixel threshold on the 8-bit scale.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Recovered transform record.
    #[arg(long, requires = "dereg")]
    transform: Option<PathBuf>,
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    dereg: Option<(f64, f64, f64)>,
    /// Delimited rows of the reported metrics.
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn evaluate(args: EvaluateArgs) -> CliResult {
    if args.result.is_none() && args.transform.is_none() {
        return Err(CliError::Usage("nothing to evaluate: pass --result/--truth or --transform/--dereg".into()));
    }
    let mut rows = Vec::new();
    if let (Some(result), Some(truth)) = (&args.result, &args.truth) {
        require_file(result)?;
        require_file(truth)?;
        let r = read_image(result, cosparse::Modality::Unknown)?;
        let t = read_image(truth, cosparse::Modality::Unknown)?;
        let m = evaluate_metrics(&to_8bit_scale(&r), &to_8bit_scale(&t), args.delta)?;
        rows.push(vec!["rmse".to_string(), format!("{:.4}", m.rmse)]);
        rows.push(vec![format!("bad_pixel_pct(delta={})", args.delta), format!("{:.3}", m.bad_pixel_pct)]);
    }
    if let (Some(path), Some(d)) = (&args.transform, args.dereg) {
        require_file(path)?;
        let text = fs::read_to_string(path).map_err(Error::from)?;
        let tau = parse_transform(&text)?;
        let r = Residual::between(&tau, &dereg_transform(d));
        rows.push(vec!["eps_x".to_string(), format!("{:.4}", r.x)]);
        rows.push(vec!["eps_y".to_string(), format!("{:.4}", r.y)]);
        rows.push(vec!["eps_theta".to_string(), format!("{:.4}", r.theta_deg)]);
        rows.push(vec!["eps".to_string(), format!("{:.4}", r.combined())]);
    }
    print_table(&["metric", "value"], &rows);
    if let Some(path) = &args.output {
        write_csv(path, &["metric", "value"], &rows)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ConfigArgs {
    #[command(flatten)]
    common: Common,
}

pub fn show_config(args: ConfigArgs) -> CliResult {
    print!("{}", load_config(&args.common)?.to_toml());
    Ok(())
}
