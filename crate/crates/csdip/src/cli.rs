//! Command-line front end.
//!
//! Six subcommands cover the full pipeline: `measure` turns an image into a
//! measurement container, `recover` fits generator weights to it, and
//! `estimate-prior` distills solved weights into statistics for the learned
//! penalty. `baseline-lasso` solves the same measurements in a DCT basis,
//! `theory-verify` runs the convergence and spectral experiments, and
//! `compare` scores reconstructions against a ground truth.
//!
//! Every command that writes files also writes a JSON run manifest beside
//! them. The `DIP_THREADS` environment variable caps worker threads;
//! unset, the thread pool sizes itself.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use crate::error::{Error, Result};
use crate::generator::GeneratorConfig;
use crate::io::{
    self, read_generator_config, read_measurements, read_prior_stats, read_weights,
    write_generator_config, write_grid_csv, write_loss_csv, write_manifest, write_measurements,
    write_prior_stats, write_trace_csv, write_weights, MeasurementFile, MeasurementHeader,
    RunManifest,
};
use crate::lasso::{default_lambda_grid, lasso_grid, lasso_recover, LassoConfig};
use crate::linops::{add_noise, make_fourier, make_gaussian, IdentityOperator, NoiseSpec, Operator, OperatorKind};
use crate::metrics::mse;
use crate::regularization::estimate_prior;
use crate::solver::{recover, ReconstructionResult, SolverConfig};
use crate::theory;

#[derive(Parser)]
#[command(
    name = "csdip",
    version,
    about = "Compressed sensing with an untrained convolutional image prior"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure an image through a sensing operator into a container file.
    Measure(MeasureArgs),
    /// Reconstruct an image from a measurement container.
    Recover(RecoverArgs),
    /// Estimate layer-wise weight statistics from solved weight containers.
    EstimatePrior(EstimatePriorArgs),
    /// Reconstruct via an l1-regularized DCT fit instead of a generator.
    BaselineLasso(BaselineLassoArgs),
    /// Run the over-parameterized descent and spectral experiments.
    TheoryVerify(TheoryVerifyArgs),
    /// Score reconstructions against a ground-truth image.
    Compare(CompareArgs),
    /// Write a standard generator architecture as a JSON file.
    InitConfig(InitConfigArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Gaussian,
    Fourier,
    Identity,
}

#[derive(Args)]
struct MeasureArgs {
    /// Input image (PNG/PGM/PPM).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = KindArg::Gaussian)]
    kind: KindArg,
    /// Number of dense Gaussian measurements (gaussian kind only).
    #[arg(long)]
    m: Option<usize>,
    /// Number of radial frequency lines (fourier kind only).
    #[arg(long)]
    lines: Option<usize>,
    /// Noise energy: each measurement gains N(0, sigma2 / m) noise.
    #[arg(long, default_value_t = 0.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Measurement container to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct RecoverArgs {
    /// Measurement container produced by `measure`.
    #[arg(long)]
    measurements: PathBuf,
    /// Generator architecture JSON; defaults to the standard architecture
    /// for the measured image size.
    #[arg(long)]
    generator_config: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// The reported iterate is the best of the final window, by
    /// measurement loss.
    #[arg(long, default_value_t = 20)]
    stop_window: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Total-variation weight.
    #[arg(long, default_value_t = 0.01)]
    lambda_tv: f64,
    /// Learned weight-penalty strength; requires --prior.
    #[arg(long, default_value_t = 0.0)]
    lambda_lr: f64,
    /// Prior statistics JSON from `estimate-prior`.
    #[arg(long)]
    prior: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output_dir: PathBuf,
    /// Sweep lambda-tv over 1e-4 .. 1e0 (decades) and keep the best run by
    /// measurement loss; writes grid.csv.
    #[arg(long)]
    grid: bool,
    /// Also write the winning weights as a container.
    #[arg(long)]
    save_weights: bool,
}

#[derive(Args)]
struct EstimatePriorArgs {
    /// Weight containers from solved instances (one or more).
    #[arg(long, num_args = 1.., required = true)]
    weights: Vec<PathBuf>,
    /// Weights sampled per layer per iteration (S).
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Moment-estimation iterations (T).
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Statistics JSON to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct BaselineLassoArgs {
    /// Measurement container; must hold dense Gaussian measurements.
    #[arg(long)]
    measurements: PathBuf,
    /// Fixed l1 weight; omit to sweep the default grid and keep the best
    /// run by measurement loss.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// Gradient descent against the geometric residual envelope.
    Theorem,
    /// Extreme Jacobian singular values and the initial residual.
    Lemmas,
    /// Hidden-unit sign flips under bounded perturbations.
    Signs,
}

#[derive(Args)]
struct TheoryVerifyArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Output dimension; defaults per mode.
    #[arg(long)]
    n: Option<usize>,
    /// Hidden width; defaults per mode.
    #[arg(long)]
    d: Option<usize>,
    /// Input dimension; defaults per mode.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Step-size fraction in (0, 1] (theorem mode).
    #[arg(long, default_value_t = 1.0)]
    eta_bar: f64,
    /// Descent steps (theorem mode).
    #[arg(long, default_value_t = 5000)]
    tau_max: usize,
    /// Perturbation spectral radius (signs mode).
    #[arg(long, default_value_t = 0.1)]
    radius: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report JSON to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Ground-truth image.
    #[arg(long)]
    truth: PathBuf,
    /// Reconstructions to score (one or more).
    #[arg(long, num_args = 1.., required = true)]
    candidates: Vec<PathBuf>,
    /// Optional JSON report path.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InitConfigArgs {
    #[arg(long, default_value_t = 1)]
    channels: usize,
    /// Output image side length.
    #[arg(long)]
    size: usize,
    #[arg(long)]
    output: PathBuf,
}

/// Applies `DIP_THREADS` to the global worker pool. Returns the cap, if any.
fn init_threads() -> Result<Option<usize>> {
    match std::env::var("DIP_THREADS") {
        Ok(raw) => {
            let t: usize = raw
                .parse()
                .ok()
                .filter(|t| *t >= 1)
                .ok_or_else(|| {
                    Error::invalid("DIP_THREADS", format!("{raw:?} is not a positive integer"))
                })?;
            // Ignore "already initialized": the cap can only be set once.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            Ok(Some(t))
        }
        Err(_) => Ok(None),
    }
}

fn manifest_path(beside: &Path) -> PathBuf {
    beside.with_extension("manifest.json")
}

/// Entry point for the binary.
pub fn run() -> Result<()> {
    let cli = Cli::parse();
    let threads = init_threads()?;
    let start = Instant::now();
    match cli.command {
        Command::Measure(a) => cmd_measure(a, threads, start),
        Command::Recover(a) => cmd_recover(a, threads, start),
        Command::EstimatePrior(a) => cmd_estimate_prior(a, threads, start),
        Command::BaselineLasso(a) => cmd_baseline_lasso(a, threads, start),
        Command::TheoryVerify(a) => cmd_theory_verify(a, threads, start),
        Command::Compare(a) => cmd_compare(a, threads, start),
        Command::InitConfig(a) => cmd_init_config(a, threads, start),
    }
}

fn cmd_measure(a: MeasureArgs, threads: Option<usize>, start: Instant) -> Result<()> {
    let img = io::load_image(&a.input)?;
    let [c, h, w] = *img.shape() else {
        return Err(Error::shape("measure", format!("{:?} input", img.shape())));
    };
    let n = c * h * w;
    let op = match a.kind {
        KindArg::Gaussian => {
            let m = a.m.ok_or_else(|| {
                Error::invalid("measure", "gaussian measurements need --m")
            })?;
            Operator::Gaussian(make_gaussian(m, n, a.seed)?)
        }
        KindArg::Fourier => {
            let lines = a.lines.ok_or_else(|| {
                Error::invalid("measure", "fourier measurements need --lines")
            })?;
            if c != 1 {
                return Err(Error::invalid(
                    "measure",
                    "fourier measurements expect a single-channel image",
                ));
            }
            Operator::Fourier(make_fourier(h, w, lines)?)
        }
        KindArg::Identity => Operator::Identity(IdentityOperator::new(n)),
    };
    let clean = op.apply(&img)?;
    let m = op.measurement_len();
    let noise = NoiseSpec { sigma2: a.sigma2, seed: a.seed ^ io::NOISE_SALT };
    let y = add_noise(&clean, &noise, m)?;
    let header = MeasurementHeader {
        kind: op.kind(),
        m,
        n,
        height: h,
        width: w,
        lines: if a.kind == KindArg::Fourier { a.lines } else { None },
        sigma2: a.sigma2,
        seed: Some(a.seed),
        dtype: "f64le".to_string(),
    };
    write_measurements(&a.output, &MeasurementFile { header: header.clone(), y })?;

    let mut manifest = RunManifest::new("measure");
    manifest.seed = Some(a.seed);
    manifest.threads = threads;
    manifest.measurement = Some(header);
    manifest.outputs = vec![a.output.display().to_string()];
    manifest.details = json!({
        "input": a.input.display().to_string(),
        "noise_seed": noise.seed,
    });
    manifest.elapsed_seconds = start.elapsed().as_secs_f64();
    write_manifest(&manifest_path(&a.output), &manifest)?;
    println!("wrote {m} measurements ({:?}) to {}", op.kind(), a.output.display());
    Ok(())
}

fn generator_for(a: &RecoverArgs, header: &MeasurementHeader) -> Result<GeneratorConfig> {
    match &a.generator_config {
        Some(path) => read_generator_config(path),
        None => {
            let c = header.channels()?;
            if header.height != header.width {
                return Err(Error::invalid(
                    "recover",
                    format!(
                        "no default architecture for {} x {} images; pass --generator-config",
                        header.height, header.width
                    ),
                ));
            }
            let config = GeneratorConfig::dcgan(c, header.height);
            config.validate()?;
            Ok(config)
        }
    }
}

fn cmd_recover(a: RecoverArgs, threads: Option<usize>, start: Instant) -> Result<()> {
    let mf = read_measurements(&a.measurements)?;
    let op = io::operator_from_header(&mf.header)?;
    let gen_config = generator_for(&a, &mf.header)?;
    let stats = match &a.prior {
        Some(path) => Some(read_prior_stats(path)?),
        None => None,
    };
    let base = SolverConfig {
        lr: a.lr,
        steps: a.steps,
        stop_window: a.stop_window,
        restarts: a.restarts,
        lambda_tv: a.lambda_tv,
        lambda_lr: a.lambda_lr,
        seed: a.seed,
        ..SolverConfig::default()
    };
    std::fs::create_dir_all(&a.output_dir)?;

    let mut grid_rows: Vec<(f64, f64, usize)> = Vec::new();
    let (cfg, result): (SolverConfig, ReconstructionResult) = if a.grid {
        let lambdas: Vec<f64> = (0..5).map(|i| 10f64.powi(i - 4)).collect();
        let mut best: Option<(SolverConfig, ReconstructionResult)> = None;
        for lambda in lambdas {
            let cfg = SolverConfig { lambda_tv: lambda, ..base.clone() };
            let res = recover(&mf.y, &op, &gen_config, &cfg, stats.as_ref())?;
            let loss = res.measurement_loss_trace[res.chosen_step];
            grid_rows.push((lambda, loss, res.chosen_step));
            let better = best.as_ref().map_or(true, |(_, b)| {
                loss.total_cmp(&b.measurement_loss_trace[b.chosen_step]).is_lt()
            });
            if better {
                best = Some((cfg, res));
            }
        }
        best.expect("grid is non-empty")
    } else {
        let res = recover(&mf.y, &op, &gen_config, &base, stats.as_ref())?;
        (base, res)
    };

    let image_path = a.output_dir.join("recovered.png");
    io::save_image(&image_path, &result.image)?;
    let loss_path = a.output_dir.join("loss.csv");
    write_loss_csv(&loss_path, &result.measurement_loss_trace, &result.objective_trace)?;
    let mut outputs = vec![image_path.display().to_string(), loss_path.display().to_string()];
    if a.grid {
        let grid_path = a.output_dir.join("grid.csv");
        write_grid_csv(&grid_path, &grid_rows)?;
        outputs.push(grid_path.display().to_string());
    }
    if a.save_weights {
        let weights_path = a.output_dir.join("weights.bin");
        write_weights(&weights_path, &result.weights)?;
        outputs.push(weights_path.display().to_string());
    }

    let loss = result.measurement_loss_trace[result.chosen_step];
    let mut manifest = RunManifest::new("recover");
    manifest.seed = Some(a.seed);
    manifest.threads = threads;
    manifest.generator = Some(gen_config);
    manifest.solver = Some(cfg.clone());
    manifest.measurement = Some(mf.header);
    manifest.outputs = outputs;
    manifest.details = json!({
        "measurement_loss": loss,
        "final_objective": result.final_objective,
        "chosen_step": result.chosen_step,
        "restart_index": result.restart_index,
        "failed_restarts": result.diagnostics.len(),
        "prior": a.prior.as_ref().map(|p| p.display().to_string()),
        "grid": grid_rows
            .iter()
            .map(|(l, loss, step)| json!({ "lambda_tv": l, "measurement_loss": loss, "chosen_step": step }))
            .collect::<Vec<_>>(),
    });
    manifest.elapsed_seconds = start.elapsed().as_secs_f64();
    write_manifest(&a.output_dir.join("manifest.json"), &manifest)?;
    println!(
        "recovered {} with measurement loss {loss:.6e} (step {} of restart {}, lambda_tv {})",
        image_path.display(),
        result.chosen_step,
        result.restart_index,
        cfg.lambda_tv
    );
    Ok(())
}

fn cmd_estimate_prior(a: EstimatePriorArgs, threads: Option<usize>, start: Instant) -> Result<()> {
    let mut sets = Vec::with_capacity(a.weights.len());
    for path in &a.weights {
        sets.push(read_weights(path)?);
    }
    let stats = estimate_prior(&sets, a.samples, a.iterations, a.seed)?;
    write_prior_stats(&a.output, &stats)?;

    let mut manifest = RunManifest::new("estimate-prior");
    manifest.seed = Some(a.seed);
    manifest.threads = threads;
    manifest.outputs = vec![a.output.display().to_string()];
    manifest.details = json!({
        "inputs": a.weights.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "layers": stats.layers,
        "samples": a.samples,
        "iterations": a.iterations,
    });
    manifest.elapsed_seconds = start.elapsed().as_secs_f64();
    write_manifest(&manifest_path(&a.output), &manifest)?;
    println!(
        "estimated {}-layer statistics from {} weight sets into {}",
        stats.layers,
        sets.len(),
        a.output.display()
    );
    Ok(())
}

fn cmd_baseline_lasso(a: BaselineLassoArgs, threads: Option<usize>, start: Instant) -> Result<()> {
    let mf = read_measurements(&a.measurements)?;
    if mf.header.kind != OperatorKind::Gaussian {
        return Err(Error::invalid(
            "baseline-lasso",
            format!("{:?} measurements; the baseline needs the dense gaussian kind", mf.header.kind),
        ));
    }
    if mf.header.channels()? != 1 {
        return Err(Error::invalid(
            "baseline-lasso",
            "the DCT baseline works on single-channel images",
        ));
    }
    let op = match io::operator_from_header(&mf.header)? {
        Operator::Gaussian(g) => g,
        _ => unreachable!("kind checked above"),
    };
    let (h, w) = (mf.header.height, mf.header.width);
    let base = LassoConfig { max_iters: a.max_iters, ..LassoConfig::default() };
    let (result, lambda) = match a.lambda {
        Some(lambda) => {
            let cfg = LassoConfig { lambda, ..base };
            (lasso_recover(&mf.y, &op, h, w, &cfg)?, lambda)
        }
        None => lasso_grid(&mf.y, &op, h, w, &default_lambda_grid(), &base)?,
    };
    std::fs::create_dir_all(&a.output_dir)?;
    let image_path = a.output_dir.join("recovered.png");
    io::save_image(&image_path, &result.image.clone().reshape(&[1, h, w])?)?;
    let trace_path = a.output_dir.join("objective.csv");
    write_trace_csv(&trace_path, "objective", &result.objective_trace)?;

    let mut manifest = RunManifest::new("baseline-lasso");
    manifest.threads = threads;
    manifest.measurement = Some(mf.header);
    manifest.outputs =
        vec![image_path.display().to_string(), trace_path.display().to_string()];
    manifest.details = json!({
        "lambda": lambda,
        "swept_grid": a.lambda.is_none(),
        "measurement_loss": result.measurement_loss,
        "iterations": result.iterations,
        "converged": result.converged,
    });
    manifest.elapsed_seconds = start.elapsed().as_secs_f64();
    write_manifest(&a.output_dir.join("manifest.json"), &manifest)?;
    println!(
        "lasso baseline wrote {} (lambda {lambda}, measurement loss {:.6e})",
        image_path.display(),
        result.measurement_loss
    );
    Ok(())
}

fn cmd_theory_verify(a: TheoryVerifyArgs, threads: Option<usize>, start: Instant) -> Result<()> {
    if a.trials == 0 {
        return Err(Error::invalid("theory-verify", "trials must be >= 1"));
    }
    let (report, summary) = match a.mode {
        ModeArg::Theorem => {
            let n = a.n.unwrap_or(10);
            let d = a.d.unwrap_or(2000);
            let k = a.k.unwrap_or(16);
            let traces: Vec<crate::error::Result<theory::DescentTrace>> = (0..a.trials)
                .into_par_iter()
                .map(|t| {
                    let (net, y) = theory::make_instance(n, d, k, a.seed.wrapping_add(t as u64))?;
                    theory::gd_denoise(&net, &y, a.eta_bar, a.tau_max)
                })
                .collect();
            let mut holds = 0usize;
            let mut final_ratios = Vec::with_capacity(a.trials);
            for t in traces {
                let t = t?;
                holds += t.bound_holds() as usize;
                let last_r = *t.residual_norms.last().expect("at least one step");
                let last_b = *t.bound_curve.last().expect("at least one step");
                final_ratios.push(if t.diverged_at.is_some() {
                    f64::INFINITY
                } else {
                    last_r / last_b
                });
            }
            let report = json!({
                "mode": "theorem",
                "n": n, "d": d, "k": k,
                "eta_bar": a.eta_bar,
                "tau_max": a.tau_max,
                "trials": a.trials,
                "holds": holds,
                "final_residual_over_bound": final_ratios,
            });
            (report, format!("descent stayed under the envelope in {holds}/{} trials", a.trials))
        }
        ModeArg::Lemmas => {
            let n = a.n.unwrap_or(2);
            let d = a.d.unwrap_or(2 * theory::SIGMA_MIN_WIDTH_FACTOR);
            let k = a.k.unwrap_or(10);
            let rep = theory::verify_lemmas(n, d, k, a.trials, a.seed)?;
            let summary = format!(
                "sigma_min {}/{t}, spectral norm {}/{t}, initial residual {}/{t}",
                rep.sigma_min_holds,
                rep.spectral_norm_holds,
                rep.init_residual_holds,
                t = rep.trials
            );
            let mut report = serde_json::to_value(&rep)?;
            report["mode"] = json!("lemmas");
            report["n"] = json!(n);
            report["d"] = json!(d);
            report["k"] = json!(k);
            (report, summary)
        }
        ModeArg::Signs => {
            let d = a.d.unwrap_or(4000);
            let k = a.k.unwrap_or(10);
            let rep = theory::verify_sign_changes(d, k, a.radius, a.trials, a.seed)?;
            let summary = format!(
                "sign flips stayed under the ceiling {} in {}/{} trials (max {})",
                rep.bound, rep.holds, rep.trials, rep.max_count
            );
            let mut report = serde_json::to_value(&rep)?;
            report["mode"] = json!("signs");
            report["d"] = json!(d);
            report["k"] = json!(k);
            report["radius"] = json!(a.radius);
            (report, summary)
        }
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&a.output, text)?;

    let mut manifest = RunManifest::new("theory-verify");
    manifest.seed = Some(a.seed);
    manifest.threads = threads;
    manifest.outputs = vec![a.output.display().to_string()];
    manifest.details = report;
    manifest.elapsed_seconds = start.elapsed().as_secs_f64();
    write_manifest(&manifest_path(&a.output), &manifest)?;
    println!("{summary}; report at {}", a.output.display());
    Ok(())
}

fn cmd_compare(a: CompareArgs, threads: Option<usize>, start: Instant) -> Result<()> {
    let truth = io::load_image(&a.truth)?;
    let mut rows = Vec::with_capacity(a.candidates.len());
    for path in &a.candidates {
        let img = io::load_image(path)?;
        let err = mse(&truth, &img)?;
        println!("{} mse={err:.6e}", path.display());
        rows.push(json!({ "path": path.display().to_string(), "mse": err }));
    }
    if let Some(out) = &a.output {
        let report = json!({
            "truth": a.truth.display().to_string(),
            "candidates": rows,
        });
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        std::fs::write(out, text)?;
        let mut manifest = RunManifest::new("compare");
        manifest.threads = threads;
        manifest.outputs = vec![out.display().to_string()];
        manifest.details = report;
        manifest.elapsed_seconds = start.elapsed().as_secs_f64();
        write_manifest(&manifest_path(out), &manifest)?;
    }
    Ok(())
}

fn cmd_init_config(a: InitConfigArgs, threads: Option<usize>, start: Instant) -> Result<()> {
    if a.size == 0 || a.channels == 0 {
        return Err(Error::invalid("init-config", "size and channels must be >= 1"));
    }
    let config = GeneratorConfig::dcgan(a.channels, a.size);
    config.validate()?;
    write_generator_config(&a.output, &config)?;
    let mut manifest = RunManifest::new("init-config");
    manifest.threads = threads;
    manifest.generator = Some(config);
    manifest.outputs = vec![a.output.display().to_string()];
    manifest.elapsed_seconds = start.elapsed().as_secs_f64();
    write_manifest(&manifest_path(&a.output), &manifest)?;
    println!("wrote generator architecture to {}", a.output.display());
    Ok(())
}
