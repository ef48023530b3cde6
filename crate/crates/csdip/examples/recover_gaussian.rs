//! Recovers a 32 x 32 image from half as many dense Gaussian measurements.
//!
//! The target is realizable: it is produced by the generator itself from
//! randomly drawn weights, using the same latent the solver's first restart
//! will use. Fitting should therefore drive the measurement loss close to
//! zero, and the reconstruction close to the target.
//!
//! ```text
//! cargo run --release --example recover_gaussian
//! ```

use csdip::generator::{forward, init_weights, GeneratorConfig, LatentSeed};
use csdip::linops::{make_gaussian, Operator};
use csdip::metrics::mse;
use csdip::solver::{recover, restart_seeds, SolverConfig};

fn main() -> csdip::Result<()> {
    let config = GeneratorConfig::dcgan(1, 32);
    let n = 32 * 32;
    let m = n / 2;

    // The solver's restart 0 will draw this exact latent.
    let solver_seed = 7;
    let (_, latent_seed) = restart_seeds(solver_seed, 0);
    let z = LatentSeed::sample(config.latent_dim, latent_seed);
    let target_weights = init_weights(&config, 1234)?;
    let truth = forward(&target_weights, &z)?;

    let op = Operator::Gaussian(make_gaussian(m, n, 99)?);
    let y = op.apply(&truth)?;
    let y_energy = y.norm_sq();

    let cfg = SolverConfig {
        steps: 1000,
        lambda_tv: 0.0,
        seed: solver_seed,
        ..SolverConfig::default()
    };
    println!("fitting {} weights to {m} measurements of a {n}-pixel image ...", {
        target_weights.param_count()
    });
    let start = std::time::Instant::now();
    let result = recover(&y, &op, &config, &cfg, None)?;
    let elapsed = start.elapsed().as_secs_f64();

    let loss = result.measurement_loss_trace[result.chosen_step];
    let err = mse(&result.image, &truth)?;
    println!("done in {elapsed:.1} s");
    println!("  measurement loss        {loss:.3e}  ({:.3e} of ||y||^2)", loss / y_energy);
    println!("  reconstruction MSE      {err:.3e}");
    println!("  reported step           {} (window minimum)", result.chosen_step);
    for step in [0, 100, 250, 500, 999] {
        println!("  loss at step {step:>4}       {:.3e}", result.measurement_loss_trace[step]);
    }
    Ok(())
}
