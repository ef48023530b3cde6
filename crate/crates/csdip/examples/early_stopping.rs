//! Shows why early stopping matters for denoising: the fit to the clean
//! image peaks well before the fit to the noisy observation stops
//! improving.
//!
//! The observation is a smooth texture plus per-pixel Gaussian noise,
//! measured by the identity operator. The loop below tracks, at every
//! step, the measurement loss (against the noisy image — what the solver
//! can see) and the true error (against the clean image — what it cannot).
//!
//! ```text
//! cargo run --release --example early_stopping
//! ```

use csdip::generator::{init_weights, GeneratorConfig, LatentSeed};
use csdip::linops::{add_noise, IdentityOperator, NoiseSpec, Operator};
use csdip::metrics::mse;
use csdip::phantom::texture;
use csdip::solver::{objective_and_grad, restart_seeds, rmsprop_update, RmsPropState, SolverConfig};

fn main() -> csdip::Result<()> {
    let size = 32;
    let n = size * size;
    let steps = 1500;
    let config = GeneratorConfig::dcgan(1, size);
    let op = Operator::Identity(IdentityOperator::new(n));

    let mut early_minima = 0;
    let mut still_improving = 0;
    let trials = 10;
    for trial in 0..trials {
        let clean = texture(size, size, 100 + trial);
        let clean = clean?;
        let noise = NoiseSpec { sigma2: 0.01 * n as f64, seed: 200 + trial };
        let y = add_noise(&op.apply(&clean)?, &noise, n)?;

        let cfg = SolverConfig { lambda_tv: 0.0, seed: 300 + trial, ..SolverConfig::default() };
        let (weight_seed, latent_seed) = restart_seeds(cfg.seed, 0);
        let mut weights = init_weights(&config, weight_seed)?;
        let z = LatentSeed::sample(config.latent_dim, latent_seed);
        let mut state = RmsPropState::zeros(weights.param_count());

        let mut losses = Vec::with_capacity(steps);
        let mut errors = Vec::with_capacity(steps);
        for _ in 0..steps {
            let eval = objective_and_grad(&weights, &z, &y, &op, 0.0, 0.0, None)?;
            losses.push(eval.measurement_loss);
            errors.push(mse(&eval.image, &clean)?);
            rmsprop_update(&mut weights, &eval.grads, &mut state, &cfg)?;
        }

        let best_step = (0..steps)
            .min_by(|a, b| errors[*a].total_cmp(&errors[*b]))
            .expect("non-empty");
        let tail_min = losses[best_step + 1..].iter().cloned().fold(f64::INFINITY, f64::min);
        let early = best_step + 1 < steps;
        let improving = tail_min < losses[best_step];
        early_minima += early as usize;
        still_improving += (early && improving) as usize;
        if trial == 0 {
            println!("trial 0, step by step:");
            println!("{:>6} {:>16} {:>12}", "step", "measurement", "true error");
            for s in [0, 50, 100, 200, 400, 800, best_step, steps - 1] {
                let mark = if s == best_step { "  <- best true error" } else { "" };
                println!("{s:>6} {:>16.4e} {:>12.4e}{mark}", losses[s], errors[s]);
            }
            println!();
        }
        println!(
            "trial {trial}: best true error {:.3e} at step {best_step} of {steps}; \
             measurement loss kept improving: {improving}",
            errors[best_step]
        );
    }
    println!();
    println!(
        "the clean-image error bottomed out before the last step in {early_minima}/{trials} \
         trials, with the visible loss still improving afterwards in {still_improving}/{trials}"
    );
    Ok(())
}
