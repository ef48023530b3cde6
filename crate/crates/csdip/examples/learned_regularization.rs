//! Learns layer-wise weight statistics from solved instances, then uses
//! them as a penalty on unseen, heavily noised measurements.
//!
//! Stage one solves a handful of clean compressed-sensing instances whose
//! targets the generator can represent exactly, and distills the winning
//! weights into per-layer Gaussian statistics. Stage two measures fresh
//! targets through a quarter-rate operator under heavy noise and
//! reconstructs them twice: unregularized, and pulled toward the learned
//! statistics. The learned penalty should not hurt, and typically helps.
//!
//! ```text
//! cargo run --release --example learned_regularization
//! ```

use csdip::generator::{forward, init_weights, GeneratorConfig, LatentSeed};
use csdip::linops::{add_noise, make_gaussian, NoiseSpec, Operator};
use csdip::metrics::mse;
use csdip::regularization::estimate_prior;
use csdip::solver::{recover, restart_seeds, SolverConfig};

fn main() -> csdip::Result<()> {
    let size = 28;
    let n = size * size;
    let config = GeneratorConfig::dcgan(1, size);
    let train = 3;
    let test = 3;

    // Stage one: solve clean half-rate instances and keep the weights.
    println!("stage one: solving {train} clean instances ...");
    let mut solved = Vec::with_capacity(train);
    for i in 0..train {
        let seed = 1000 + i as u64;
        let cfg = SolverConfig { lambda_tv: 0.0, seed, ..SolverConfig::default() };
        let (_, latent_seed) = restart_seeds(cfg.seed, 0);
        let z = LatentSeed::sample(config.latent_dim, latent_seed);
        let truth = forward(&init_weights(&config, 2000 + i as u64)?, &z)?;
        let op = Operator::Gaussian(make_gaussian(n / 2, n, 3000 + i as u64)?);
        let y = op.apply(&truth)?;
        let result = recover(&y, &op, &config, &cfg, None)?;
        println!("  instance {i}: reconstruction MSE {:.2e}", mse(&result.image, &truth)?);
        solved.push(result.weights);
    }
    let stats = estimate_prior(&solved, 100, 50, 77)?;
    println!("  estimated statistics over {} layers", stats.layers);
    for (l, (mu, sig)) in stats.mu.iter().zip(&stats.sigma_diag).enumerate() {
        println!("    layer {l}: mean {mu:+.4e}, variance {sig:.4e}");
    }
    println!();

    // Stage two: fresh targets, quarter-rate measurements, heavy noise.
    println!("stage two: {test} held-out noisy instances (m = n/4, sigma2 = 1000) ...");
    let mut mse_plain = 0.0;
    let mut mse_learned = 0.0;
    for i in 0..test {
        let base_seed = 5000 + i as u64;
        let cfg = SolverConfig { lambda_tv: 0.0, seed: base_seed, ..SolverConfig::default() };
        let (_, latent_seed) = restart_seeds(cfg.seed, 0);
        let z = LatentSeed::sample(config.latent_dim, latent_seed);
        let truth = forward(&init_weights(&config, 6000 + i as u64)?, &z)?;
        let m = n / 4;
        let op = Operator::Gaussian(make_gaussian(m, n, 7000 + i as u64)?);
        let noise = NoiseSpec { sigma2: 1000.0, seed: 8000 + i as u64 };
        let y = add_noise(&op.apply(&truth)?, &noise, m)?;

        let plain = recover(&y, &op, &config, &cfg, None)?;
        let e0 = mse(&plain.image, &truth)?;
        let reg_cfg = SolverConfig { lambda_lr: 100.0, ..cfg };
        let learned = recover(&y, &op, &config, &reg_cfg, Some(&stats))?;
        let e1 = mse(&learned.image, &truth)?;
        println!("  instance {i}: MSE {e0:.3e} unregularized, {e1:.3e} with the learned penalty");
        mse_plain += e0 / test as f64;
        mse_learned += e1 / test as f64;
    }
    println!();
    println!("mean MSE: {mse_plain:.3e} unregularized vs {mse_learned:.3e} learned");
    Ok(())
}
