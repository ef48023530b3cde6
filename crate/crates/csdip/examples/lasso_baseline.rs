//! The classical baseline: l1-regularized fitting in a 2-D DCT basis.
//!
//! Two demonstrations. First, the setting where the baseline shines: a
//! signal that is exactly sparse in the DCT basis is recovered from a few
//! dense Gaussian measurements, picking the penalty weight from a small
//! grid by measurement loss. Second, a head-to-head on a digit-like glyph,
//! where the generator-based reconstruction beats the sparse fit at the
//! same measurement budget.
//!
//! ```text
//! cargo run --release --example lasso_baseline
//! ```

use csdip::generator::GeneratorConfig;
use csdip::lasso::{default_lambda_grid, lasso_grid, DctBasis, LassoConfig};
use csdip::linops::{make_gaussian, Operator};
use csdip::metrics::mse;
use csdip::phantom::digit;
use csdip::solver::{recover, SolverConfig};
use csdip::tensor::Tensor;

fn main() -> csdip::Result<()> {
    // --- planted sparse coefficients -----------------------------------
    let (h, w) = (16, 16);
    let n = h * w;
    let m = 120;
    let basis = DctBasis::new(h, w)?;
    let mut coeffs = Tensor::zeros(&[h, w]);
    for (idx, val) in [(3, 1.0), (18, -0.8), (40, 0.6), (77, -0.5), (130, 0.4)] {
        coeffs.data_mut()[idx] = val;
    }
    let truth = basis.idct2(&coeffs)?;
    let a = make_gaussian(m, n, 11)?;
    let y = Operator::Gaussian(a.clone()).apply(&truth)?;

    let base = LassoConfig { max_iters: 2000, tol: 1e-12, ..LassoConfig::default() };
    let (res, lambda) = lasso_grid(&y, &a, h, w, &default_lambda_grid(), &base)?;
    let num = res
        .image
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let rel = num / truth.norm();
    println!("planted 5-sparse signal, n = {n}, m = {m}:");
    println!("  lambda {lambda} from the grid, relative error {rel:.2e}");
    println!(
        "  {} of {} iterations used, converged: {}",
        res.iterations, base.max_iters, res.converged
    );
    println!();

    // --- digit glyph: sparse fit vs generator fit ----------------------
    let size = 28;
    let n = size * size;
    let m = 100;
    let glyph = digit(7, size, size)?;
    let a = make_gaussian(m, n, 12)?;
    let op = Operator::Gaussian(a.clone());
    let y = op.apply(&glyph)?;

    let (lasso_res, lambda) = lasso_grid(&y, &a, size, size, &default_lambda_grid(), &base)?;
    let lasso_err = mse(&lasso_res.image.clone().reshape(&[1, size, size])?, &glyph)?;
    println!("digit glyph, n = {n}, m = {m}:");
    println!("  sparse DCT fit (lambda {lambda}): MSE {lasso_err:.3e}");

    let config = GeneratorConfig::dcgan(1, size);
    for lambda_tv in [0.0, 0.01, 0.1] {
        let cfg = SolverConfig { lambda_tv, seed: 13, ..SolverConfig::default() };
        let result = recover(&y, &op, &config, &cfg, None)?;
        let err = mse(&result.image, &glyph)?;
        println!("  generator fit (lambda_tv {lambda_tv}): MSE {err:.3e}");
    }
    Ok(())
}
