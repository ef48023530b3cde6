//! Test-only numeric oracles shared by the unit tests.
//!
//! The central finite-difference oracle here is deliberately independent of
//! every backward pass in the crate: it only ever calls forward code through
//! a scalar-valued closure. Any analytic gradient in the crate is validated
//! against it, never against another analytic gradient.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// Deterministic RNG for tests.
pub fn rng(seed: u64) -> ChaCha12Rng {
    use rand::SeedableRng;
    ChaCha12Rng::seed_from_u64(seed)
}

/// Vector of i.i.d. standard normals.
pub fn randn(rng: &mut ChaCha12Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Vector of i.i.d. uniforms on `[lo, hi)`.
pub fn rand_uniform(rng: &mut ChaCha12Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Relative error of `got` against `want`, guarded for tiny references.
pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-12)
}

/// Relative l2 error between two vectors.
pub fn rel_err_vec(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len(), "rel_err_vec: length mismatch");
    let diff: f64 = got
        .iter()
        .zip(want)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = want.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / norm.max(1e-12)
}

/// Central finite-difference gradient of a scalar function of a flat
/// parameter vector, step `h` per coordinate.
pub fn fd_grad(f: &mut dyn FnMut(&[f64]) -> f64, theta: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; theta.len()];
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let fp = f(&probe);
        probe[i] = orig - h;
        let fm = f(&probe);
        probe[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Asserts that an analytic gradient matches the finite-difference oracle to
/// a relative l2 tolerance.
pub fn assert_grad_matches(
    f: &mut dyn FnMut(&[f64]) -> f64,
    theta: &[f64],
    analytic: &[f64],
    h: f64,
    tol: f64,
    what: &str,
) {
    let numeric = fd_grad(f, theta, h);
    let err = rel_err_vec(analytic, &numeric);
    assert!(
        err <= tol,
        "{what}: gradient mismatch vs central differences: rel l2 err {err:.3e} > {tol:.1e}"
    );
}
