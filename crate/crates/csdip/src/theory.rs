//! Numerical checks for the over-parameterized convergence analysis.
//!
//! The model is a one-hidden-layer network with a fixed input and fixed
//! outer layer,
//!
//! ```text
//!   G(W) = V relu(W z),   L(W) = 0.5 || G(W) - y ||^2,
//! ```
//!
//! with `z in R^k`, `W in R^{d x k}` trainable, `V in R^{n x d}` fixed.
//! The instance generator draws `z ~ N(0, I)`, `W0` with unit Gaussian
//! entries, and `V` with `N(0, nu^2)` entries where
//! `nu = ||y|| / (sqrt(d n) ||z||)`.
//!
//! Plain gradient descent uses the step size
//!
//! ```text
//!   eta = eta_bar * 8 n / (||y||^2 (4 n + d)),   0 < eta_bar <= 1,
//! ```
//!
//! and the claimed envelope is
//!
//! ```text
//!   || G(W_tau) - y || <= 3 (1 - eta_bar / (8 (4 n + d)))^tau ||y||.
//! ```
//!
//! Supporting spectral facts are checked empirically at the initialization:
//! the Jacobian `J` of `G` at `W0` (rows indexed by outputs, columns by
//! `vect(W)` in row-major order) satisfies `J J' = ||z||^2 V D V'` with
//! `D = diag(relu'(W0 z)^2)`, and with high probability
//!
//! * `sigma_min(J) >= 0.5 nu sqrt(d) ||z||` (needs `d >= 3828 n`),
//! * `||J|| <= nu (sqrt(d) + 2 sqrt(n)) ||z||`,
//! * `|| G(W0) - y || <= 3 ||y||`,
//! * a spectral-norm-`R` perturbation of `W0` flips at most
//!   `2 ceil((2 d R)^(2/3))` of the hidden-unit signs, with
//!   `sgn(t) = +1` exactly when `t >= 0`.
//!
//! The derivative convention at the kink is `relu'(0) = 1`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiplier on `n` that the smallest-singular-value bound requires of `d`.
pub const SIGMA_MIN_WIDTH_FACTOR: usize = 3828;

fn relu(t: f64) -> f64 {
    if t >= 0.0 {
        t
    } else {
        0.0
    }
}

fn relu_prime(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        0.0
    }
}

fn sgn(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn gaussians(rng: &mut ChaCha12Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// A fixed one-hidden-layer instance; only `W` trains.
#[derive(Debug, Clone)]
pub struct OneLayerNet {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub z: DVector<f64>,
    /// `n x d`, entries `N(0, nu^2)`.
    pub v: DMatrix<f64>,
    /// `d x k` initialization, unit Gaussian entries.
    pub w0: DMatrix<f64>,
    pub nu: f64,
}

fn check_dims(op: &'static str, n: usize, d: usize, k: usize) -> Result<()> {
    if n == 0 || d == 0 || k == 0 {
        return Err(Error::invalid(op, format!("n {n} / d {d} / k {k} must all be >= 1")));
    }
    Ok(())
}

/// Builds a net for a given target `y`. The draw order is `z`, then `W0`
/// (row-major), then `V` (row-major, scaled by `nu`), so nets built from the
/// same seed but rescaled `y` share everything except the scale of `V`.
pub fn make_net(n: usize, d: usize, k: usize, y: &DVector<f64>, seed: u64) -> Result<OneLayerNet> {
    check_dims("make_net", n, d, k)?;
    if y.len() != n {
        return Err(Error::shape("make_net", format!("y has {} entries for n {}", y.len(), n)));
    }
    let y_norm = y.norm();
    if !(y_norm.is_finite() && y_norm > 0.0) {
        return Err(Error::invalid("make_net", format!("||y|| {y_norm}")));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let z = DVector::from_vec(gaussians(&mut rng, k));
    let w0 = DMatrix::from_row_slice(d, k, &gaussians(&mut rng, d * k));
    let nu = y_norm / ((d as f64 * n as f64).sqrt() * z.norm());
    let mut v = DMatrix::from_row_slice(n, d, &gaussians(&mut rng, n * d));
    v.scale_mut(nu);
    Ok(OneLayerNet { n, d, k, z, v, w0, nu })
}

/// Draws a target `y ~ N(0, I_n)` and the matching net.
pub fn make_instance(n: usize, d: usize, k: usize, seed: u64) -> Result<(OneLayerNet, DVector<f64>)> {
    check_dims("make_instance", n, d, k)?;
    // The target comes from a salted stream so it is independent of the
    // net's own draws.
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xD1CE_BA5E);
    let y = DVector::from_vec(gaussians(&mut rng, n));
    let net = make_net(n, d, k, &y, seed)?;
    Ok((net, y))
}

/// Network output at weights `w`.
pub fn output(net: &OneLayerNet, w: &DMatrix<f64>) -> DVector<f64> {
    let u = w * &net.z;
    let phi = u.map(relu);
    &net.v * phi
}

/// Loss, gradient, and residual at `w`. The gradient follows the chain
/// rule: with `r = G(W) - y`, `u = W z`,
/// `dL/dW = ((V' r) .* relu'(u)) z'`.
pub fn loss_and_grad(
    net: &OneLayerNet,
    w: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(f64, DMatrix<f64>, DVector<f64>)> {
    if w.nrows() != net.d || w.ncols() != net.k {
        return Err(Error::shape(
            "loss_and_grad",
            format!("w is {} x {}, net wants {} x {}", w.nrows(), w.ncols(), net.d, net.k),
        ));
    }
    if y.len() != net.n {
        return Err(Error::shape(
            "loss_and_grad",
            format!("y has {} entries for n {}", y.len(), net.n),
        ));
    }
    let u = w * &net.z;
    let phi = u.map(relu);
    let r = &net.v * phi - y;
    let loss = 0.5 * r.norm_squared();
    let s = net.v.transpose() * &r;
    let gate = u.map(relu_prime);
    let mut grad = DMatrix::zeros(net.d, net.k);
    for l in 0..net.d {
        let c = s[l] * gate[l];
        for j in 0..net.k {
            grad[(l, j)] = c * net.z[j];
        }
    }
    Ok((loss, grad, r))
}

/// Explicit Jacobian of `G` at `w`: `n x (d k)` with column `l k + j`
/// holding `dG/dW[l, j]`.
pub fn jacobian(net: &OneLayerNet, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if w.nrows() != net.d || w.ncols() != net.k {
        return Err(Error::shape(
            "jacobian",
            format!("w is {} x {}, net wants {} x {}", w.nrows(), w.ncols(), net.d, net.k),
        ));
    }
    let u = w * &net.z;
    let gate = u.map(relu_prime);
    let mut j = DMatrix::zeros(net.n, net.d * net.k);
    for i in 0..net.n {
        for l in 0..net.d {
            let c = net.v[(i, l)] * gate[l];
            for jj in 0..net.k {
                j[(i, l * net.k + jj)] = c * net.z[jj];
            }
        }
    }
    Ok(j)
}

/// Closed form for `J J'`: `||z||^2 V diag(relu'(u)^2) V'`.
pub fn jjt(net: &OneLayerNet, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if w.nrows() != net.d || w.ncols() != net.k {
        return Err(Error::shape(
            "jjt",
            format!("w is {} x {}, net wants {} x {}", w.nrows(), w.ncols(), net.d, net.k),
        ));
    }
    let u = w * &net.z;
    let gate2 = u.map(|t| relu_prime(t) * relu_prime(t));
    let mut scaled = net.v.clone();
    for l in 0..net.d {
        let g = gate2[l];
        for i in 0..net.n {
            scaled[(i, l)] *= g;
        }
    }
    let mut out = &scaled * net.v.transpose();
    out.scale_mut(net.z.norm_squared());
    Ok(out)
}

/// Extreme singular values of the Jacobian at `w`, via the `n x n` Gram
/// matrix.
pub fn jacobian_extremes(net: &OneLayerNet, w: &DMatrix<f64>) -> Result<(f64, f64)> {
    let gram = jjt(net, w)?;
    let eig = gram.symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &lambda in eig.eigenvalues.iter() {
        let lambda = lambda.max(0.0);
        lo = lo.min(lambda);
        hi = hi.max(lambda);
    }
    Ok((lo.sqrt(), hi.sqrt()))
}

/// The pinned step size.
pub fn step_size(n: usize, d: usize, y_norm: f64, eta_bar: f64) -> f64 {
    eta_bar * 8.0 * n as f64 / (y_norm * y_norm * (4.0 * n as f64 + d as f64))
}

/// The claimed residual envelope at step `tau`.
pub fn residual_bound(n: usize, d: usize, y_norm: f64, eta_bar: f64, tau: usize) -> f64 {
    let rate = 1.0 - eta_bar / (8.0 * (4.0 * n as f64 + d as f64));
    3.0 * rate.powi(tau as i32) * y_norm
}

/// Record of one gradient-descent run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescentTrace {
    /// `|| G(W_tau) - y ||` for `tau = 0 ..= tau_max` (shorter if diverged).
    pub residual_norms: Vec<f64>,
    /// The envelope at every step, always `tau_max + 1` entries.
    pub bound_curve: Vec<f64>,
    pub eta_bar: f64,
    pub eta: f64,
    /// First step whose residual exceeded `10 ||y||` or went non-finite.
    pub diverged_at: Option<usize>,
}

impl DescentTrace {
    /// True when every recorded residual sits under the envelope and the
    /// run covered all steps without diverging.
    pub fn bound_holds(&self) -> bool {
        self.diverged_at.is_none()
            && self.residual_norms.len() == self.bound_curve.len()
            && self
                .residual_norms
                .iter()
                .zip(&self.bound_curve)
                .all(|(r, b)| r.is_finite() && *r <= *b)
    }
}

/// Runs plain gradient descent from `W0` with the pinned step size.
pub fn gd_denoise(
    net: &OneLayerNet,
    y: &DVector<f64>,
    eta_bar: f64,
    tau_max: usize,
) -> Result<DescentTrace> {
    if !(eta_bar > 0.0 && eta_bar <= 1.0) {
        return Err(Error::invalid("gd_denoise", format!("eta_bar {eta_bar} outside (0, 1]")));
    }
    if y.len() != net.n {
        return Err(Error::shape(
            "gd_denoise",
            format!("y has {} entries for n {}", y.len(), net.n),
        ));
    }
    let y_norm = y.norm();
    let eta = step_size(net.n, net.d, y_norm, eta_bar);
    let bound_curve: Vec<f64> =
        (0..=tau_max).map(|t| residual_bound(net.n, net.d, y_norm, eta_bar, t)).collect();
    let mut w = net.w0.clone();
    let mut residual_norms = Vec::with_capacity(tau_max + 1);
    let mut diverged_at = None;
    for tau in 0..=tau_max {
        let (_, grad, r) = loss_and_grad(net, &w, y)?;
        let rn = r.norm();
        residual_norms.push(rn);
        if !rn.is_finite() || rn > 10.0 * y_norm {
            diverged_at = Some(tau);
            break;
        }
        if tau < tau_max {
            w -= grad * eta;
        }
    }
    Ok(DescentTrace { residual_norms, bound_curve, eta_bar, eta, diverged_at })
}

/// Aggregate outcome of repeated spectral checks at initialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaReport {
    pub trials: usize,
    /// Trials with `sigma_min(J) >= 0.5 nu sqrt(d) ||z||`.
    pub sigma_min_holds: usize,
    /// Trials with `||J|| <= nu (sqrt(d) + 2 sqrt(n)) ||z||`.
    pub spectral_norm_holds: usize,
    /// Trials with `|| G(W0) - y || <= 3 ||y||`.
    pub init_residual_holds: usize,
}

/// Checks the three initialization bounds over independent instances.
/// Requires `d >= 3828 n`, the width regime of the smallest-singular-value
/// bound.
pub fn verify_lemmas(n: usize, d: usize, k: usize, trials: usize, seed: u64) -> Result<LemmaReport> {
    check_dims("verify_lemmas", n, d, k)?;
    if d < SIGMA_MIN_WIDTH_FACTOR * n {
        return Err(Error::invalid(
            "verify_lemmas",
            format!("d {d} below {SIGMA_MIN_WIDTH_FACTOR} n = {}", SIGMA_MIN_WIDTH_FACTOR * n),
        ));
    }
    if trials == 0 {
        return Err(Error::invalid("verify_lemmas", "trials must be >= 1"));
    }
    let results: Vec<Result<(bool, bool, bool)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (net, y) = make_instance(n, d, k, seed.wrapping_add(t as u64))?;
            let (sig_min, sig_max) = jacobian_extremes(&net, &net.w0)?;
            let zn = net.z.norm();
            let lower = 0.5 * net.nu * (d as f64).sqrt() * zn;
            let upper = net.nu * ((d as f64).sqrt() + 2.0 * (n as f64).sqrt()) * zn;
            let r0 = (output(&net, &net.w0) - &y).norm();
            Ok((sig_min >= lower, sig_max <= upper, r0 <= 3.0 * y.norm()))
        })
        .collect();
    let mut report =
        LemmaReport { trials, sigma_min_holds: 0, spectral_norm_holds: 0, init_residual_holds: 0 };
    for r in results {
        let (a, b, c) = r?;
        report.sigma_min_holds += a as usize;
        report.spectral_norm_holds += b as usize;
        report.init_residual_holds += c as usize;
    }
    Ok(report)
}

/// Counts hidden units whose pre-activation sign differs between `w0` and
/// `w`, with `sgn(t) = +1` exactly when `t >= 0`.
pub fn sign_changes(w0: &DMatrix<f64>, w: &DMatrix<f64>, z: &DVector<f64>) -> Result<usize> {
    if w0.shape() != w.shape() || w0.ncols() != z.len() {
        return Err(Error::shape(
            "sign_changes",
            format!("w0 {:?} / w {:?} / z {}", w0.shape(), w.shape(), z.len()),
        ));
    }
    let u0 = w0 * z;
    let u = w * z;
    Ok(u0.iter().zip(u.iter()).filter(|(a, b)| sgn(**a) != sgn(**b)).count())
}

/// Spectral norm of `w - w0` via the `k x k` Gram matrix.
fn perturbation_spectral_norm(w0: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let delta = w - w0;
    let gram = delta.transpose() * &delta;
    let eig = gram.symmetric_eigen();
    eig.eigenvalues.iter().fold(0.0f64, |acc, &l| acc.max(l.max(0.0))).sqrt()
}

/// Sign-change count, rejecting perturbations larger than `radius` in
/// spectral norm (the regime the combinatorial bound speaks about).
pub fn sign_changes_within(
    w0: &DMatrix<f64>,
    w: &DMatrix<f64>,
    z: &DVector<f64>,
    radius: f64,
) -> Result<usize> {
    let spec = perturbation_spectral_norm(w0, w);
    if spec > radius * (1.0 + 1e-12) {
        return Err(Error::invalid(
            "sign_changes_within",
            format!("perturbation has spectral norm {spec}, radius {radius}"),
        ));
    }
    sign_changes(w0, w, z)
}

/// The combinatorial ceiling on sign changes at spectral radius `R`.
pub fn sign_change_bound(d: usize, radius: f64) -> usize {
    2 * (2.0 * d as f64 * radius).powf(2.0 / 3.0).ceil() as usize
}

/// Aggregate outcome of random-perturbation sign-change checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignChangeReport {
    pub trials: usize,
    /// Trials whose count stayed at or under the ceiling.
    pub holds: usize,
    pub bound: usize,
    pub max_count: usize,
}

/// Perturbs `W0` by a random direction scaled to spectral norm exactly
/// `radius` and counts sign flips, over independent trials.
pub fn verify_sign_changes(
    d: usize,
    k: usize,
    radius: f64,
    trials: usize,
    seed: u64,
) -> Result<SignChangeReport> {
    check_dims("verify_sign_changes", 1, d, k)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("verify_sign_changes", format!("radius {radius}")));
    }
    if trials == 0 {
        return Err(Error::invalid("verify_sign_changes", "trials must be >= 1"));
    }
    let bound = sign_change_bound(d, radius);
    let counts: Vec<Result<usize>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(t as u64));
            let z = DVector::from_vec(gaussians(&mut rng, k));
            let w0 = DMatrix::from_row_slice(d, k, &gaussians(&mut rng, d * k));
            let g = DMatrix::from_row_slice(d, k, &gaussians(&mut rng, d * k));
            let spec = perturbation_spectral_norm(&DMatrix::zeros(d, k), &g);
            let w = &w0 + g * (radius / spec);
            sign_changes_within(&w0, &w, &z, radius)
        })
        .collect();
    let mut report = SignChangeReport { trials, holds: 0, bound, max_count: 0 };
    for c in counts {
        let c = c?;
        report.holds += (c <= bound) as usize;
        report.max_count = report.max_count.max(c);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check;

    #[test]
    fn relu_derivative_at_the_kink_is_one() {
        assert_eq!(relu_prime(0.0), 1.0);
        assert_eq!(relu_prime(-1e-300), 0.0);
        assert_eq!(sgn(0.0), 1.0);
    }

    #[test]
    fn dead_units_receive_no_gradient() {
        let (net, y) = make_instance(3, 6, 2, 50).unwrap();
        let u = &net.w0 * &net.z;
        let (_, grad, _) = loss_and_grad(&net, &net.w0, &y).unwrap();
        let mut saw_dead = false;
        for l in 0..net.d {
            if u[l] < 0.0 {
                saw_dead = true;
                for j in 0..net.k {
                    assert_eq!(grad[(l, j)], 0.0, "dead unit {l} column {j}");
                }
            }
        }
        assert!(saw_dead, "seed produced no dead unit; pick another");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (net, y) = make_instance(3, 5, 2, 51).unwrap();
        // Keep pre-activations clear of the kink so central differences
        // see a smooth function.
        let u = &net.w0 * &net.z;
        assert!(u.iter().all(|v| v.abs() > 1e-3), "seed too close to a kink; pick another");
        let (_, grad, _) = loss_and_grad(&net, &net.w0, &y).unwrap();
        let theta: Vec<f64> = net.w0.transpose().as_slice().to_vec(); // row-major
        let analytic: Vec<f64> = grad.transpose().as_slice().to_vec();
        let mut f = |t: &[f64]| {
            let w = DMatrix::from_row_slice(net.d, net.k, t);
            loss_and_grad(&net, &w, &y).unwrap().0
        };
        check::assert_grad_matches(&mut f, &theta, &analytic, 1e-6, 1e-6, "one-layer loss");
    }

    #[test]
    fn zero_residual_means_zero_gradient_and_a_fixed_point() {
        let (net, _) = make_instance(4, 8, 3, 52).unwrap();
        let y = output(&net, &net.w0);
        let (loss, grad, r) = loss_and_grad(&net, &net.w0, &y).unwrap();
        assert_eq!(loss, 0.0);
        assert!(r.iter().all(|&v| v == 0.0));
        assert!(grad.iter().all(|&v| v == 0.0));
        let trace = gd_denoise(&net, &y, 1.0, 10).unwrap();
        assert!(trace.residual_norms.iter().all(|&v| v == 0.0));
        assert!(trace.bound_holds());
    }

    #[test]
    fn jacobian_gram_matches_its_closed_form() {
        let (net, _) = make_instance(4, 7, 3, 53).unwrap();
        let j = jacobian(&net, &net.w0).unwrap();
        let explicit = &j * j.transpose();
        let closed = jjt(&net, &net.w0).unwrap();
        let mut max = 0.0f64;
        for i in 0..net.n {
            for jj in 0..net.n {
                max = max.max((explicit[(i, jj)] - closed[(i, jj)]).abs());
            }
        }
        let scale = explicit.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
        assert!(max / scale <= 1e-12, "rel deviation {}", max / scale);
    }

    #[test]
    fn jacobian_rows_match_finite_differences_of_the_output() {
        let (net, _) = make_instance(3, 5, 2, 54).unwrap();
        let u = &net.w0 * &net.z;
        assert!(u.iter().all(|v| v.abs() > 1e-3), "seed too close to a kink; pick another");
        let j = jacobian(&net, &net.w0).unwrap();
        let theta: Vec<f64> = net.w0.transpose().as_slice().to_vec();
        for i in 0..net.n {
            let mut gi = |t: &[f64]| {
                let w = DMatrix::from_row_slice(net.d, net.k, t);
                output(&net, &w)[i]
            };
            let fd = check::fd_grad(&mut gi, &theta, 1e-6);
            let row: Vec<f64> = (0..net.d * net.k).map(|c| j[(i, c)]).collect();
            assert!(
                check::rel_err_vec(&row, &fd) <= 1e-6,
                "row {i} rel err {}",
                check::rel_err_vec(&row, &fd)
            );
        }
    }

    #[test]
    fn chain_rule_gradient_equals_jacobian_transpose_times_residual() {
        let (net, y) = make_instance(4, 9, 3, 55).unwrap();
        let (_, grad, r) = loss_and_grad(&net, &net.w0, &y).unwrap();
        let j = jacobian(&net, &net.w0).unwrap();
        let jtr = j.transpose() * r;
        let flat: Vec<f64> = grad.transpose().as_slice().to_vec();
        let mut max = 0.0f64;
        for (a, b) in flat.iter().zip(jtr.iter()) {
            max = max.max((a - b).abs());
        }
        let scale = flat.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
        assert!(max / scale <= 1e-10, "rel deviation {}", max / scale);
    }

    #[test]
    fn rescaling_the_target_rescales_the_whole_trajectory() {
        let n = 4;
        let mut rng = check::rng(56);
        let y1 = DVector::from_vec(check::randn(&mut rng, n));
        let y2 = &y1 * 2.0;
        let net1 = make_net(n, 40, 3, &y1, 57).unwrap();
        let net2 = make_net(n, 40, 3, &y2, 57).unwrap();
        assert!((net2.nu - 2.0 * net1.nu).abs() <= 1e-15);
        let t1 = gd_denoise(&net1, &y1, 0.5, 60).unwrap();
        let t2 = gd_denoise(&net2, &y2, 0.5, 60).unwrap();
        assert_eq!(t1.residual_norms.len(), t2.residual_norms.len());
        for (a, b) in t1.residual_norms.iter().zip(&t2.residual_norms) {
            assert!((b - 2.0 * a).abs() <= 1e-9 * b.abs().max(1.0), "{b} vs 2 * {a}");
        }
    }

    #[test]
    fn descent_stays_under_the_envelope_on_a_wide_net() {
        let (net, y) = make_instance(4, 2000, 8, 58).unwrap();
        let trace = gd_denoise(&net, &y, 1.0, 200).unwrap();
        assert!(trace.diverged_at.is_none());
        assert!(trace.bound_holds(), "residuals exceeded the envelope");
        // The envelope starts at 3 ||y|| and decays geometrically.
        assert!((trace.bound_curve[0] - 3.0 * y.norm()).abs() <= 1e-12);
        assert!(trace.bound_curve[200] < trace.bound_curve[0]);
    }

    #[test]
    fn absurd_step_sizes_are_flagged_as_divergence() {
        // A hand-built net whose outer layer is far larger than the pinned
        // nu, with a tiny target, makes the prescribed step enormous.
        let (n, d, k) = (3, 10, 2);
        let mut rng = check::rng(59);
        let z = DVector::from_vec(check::randn(&mut rng, k));
        let w0 = DMatrix::from_row_slice(d, k, &check::randn(&mut rng, d * k));
        let v = DMatrix::from_row_slice(n, d, &check::randn(&mut rng, n * d));
        let net = OneLayerNet { n, d, k, z, v, w0, nu: 1.0 };
        let y = DVector::from_vec(vec![1e-6, 0.0, 0.0]);
        let trace = gd_denoise(&net, &y, 1.0, 50).unwrap();
        assert!(trace.diverged_at.is_some());
        assert!(!trace.bound_holds());
        assert!(trace.residual_norms.len() <= 51);
    }

    #[test]
    fn eta_bar_outside_the_unit_interval_is_rejected() {
        let (net, y) = make_instance(2, 10, 2, 60).unwrap();
        assert!(gd_denoise(&net, &y, 0.0, 5).is_err());
        assert!(gd_denoise(&net, &y, 1.5, 5).is_err());
        assert!(gd_denoise(&net, &y, 1.0, 5).is_ok());
    }

    #[test]
    fn lemma_checks_pass_on_a_small_wide_instance() {
        let report = verify_lemmas(2, 2 * SIGMA_MIN_WIDTH_FACTOR, 10, 2, 61).unwrap();
        assert_eq!(report.trials, 2);
        assert_eq!(report.sigma_min_holds, 2);
        assert_eq!(report.spectral_norm_holds, 2);
        assert_eq!(report.init_residual_holds, 2);
    }

    #[test]
    fn lemma_checks_require_the_wide_regime() {
        assert!(verify_lemmas(2, 100, 10, 2, 62).is_err());
    }

    #[test]
    fn negating_the_weights_flips_every_sign() {
        let mut rng = check::rng(63);
        let z = DVector::from_vec(check::randn(&mut rng, 3));
        let w0 = DMatrix::from_row_slice(20, 3, &check::randn(&mut rng, 60));
        let w = -w0.clone();
        assert_eq!(sign_changes(&w0, &w, &z).unwrap(), 20);
    }

    #[test]
    fn identical_weights_flip_nothing() {
        let mut rng = check::rng(64);
        let z = DVector::from_vec(check::randn(&mut rng, 3));
        let w0 = DMatrix::from_row_slice(15, 3, &check::randn(&mut rng, 45));
        assert_eq!(sign_changes(&w0, &w0, &z).unwrap(), 0);
    }

    #[test]
    fn oversized_perturbations_are_rejected() {
        let mut rng = check::rng(65);
        let z = DVector::from_vec(check::randn(&mut rng, 2));
        let w0 = DMatrix::from_row_slice(10, 2, &check::randn(&mut rng, 20));
        let w = &w0 * 2.0;
        assert!(sign_changes_within(&w0, &w, &z, 1e-6).is_err());
    }

    #[test]
    fn random_perturbations_respect_the_sign_change_ceiling() {
        let report = verify_sign_changes(500, 5, 0.1, 5, 66).unwrap();
        assert_eq!(report.holds, report.trials, "max count {} over bound {}", report.max_count, report.bound);
        assert!(report.max_count <= report.bound);
        // Ceiling for d = 500, R = 0.1: 2 * ceil(100^(2/3)) = 2 * 22 = 44.
        assert_eq!(report.bound, 44);
    }

    #[test]
    fn instance_is_deterministic_in_the_seed() {
        let (a, ya) = make_instance(3, 20, 4, 67).unwrap();
        let (b, yb) = make_instance(3, 20, 4, 67).unwrap();
        assert_eq!(a.w0, b.w0);
        assert_eq!(a.v, b.v);
        assert_eq!(a.z, b.z);
        assert_eq!(ya, yb);
    }
}
