//! Sparse-in-DCT baseline: minimize `0.5 ||y - A idct2(c)||^2 + lambda ||c||_1`
//! over DCT-II coefficients `c` with FISTA, then report `idct2(c)`.
//!
//! The basis is the orthonormal DCT-II,
//!
//! ```text
//!   C[k, i] = a_k cos(pi (2i + 1) k / (2N)),
//!   a_0 = sqrt(1/N),  a_k = sqrt(2/N) for k > 0,
//! ```
//!
//! applied separably to rows and columns. Orthonormality means the synthesis
//! map is an isometry, so the gradient's Lipschitz constant equals that of
//! `A` alone; it is estimated by power iteration on `A' A`. The step size is
//! its reciprocal. With `monotone` set, an iterate is accepted only if it
//! does not increase the objective (the momentum sequence still advances),
//! making the objective trace non-increasing.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::linops::GaussianOperator;
use crate::tensor::Tensor;

/// Orthonormal separable 2-D DCT-II basis for a fixed image size.
#[derive(Debug, Clone)]
pub struct DctBasis {
    height: usize,
    width: usize,
    /// `height x height`, row-major; `row_basis[k * height + i] = a_k cos(...)`.
    row_basis: Vec<f64>,
    /// `width x width`, row-major.
    col_basis: Vec<f64>,
}

fn dct_matrix(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for k in 0..n {
        let alpha = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            c[k * n + i] =
                alpha * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
        }
    }
    c
}

impl DctBasis {
    pub fn new(height: usize, width: usize) -> Result<DctBasis> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("DctBasis::new", format!("{height} x {width} image")));
        }
        Ok(DctBasis { height, width, row_basis: dct_matrix(height), col_basis: dct_matrix(width) })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn check_shape(&self, x: &Tensor, op: &'static str) -> Result<()> {
        if x.len() != self.height * self.width {
            return Err(Error::shape(
                op,
                format!("{} entries for a {} x {} basis", x.len(), self.height, self.width),
            ));
        }
        Ok(())
    }

    /// Analysis transform: image to coefficients, `C_h X C_w'`.
    pub fn dct2(&self, x: &Tensor) -> Result<Tensor> {
        self.check_shape(x, "dct2")?;
        let (h, w) = (self.height, self.width);
        let mut tmp = vec![0.0; h * w];
        for k in 0..h {
            for j in 0..w {
                let mut acc = 0.0;
                for i in 0..h {
                    acc += self.row_basis[k * h + i] * x.data()[i * w + j];
                }
                tmp[k * w + j] = acc;
            }
        }
        let mut out = vec![0.0; h * w];
        for k in 0..h {
            for l in 0..w {
                let mut acc = 0.0;
                for j in 0..w {
                    acc += tmp[k * w + j] * self.col_basis[l * w + j];
                }
                out[k * w + l] = acc;
            }
        }
        Tensor::from_vec(&[h, w], out)
    }

    /// Synthesis transform: coefficients to image, `C_h' Y C_w`.
    pub fn idct2(&self, y: &Tensor) -> Result<Tensor> {
        self.check_shape(y, "idct2")?;
        let (h, w) = (self.height, self.width);
        let mut tmp = vec![0.0; h * w];
        for i in 0..h {
            for l in 0..w {
                let mut acc = 0.0;
                for k in 0..h {
                    acc += self.row_basis[k * h + i] * y.data()[k * w + l];
                }
                tmp[i * w + l] = acc;
            }
        }
        let mut out = vec![0.0; h * w];
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0;
                for l in 0..w {
                    acc += tmp[i * w + l] * self.col_basis[l * w + j];
                }
                out[i * w + j] = acc;
            }
        }
        Tensor::from_vec(&[h, w], out)
    }
}

/// FISTA settings for one lambda.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoConfig {
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop when the iterate moves less than `tol * max(1, ||c||)`.
    pub tol: f64,
    /// Reject steps that would increase the objective.
    pub monotone: bool,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig { lambda: 1e-2, max_iters: 500, tol: 1e-9, monotone: true }
    }
}

/// The default lambda grid: nine points log-spaced over `[1e-4, 1e0]`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..9).map(|i| 10f64.powf(-4.0 + i as f64 * 0.5)).collect()
}

/// Outcome of one FISTA solve.
#[derive(Debug, Clone)]
pub struct LassoResult {
    /// `idct2(c)`, shape `[H, W]`.
    pub image: Tensor,
    /// DCT coefficients `c`, shape `[H, W]`.
    pub coeffs: Tensor,
    /// `|| y - A idct2(c) ||^2` at the final iterate.
    pub measurement_loss: f64,
    /// Objective value after every accepted iteration, starting at `c = 0`.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    /// Whether the movement tolerance was reached before `max_iters`.
    pub converged: bool,
}

pub(crate) fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn apply_mat(a: &GaussianOperator, v: &[f64]) -> Vec<f64> {
    let (m, n) = (a.m(), a.n());
    let mat = a.matrix();
    let mut out = vec![0.0; m];
    for (i, o) in out.iter_mut().enumerate() {
        let row = &mat[i * n..(i + 1) * n];
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
    out
}

fn apply_mat_t(a: &GaussianOperator, u: &[f64]) -> Vec<f64> {
    let (m, n) = (a.m(), a.n());
    let mat = a.matrix();
    let mut out = vec![0.0; n];
    for (i, &ui) in u.iter().enumerate().take(m) {
        let row = &mat[i * n..(i + 1) * n];
        for (o, &aij) in out.iter_mut().zip(row) {
            *o += aij * ui;
        }
    }
    out
}

/// Largest eigenvalue of `A' A` by power iteration (at most `iters` rounds).
fn lipschitz(a: &GaussianOperator, iters: usize) -> f64 {
    let n = a.n();
    let mut rng = ChaCha12Rng::seed_from_u64(0x11A5_50);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = apply_mat_t(a, &apply_mat(a, &v));
        let new_lambda = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if new_lambda == 0.0 {
            return 0.0;
        }
        v = w.iter().map(|x| x / new_lambda).collect();
        if (new_lambda - lambda).abs() <= 1e-12 * new_lambda {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    lambda
}

/// Solves the lasso for one lambda and reports the synthesized image.
pub fn lasso_recover(
    y: &Tensor,
    a: &GaussianOperator,
    height: usize,
    width: usize,
    cfg: &LassoConfig,
) -> Result<LassoResult> {
    if a.n() != height * width {
        return Err(Error::shape(
            "lasso_recover",
            format!("operator columns {} vs {} x {} image", a.n(), height, width),
        ));
    }
    if y.len() != a.m() {
        return Err(Error::shape(
            "lasso_recover",
            format!("y has {} entries, operator emits {}", y.len(), a.m()),
        ));
    }
    if cfg.lambda < 0.0 || !cfg.lambda.is_finite() {
        return Err(Error::invalid("lasso_recover", format!("lambda {}", cfg.lambda)));
    }
    if cfg.max_iters == 0 {
        return Err(Error::invalid("lasso_recover", "max_iters must be >= 1"));
    }
    y.ensure_finite("lasso_recover")?;
    let basis = DctBasis::new(height, width)?;

    // 1.01 guards against power iteration under-reporting the constant.
    let lip = lipschitz(a, 100).max(f64::MIN_POSITIVE) * 1.01;
    let step = 1.0 / lip;

    let obj = |c: &Tensor| -> Result<(f64, f64)> {
        let img = basis.idct2(c)?;
        let ax = apply_mat(a, img.data());
        let mloss: f64 = y.data().iter().zip(&ax).map(|(yi, ai)| (yi - ai) * (yi - ai)).sum();
        let l1: f64 = c.data().iter().map(|v| v.abs()).sum();
        Ok((0.5 * mloss + cfg.lambda * l1, mloss))
    };
    let grad = |c: &Tensor| -> Result<Tensor> {
        let img = basis.idct2(c)?;
        let ax = apply_mat(a, img.data());
        let r: Vec<f64> = ax.iter().zip(y.data()).map(|(ai, yi)| ai - yi).collect();
        let g_img = Tensor::from_vec(&[height, width], apply_mat_t(a, &r))?;
        basis.dct2(&g_img)
    };

    let mut x = Tensor::zeros(&[height, width]);
    let mut v = x.clone();
    let mut t = 1.0f64;
    let (mut fx, _) = obj(&x)?;
    let mut trace = vec![fx];
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let g = grad(&v)?;
        let mut z = v.clone();
        for (zi, &gi) in z.data_mut().iter_mut().zip(g.data()) {
            *zi = soft_threshold(*zi - step * gi, step * cfg.lambda);
        }
        let (fz, _) = obj(&z)?;
        if !fz.is_finite() {
            return Err(Error::non_finite("lasso_recover", format!("objective {fz}")));
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let x_prev = x.clone();
        let accepted = !(cfg.monotone && fz > fx);
        if accepted {
            x = z.clone();
            fx = fz;
            let mut vn = x.clone();
            let beta = (t - 1.0) / t_next;
            vn.add_scaled(&x, beta)?;
            vn.add_scaled(&x_prev, -beta)?;
            v = vn;
        } else {
            // Keep the previous iterate; momentum still advances through z.
            let mut vn = x.clone();
            vn.scale(1.0 - t / t_next);
            vn.add_scaled(&z, t / t_next)?;
            v = vn;
        }
        t = t_next;
        trace.push(fx);
        iterations += 1;
        if accepted {
            let mut moved = 0.0;
            for (xi, pi) in x.data().iter().zip(x_prev.data()) {
                moved += (xi - pi) * (xi - pi);
            }
            if moved.sqrt() <= cfg.tol * x.norm().max(1.0) {
                converged = true;
                break;
            }
        }
    }
    let image = basis.idct2(&x)?;
    let ax = apply_mat(a, image.data());
    let measurement_loss: f64 =
        y.data().iter().zip(&ax).map(|(yi, ai)| (yi - ai) * (yi - ai)).sum();
    Ok(LassoResult { image, coeffs: x, measurement_loss, objective_trace: trace, iterations, converged })
}

/// Runs the lasso over a lambda grid and keeps the solution with the
/// smallest measurement loss. Returns it with the winning lambda.
pub fn lasso_grid(
    y: &Tensor,
    a: &GaussianOperator,
    height: usize,
    width: usize,
    grid: &[f64],
    base: &LassoConfig,
) -> Result<(LassoResult, f64)> {
    if grid.is_empty() {
        return Err(Error::invalid("lasso_grid", "empty lambda grid"));
    }
    let mut best: Option<(LassoResult, f64)> = None;
    for &lambda in grid {
        let cfg = LassoConfig { lambda, ..base.clone() };
        let res = lasso_recover(y, a, height, width, &cfg)?;
        let better = best
            .as_ref()
            .map_or(true, |(b, _)| res.measurement_loss.total_cmp(&b.measurement_loss).is_lt());
        if better {
            best = Some((res, lambda));
        }
    }
    Ok(best.expect("non-empty grid produced at least one result"))
}
