//! Regularizers: total variation on images, and a learned layer-wise
//! Gaussian penalty on generator weights.
//!
//! The learned penalty models each layer's parameters as i.i.d. Gaussian
//! with a per-layer mean and variance estimated from previously solved
//! instances:
//!
//! ```text
//!   LR(w) = sum_l  (1 / sigma_l) * sum_{i in layer l} (w_i - mu_l)^2
//! ```
//!
//! i.e. a diagonal Gaussian quadratic form `(w - mu)' Sigma^{-1} (w - mu)`
//! with the statistics shared within each layer. With `mu = 0`,
//! `sigma = 1` it reduces to plain squared l2 weight decay.
//!
//! [`estimate_prior`] produces the statistics by moment matching: each of
//! `T` iterations picks one solved weight set at random, samples `S` entries
//! per layer with replacement into a row of an `L x S` matrix `M_t`, and
//! accumulates the per-iteration mean vector and covariance
//! `(1/S) M_t M_t' - mu_t mu_t'`. The final statistics average over
//! iterations; only the diagonal of the covariance is kept (off-diagonals
//! are logged and discarded) and variances are floored at 1e-6.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::GeneratorWeights;
use crate::tensor::Tensor;

/// Smallest admissible per-layer variance.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Anisotropic total variation of a `[C, H, W]` image: the sum of absolute
/// horizontal and vertical neighbor differences over every channel. Returns
/// the value and its subgradient (sign of each difference, 0 at ties).
pub fn tv(x: &Tensor) -> Result<(f64, Tensor)> {
    let [c, h, w] = *x.shape() else {
        return Err(Error::shape("tv", format!("expected [C,H,W], got {:?}", x.shape())));
    };
    if h * w <= 1 {
        return Err(Error::invalid("tv", "image must have more than one pixel"));
    }
    x.ensure_finite("tv")?;
    let mut value = 0.0;
    let mut grad = Tensor::zeros(x.shape());
    let idx = |ch: usize, i: usize, j: usize| (ch * h + i) * w + j;
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                if i + 1 < h {
                    let d = x.data()[idx(ch, i + 1, j)] - x.data()[idx(ch, i, j)];
                    value += d.abs();
                    let s = sign(d);
                    grad.data_mut()[idx(ch, i + 1, j)] += s;
                    grad.data_mut()[idx(ch, i, j)] -= s;
                }
                if j + 1 < w {
                    let d = x.data()[idx(ch, i, j + 1)] - x.data()[idx(ch, i, j)];
                    value += d.abs();
                    let s = sign(d);
                    grad.data_mut()[idx(ch, i, j + 1)] += s;
                    grad.data_mut()[idx(ch, i, j)] -= s;
                }
            }
        }
    }
    Ok((value, grad))
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-layer Gaussian statistics for the learned weight penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorStats {
    /// Number of layers.
    #[serde(rename = "L")]
    pub layers: usize,
    /// Per-layer means.
    pub mu: Vec<f64>,
    /// Per-layer variances (diagonal of the covariance), floored at 1e-6.
    pub sigma_diag: Vec<f64>,
    pub meta: PriorMeta,
}

/// Provenance of estimated statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorMeta {
    /// Number of solved weight sets the estimate drew from.
    #[serde(rename = "Q")]
    pub q: usize,
    /// Samples per layer per iteration.
    #[serde(rename = "S")]
    pub s: usize,
    /// Moment-matching iterations.
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
}

impl PriorStats {
    /// Standard-normal statistics (`mu = 0`, `sigma = 1`): the penalty
    /// reduces to plain squared l2 weight decay.
    pub fn standard_normal(layers: usize) -> PriorStats {
        PriorStats {
            layers,
            mu: vec![0.0; layers],
            sigma_diag: vec![1.0; layers],
            meta: PriorMeta { q: 0, s: 0, t: 0, seed: 0 },
        }
    }

    /// Checks internal consistency: per-layer vectors match the declared
    /// layer count and every variance is strictly positive.
    pub fn validate(&self) -> Result<()> {
        self.check("prior statistics")
    }

    pub(crate) fn check(&self, op: &'static str) -> Result<()> {
        if self.mu.len() != self.layers || self.sigma_diag.len() != self.layers {
            return Err(Error::shape(
                op,
                format!(
                    "stats declare {} layers but carry {} means / {} variances",
                    self.layers,
                    self.mu.len(),
                    self.sigma_diag.len()
                ),
            ));
        }
        if let Some(s) = self.sigma_diag.iter().find(|s| !(**s > 0.0)) {
            return Err(Error::invalid(op, format!("non-positive variance {s}")));
        }
        Ok(())
    }
}

/// Learned Gaussian weight penalty: value and gradient.
///
/// Value: `sum_l (1/sigma_l) sum_{i in layer l} (w_i - mu_l)^2`; the
/// gradient of each weight is `2 (w_i - mu_l) / sigma_l`. Zero exactly when
/// every layer sits at its mean.
pub fn lr_penalty(
    weights: &GeneratorWeights,
    stats: &PriorStats,
) -> Result<(f64, GeneratorWeights)> {
    stats.check("lr_penalty")?;
    if stats.layers != weights.config.layers.len() {
        return Err(Error::shape(
            "lr_penalty",
            format!(
                "stats for {} layers, weights have {}",
                stats.layers,
                weights.config.layers.len()
            ),
        ));
    }
    let mut value = 0.0;
    let mut grad_flat = Vec::with_capacity(weights.param_count());
    for (l, params) in weights.layer_params().iter().enumerate() {
        let (mu, sigma) = (stats.mu[l], stats.sigma_diag[l]);
        for &w in params {
            let d = w - mu;
            value += d * d / sigma;
            grad_flat.push(2.0 * d / sigma);
        }
    }
    if !value.is_finite() {
        return Err(Error::non_finite("lr_penalty", format!("value {value}")));
    }
    let grad = GeneratorWeights::from_flat(&weights.config, &grad_flat)?;
    Ok((value, grad))
}

/// Estimates per-layer Gaussian statistics from solved weight sets by
/// moment matching. All sets must share one architecture.
pub fn estimate_prior(
    weight_sets: &[GeneratorWeights],
    s: usize,
    t: usize,
    seed: u64,
) -> Result<PriorStats> {
    estimate_prior_impl(weight_sets, s, t, seed, Mode::Sampled { q_seq: None })
}

/// Test hook: like [`estimate_prior`] but with the per-iteration weight-set
/// choices supplied explicitly instead of drawn from the seed stream.
#[doc(hidden)]
pub fn estimate_prior_with_q(
    weight_sets: &[GeneratorWeights],
    s: usize,
    t: usize,
    seed: u64,
    q_seq: &[usize],
) -> Result<PriorStats> {
    if q_seq.len() != t {
        return Err(Error::invalid("estimate_prior", "q sequence length must equal T"));
    }
    estimate_prior_impl(weight_sets, s, t, seed, Mode::Sampled { q_seq: Some(q_seq) })
}

/// Test hook: full enumeration instead of sampling — every iteration reads
/// each layer in order, in full, which makes the estimate exact for Q = 1.
#[doc(hidden)]
pub fn estimate_prior_enumerated(
    weight_sets: &[GeneratorWeights],
    t: usize,
    seed: u64,
) -> Result<PriorStats> {
    estimate_prior_impl(weight_sets, 0, t, seed, Mode::Enumerated)
}

enum Mode<'a> {
    Sampled { q_seq: Option<&'a [usize]> },
    Enumerated,
}

fn estimate_prior_impl(
    weight_sets: &[GeneratorWeights],
    s: usize,
    t: usize,
    seed: u64,
    mode: Mode<'_>,
) -> Result<PriorStats> {
    let q_total = weight_sets.len();
    if q_total == 0 {
        return Err(Error::invalid("estimate_prior", "no weight sets"));
    }
    if t == 0 {
        return Err(Error::invalid("estimate_prior", "T must be >= 1"));
    }
    if matches!(mode, Mode::Sampled { .. }) && s == 0 {
        return Err(Error::invalid("estimate_prior", "S must be >= 1"));
    }
    let config = &weight_sets[0].config;
    for (i, ws) in weight_sets.iter().enumerate() {
        if &ws.config != config {
            return Err(Error::invalid(
                "estimate_prior",
                format!("weight set {i} has a different architecture"),
            ));
        }
    }
    let layers = config.layers.len();
    let per_layer: Vec<Vec<Vec<f64>>> =
        weight_sets.iter().map(|ws| ws.layer_params()).collect();

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut mu_acc = vec![0.0; layers];
    // Full covariance accumulated internally; only its diagonal survives.
    let mut cov_acc = vec![0.0; layers * layers];
    for it in 0..t {
        let q = match &mode {
            Mode::Sampled { q_seq: Some(seq) } => {
                let q = seq[it];
                if q >= q_total {
                    return Err(Error::invalid(
                        "estimate_prior",
                        format!("q index {q} out of range ({q_total} sets)"),
                    ));
                }
                // Keep the stream aligned with the unconditioned call.
                let _ = rng.gen_range(0..q_total);
                q
            }
            Mode::Sampled { q_seq: None } => rng.gen_range(0..q_total),
            Mode::Enumerated => rng.gen_range(0..q_total),
        };
        // Row l of M_t: S entries of layer l (with replacement), or the
        // whole layer when enumerating.
        let rows: Vec<Vec<f64>> = (0..layers)
            .map(|l| {
                let pool = &per_layer[q][l];
                match &mode {
                    Mode::Enumerated => pool.clone(),
                    Mode::Sampled { .. } => {
                        (0..s).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
                    }
                }
            })
            .collect();
        let mu_t: Vec<f64> =
            rows.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
        for a in 0..layers {
            mu_acc[a] += mu_t[a];
            for b in 0..layers {
                // Rows may have different lengths under enumeration; pair
                // entries up to the shorter one, matching the fixed-S case
                // where all rows share a length.
                let len = rows[a].len().min(rows[b].len());
                let cross: f64 =
                    rows[a][..len].iter().zip(&rows[b][..len]).map(|(x, y)| x * y).sum();
                cov_acc[a * layers + b] += cross / len as f64 - mu_t[a] * mu_t[b];
            }
        }
    }
    let mu: Vec<f64> = mu_acc.into_iter().map(|v| v / t as f64).collect();
    let mut max_offdiag = 0.0f64;
    for a in 0..layers {
        for b in 0..layers {
            if a != b {
                max_offdiag = max_offdiag.max((cov_acc[a * layers + b] / t as f64).abs());
            }
        }
    }
    if layers > 1 {
        log::debug!("estimate_prior: discarding off-diagonal covariance (max |entry| {max_offdiag:.3e})");
    }
    let sigma_diag: Vec<f64> = (0..layers)
        .map(|l| (cov_acc[l * layers + l] / t as f64).max(SIGMA_FLOOR))
        .collect();
    Ok(PriorStats {
        layers,
        mu,
        sigma_diag,
        meta: PriorMeta { q: q_total, s, t, seed },
    })
}
