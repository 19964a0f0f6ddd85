//! The computable surrogate `h` and its truncated Gaussian smoothing.
//!
//! `h(x, y)` is `f` at the endpoint of the ascent started from `y` under `x`
//! ([`eval_h`]). The min-player never differentiates it; instead the
//! zeroth-order sample `gamma = (min(h(w + sigma*zeta, y), c) - c_ref) *
//! zeta / sigma` is an unbiased gradient estimate of the truncated smoothed
//! surrogate `E[min(h(w + sigma*zeta, y), c)]` for any reference `c_ref`
//! that is independent of `zeta` ([`stoch_grad`]). Truncating at the anchor
//! value `c` is what keeps exact local minima from drifting under the
//! smoothing.
//!
//! Monte Carlo estimators draw one counter-based substream per sample index
//! and accumulate block-wise in index order, so results are bit-identical
//! for a given `(seed, n)` regardless of thread count.

use rand_chacha::ChaCha8Rng;

use crate::error::{GaeError, Result};
use crate::greedy_path::ascend_endpoint;
use crate::hyper::HyperParams;
use crate::oracle::Problem;
use crate::par;

/// Truncation anchor: smoothing clamps the surrogate at `c`, normally the
/// surrogate value at the anchor point. `c = +inf` disables truncation
/// (plain smoothing); finite levels satisfy `|c| <= b`.
#[derive(Debug, Clone)]
pub struct Anchor {
    pub x_hat: Vec<f64>,
    pub c: f64,
}

impl Anchor {
    pub fn new(x_hat: Vec<f64>, c: f64) -> Result<Self> {
        if c.is_nan() {
            return Err(GaeError::Validation("truncation level must not be NaN".into()));
        }
        Ok(Anchor { x_hat, c })
    }

    /// Plain (untruncated) smoothing.
    pub fn untruncated(x_hat: Vec<f64>) -> Self {
        Anchor { x_hat, c: f64::INFINITY }
    }
}

/// One zeroth-order gradient sample.
#[derive(Debug, Clone)]
pub struct SgSample {
    pub zeta: Vec<f64>,
    pub h_perturbed: f64,
    pub gamma: Vec<f64>,
}

/// `h(x, y)`: run the ascent from `y` at `eps' = (1 + delta) * eps_circ` and
/// return `f` at its endpoint, plus the endpoint itself.
pub fn eval_h(
    problem: &Problem,
    x: &[f64],
    y: &[f64],
    eps_circ: f64,
    hp: &HyperParams,
) -> Result<(f64, Vec<f64>)> {
    if !(eps_circ > 0.0) {
        return Err(GaeError::Validation("eps_circ must be positive".into()));
    }
    let y_end = ascend_endpoint(problem, x, y, (1.0 + hp.delta) * eps_circ, hp)?;
    let value = problem.value(x, &y_end);
    Ok((value, y_end))
}

/// Draw `zeta ~ N(0, I)` and form the zeroth-order gradient sample at `w`.
/// `c_ref` is the caller's precomputed reference (one `eval_h` at `w`
/// suffices for a whole batch, mirroring the solver's reuse of the previous
/// surrogate value).
#[allow(clippy::too_many_arguments)]
pub fn stoch_grad(
    problem: &Problem,
    anchor: &Anchor,
    w: &[f64],
    y: &[f64],
    sigma: f64,
    eps_circ: f64,
    hp: &HyperParams,
    c_ref: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SgSample> {
    if !(sigma > 0.0) {
        return Err(GaeError::Validation("sigma must be positive".into()));
    }
    let zeta = par::normal_vec(rng, problem.d);
    let xp: Vec<f64> = w.iter().zip(&zeta).map(|(wi, z)| wi + sigma * z).collect();
    let (h_perturbed, _) = eval_h(problem, &xp, y, eps_circ, hp)?;
    let scale = (h_perturbed.min(anchor.c) - c_ref) / sigma;
    let gamma = zeta.iter().map(|z| scale * z).collect();
    Ok(SgSample { zeta, h_perturbed, gamma })
}

fn reference_level(
    problem: &Problem,
    anchor: &Anchor,
    w: &[f64],
    y: &[f64],
    eps_circ: f64,
    hp: &HyperParams,
) -> Result<f64> {
    let (hw, _) = eval_h(problem, w, y, eps_circ, hp)?;
    Ok(hw.min(anchor.c))
}

const MC_BLOCK: usize = 256;

/// Monte Carlo mean and per-coordinate standard error of the zeroth-order
/// gradient over `n` independent samples.
#[allow(clippy::too_many_arguments)]
pub fn mc_smoothed_grad(
    problem: &Problem,
    anchor: &Anchor,
    w: &[f64],
    y: &[f64],
    sigma: f64,
    eps_circ: f64,
    hp: &HyperParams,
    n: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 100 {
        return Err(GaeError::Validation("mc_smoothed_grad needs n >= 100".into()));
    }
    let d = problem.d;
    let c_ref = reference_level(problem, anchor, w, y, eps_circ, hp)?;
    let blocks = n.div_ceil(MC_BLOCK);
    let partials = par::indexed_map(blocks, |blk| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut sum = vec![0.0; d];
        let mut sumsq = vec![0.0; d];
        let lo = blk * MC_BLOCK;
        let hi = ((blk + 1) * MC_BLOCK).min(n);
        for idx in lo..hi {
            let mut rng = par::stream_rng(seed, idx as u64);
            let s = stoch_grad(problem, anchor, w, y, sigma, eps_circ, hp, c_ref, &mut rng)?;
            for i in 0..d {
                sum[i] += s.gamma[i];
                sumsq[i] += s.gamma[i] * s.gamma[i];
            }
        }
        Ok((sum, sumsq))
    });
    let mut sum = vec![0.0; d];
    let mut sumsq = vec![0.0; d];
    for p in partials {
        let (s, sq) = p?;
        for i in 0..d {
            sum[i] += s[i];
            sumsq[i] += sq[i];
        }
    }
    let nf = n as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let stderr = (0..d)
        .map(|i| {
            let var = ((sumsq[i] - nf * mean[i] * mean[i]) / (nf - 1.0)).max(0.0);
            (var / nf).sqrt()
        })
        .collect();
    Ok((mean, stderr))
}

/// Second-order Gaussian-smoothing estimator: the symmetrized mean of
/// `((zeta zeta^T - I) / sigma^2) * (min(h(w + sigma*zeta, y), c) - c_ref)`
/// estimates the Hessian of the truncated smoothed surrogate. Subtracting
/// `c_ref` leaves the expectation unchanged (`E[zeta zeta^T - I] = 0`) and
/// shrinks the variance enough for the certifier's bands to be decisive.
/// Returns the `d x d` estimate and the largest per-entry standard error.
#[allow(clippy::too_many_arguments)]
pub fn mc_smoothed_hess(
    problem: &Problem,
    anchor: &Anchor,
    w: &[f64],
    y: &[f64],
    sigma: f64,
    eps_circ: f64,
    hp: &HyperParams,
    n: usize,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    if n < 1000 {
        return Err(GaeError::Validation("mc_smoothed_hess needs n >= 1000".into()));
    }
    let d = problem.d;
    let c_ref = reference_level(problem, anchor, w, y, eps_circ, hp)?;
    let sig2 = sigma * sigma;
    let blocks = n.div_ceil(MC_BLOCK);
    let partials = par::indexed_map(blocks, |blk| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut sum = vec![0.0; d * d];
        let mut sumsq = vec![0.0; d * d];
        let lo = blk * MC_BLOCK;
        let hi = ((blk + 1) * MC_BLOCK).min(n);
        for idx in lo..hi {
            let mut rng = par::stream_rng(seed, idx as u64);
            let s = stoch_grad(problem, anchor, w, y, sigma, eps_circ, hp, c_ref, &mut rng)?;
            let t = s.h_perturbed.min(anchor.c) - c_ref;
            for i in 0..d {
                for j in 0..d {
                    let outer = s.zeta[i] * s.zeta[j] - if i == j { 1.0 } else { 0.0 };
                    let m = outer / sig2 * t;
                    sum[i * d + j] += m;
                    sumsq[i * d + j] += m * m;
                }
            }
        }
        Ok((sum, sumsq))
    });
    let mut sum = vec![0.0; d * d];
    let mut sumsq = vec![0.0; d * d];
    for p in partials {
        let (s, sq) = p?;
        for i in 0..d * d {
            sum[i] += s[i];
            sumsq[i] += sq[i];
        }
    }
    let nf = n as f64;
    let mut mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    // symmetrize; sampling noise breaks exact symmetry
    for i in 0..d {
        for j in (i + 1)..d {
            let m = 0.5 * (mean[i * d + j] + mean[j * d + i]);
            mean[i * d + j] = m;
            mean[j * d + i] = m;
        }
    }
    let mut worst_se = 0.0f64;
    for i in 0..d * d {
        let m = sum[i] / nf;
        let var = ((sumsq[i] - nf * m * m) / (nf - 1.0)).max(0.0);
        worst_se = worst_se.max((var / nf).sqrt());
    }
    Ok((mean, worst_se))
}
