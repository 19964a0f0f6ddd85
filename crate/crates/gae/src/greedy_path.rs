//! Second-order ascent in `y` and the greedy-path machinery built on it.
//!
//! [`run_greedy_path`] climbs `f(x, ·)` with gradient steps `y += mu1 * g`
//! while `||g|| > eps'`, and curvature steps `y += mu3 * a * v` along an
//! approximate top eigenvector while `lambda > sqrt(L * eps')`, stopping as
//! soon as neither applies — at which point the endpoint is an approximate
//! local maximum and the piecewise-linear iterate path is a greedy path.
//! [`verify_greedy_path`] re-checks that property from the oracles alone,
//! and [`greedy_ensemble_max`] lower-bounds the greedy max by restarting the
//! ascent with randomized (still valid) curvature branches.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GaeError, Result};
use crate::hyper::HyperParams;
use crate::linalg;
use crate::oracle::Problem;
use crate::par;

pub use crate::linalg::top_eigenpair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Gradient,
    Curvature,
}

/// One ascent step. `grad_norm` is taken at `from`; `top_eig` is the
/// eigenvalue estimate that justified a curvature step.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PathStep {
    pub kind: StepKind,
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub f_before: f64,
    pub f_after: f64,
    pub grad_norm: f64,
    pub top_eig: Option<f64>,
}

/// The full iterate path for a fixed `x`, with the step sizes actually used
/// (`mu3` is capped per call at `sqrt(eps'/L)/2` so the curvature-step gain
/// bound holds at every requested `eps'`).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PathTrace {
    pub x: Vec<f64>,
    pub steps: Vec<PathStep>,
    pub y_end: Vec<f64>,
    pub eps_prime: f64,
    pub mu1: f64,
    pub mu3: f64,
}

/// Result of checking a trace against the greedy-path conditions at level
/// `eps`: along every segment, slope `>= -eps` and (slope `> eps` or
/// directional curvature `> sqrt(L*eps)`), to tolerance `1e-9 * (1 + b)`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PathCheck {
    pub ok: bool,
    pub worst_slope: f64,
    /// Smallest directional curvature among sampled points that needed the
    /// curvature branch; infinite when the slope branch always held.
    pub worst_curvature: f64,
    pub violating_segment: Option<usize>,
}

pub(crate) enum AscentMode<'a> {
    Deterministic,
    /// Randomize valid choices: any eigenpair above the curvature threshold,
    /// and a random sign when the gradient gives no preference.
    Randomized(&'a mut ChaCha8Rng),
}

pub(crate) struct Ascent {
    pub y_end: Vec<f64>,
    pub steps: Vec<PathStep>,
    pub mu3: f64,
}

/// Core ascent loop. With `record = false` no value-oracle calls are made
/// and `steps` stays empty.
pub(crate) fn ascend(
    problem: &Problem,
    x: &[f64],
    y0: &[f64],
    eps_prime: f64,
    hp: &HyperParams,
    record: bool,
    mut mode: AscentMode,
) -> Result<Ascent> {
    if !(eps_prime > 0.0) {
        return Err(GaeError::Validation("eps_prime must be positive".into()));
    }
    if x.len() != problem.d || y0.len() != problem.d {
        return Err(GaeError::Validation("x/y dimension mismatch".into()));
    }
    let d = problem.d;
    let l = problem.l;
    let mu1 = hp.mu1;
    let mu3 = hp.mu3.min(0.5 * (eps_prime / l).sqrt());
    let curv_threshold = (l * eps_prime).sqrt();
    // each step gains at least delta_gain, so 4b/delta_gain steps cannot be
    // exceeded unless (b, L) are wrong or an oracle is buggy
    let delta_gain = (0.5 * mu1 * eps_prime * eps_prime)
        .min(0.25 * mu3 * mu3 * curv_threshold);
    let cap = (4.0 * problem.b / delta_gain).ceil() as u64 + 1;

    let mut y = y0.to_vec();
    let mut steps = Vec::new();
    let mut n_steps = 0u64;
    let mut f_curr = if record { problem.value(x, &y) } else { 0.0 };
    loop {
        if n_steps > cap {
            return Err(GaeError::Convergence(format!(
                "ascent exceeded {cap} steps at eps' = {eps_prime}; declared (b, L) = ({}, {}) \
                 are likely not valid bounds or an oracle is inconsistent",
                problem.b, problem.l
            )));
        }
        let g = problem.grad_y(x, &y);
        let gn = linalg::norm(&g);
        let (to, kind, top_eig) = if gn > eps_prime {
            (linalg::axpy(&y, mu1, &g), StepKind::Gradient, None)
        } else {
            let h = problem.hess_y(x, &y);
            let (lambda, v) = match &mut mode {
                AscentMode::Deterministic => linalg::top_eigenpair(&h, d, hp.mu4)?,
                AscentMode::Randomized(rng) => {
                    let (vals, vecs) = linalg::jacobi_eigen(&h, d)?;
                    let qualifying: Vec<usize> =
                        (0..d).filter(|&k| vals[k] > curv_threshold).collect();
                    match qualifying.as_slice() {
                        [] => (vals[0], vecs[..d].to_vec()),
                        ks => {
                            let k = ks[rng.random_range(0..ks.len())];
                            (vals[k], vecs[k * d..(k + 1) * d].to_vec())
                        }
                    }
                }
            };
            if lambda <= curv_threshold {
                break;
            }
            let gv = linalg::dot(&g, &v);
            // sign(0) := +1 keeps ties deterministic
            let mut a = if gv >= 0.0 { 1.0 } else { -1.0 };
            if let AscentMode::Randomized(rng) = &mut mode {
                if gv.abs() < 1e-9 && rng.random_range(0..2) == 1 {
                    a = -a;
                }
            }
            (linalg::axpy(&y, mu3 * a, &v), StepKind::Curvature, Some(lambda))
        };
        if record {
            let f_after = problem.value(x, &to);
            steps.push(PathStep {
                kind,
                from: y.clone(),
                to: to.clone(),
                f_before: f_curr,
                f_after,
                grad_norm: gn,
                top_eig,
            });
            f_curr = f_after;
        }
        y = to;
        n_steps += 1;
    }
    Ok(Ascent { y_end: y, steps, mu3 })
}

/// Endpoint-only ascent for inner loops (no trace, no value-oracle calls).
pub(crate) fn ascend_endpoint(
    problem: &Problem,
    x: &[f64],
    y0: &[f64],
    eps_prime: f64,
    hp: &HyperParams,
) -> Result<Vec<f64>> {
    Ok(ascend(problem, x, y0, eps_prime, hp, false, AscentMode::Deterministic)?.y_end)
}

/// Climb `f(x, ·)` from `y0` to an approximate local maximum: at the
/// returned endpoint, `||grad_y f|| <= eps'` and the top-eigenvalue estimate
/// is `<= sqrt(L * eps')` (so the true one is within `mu4` of that).
pub fn run_greedy_path(
    problem: &Problem,
    x: &[f64],
    y0: &[f64],
    eps_prime: f64,
    hp: &HyperParams,
) -> Result<(Vec<f64>, PathTrace)> {
    hp.validate()?;
    let out = ascend(problem, x, y0, eps_prime, hp, true, AscentMode::Deterministic)?;
    let trace = PathTrace {
        x: x.to_vec(),
        steps: out.steps,
        y_end: out.y_end.clone(),
        eps_prime,
        mu1: hp.mu1,
        mu3: out.mu3,
    };
    Ok((out.y_end, trace))
}

/// Check the greedy-path conditions at level `eps` by sampling
/// `samples_per_segment` points (endpoints included) along every segment and
/// querying the gradient and Hessian oracles there.
pub fn verify_greedy_path(
    problem: &Problem,
    trace: &PathTrace,
    eps: f64,
    samples_per_segment: usize,
) -> Result<PathCheck> {
    if samples_per_segment < 2 {
        return Err(GaeError::Validation("samples_per_segment must be >= 2".into()));
    }
    let tol = 1e-9 * (1.0 + problem.b);
    let curv_threshold = (problem.l * eps).sqrt();
    let mut worst_slope = f64::INFINITY;
    let mut worst_curvature = f64::INFINITY;
    let mut violating_segment = None;
    for (idx, step) in trace.steps.iter().enumerate() {
        let dir = linalg::sub(&step.to, &step.from);
        let len = linalg::norm(&dir);
        if len == 0.0 {
            continue;
        }
        let u = linalg::scale(&dir, 1.0 / len);
        for s in 0..samples_per_segment {
            let t = len * s as f64 / (samples_per_segment - 1) as f64;
            let p = linalg::axpy(&step.from, t, &u);
            let slope = linalg::dot(&problem.grad_y(&trace.x, &p), &u);
            worst_slope = worst_slope.min(slope);
            let mut point_ok = slope >= -eps - tol;
            if point_ok && slope <= eps - tol {
                let h = problem.hess_y(&trace.x, &p);
                let curv = linalg::dot(&u, &linalg::matvec(&h, problem.d, &u));
                worst_curvature = worst_curvature.min(curv);
                point_ok = curv > curv_threshold - tol;
            }
            if !point_ok && violating_segment.is_none() {
                violating_segment = Some(idx);
            }
        }
    }
    Ok(PathCheck {
        ok: violating_segment.is_none(),
        worst_slope: if worst_slope.is_finite() { worst_slope } else { f64::INFINITY },
        worst_curvature,
        violating_segment,
    })
}

/// Empirical lower bound on the greedy max `g_eps(x, y0)`: the best endpoint
/// value over `n_restarts` ascents. Restart 0 is the deterministic path (so
/// the bound dominates `eval_h` exactly); later restarts randomize curvature
/// branches, which keeps every path valid while sampling distinct endpoints.
pub fn greedy_ensemble_max(
    problem: &Problem,
    x: &[f64],
    y0: &[f64],
    eps: f64,
    n_restarts: usize,
    seed: u64,
    hp: &HyperParams,
) -> Result<f64> {
    if n_restarts < 1 {
        return Err(GaeError::Validation("n_restarts must be >= 1".into()));
    }
    let eps_prime = (1.0 + hp.delta) * eps;
    let values = par::indexed_map(n_restarts, |r| -> Result<f64> {
        let out = if r == 0 {
            ascend(problem, x, y0, eps_prime, hp, false, AscentMode::Deterministic)?
        } else {
            let mut rng = par::stream_rng(seed, r as u64);
            ascend(problem, x, y0, eps_prime, hp, false, AscentMode::Randomized(&mut rng))?
        };
        Ok(problem.value(x, &out.y_end))
    });
    let mut best = f64::NEG_INFINITY;
    for v in values {
        best = best.max(v?);
    }
    Ok(best)
}
