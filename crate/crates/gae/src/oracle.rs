//! Function-oracle abstraction and the built-in problem zoo.
//!
//! A [`Problem`] bundles a value oracle, the max-player's gradient and
//! Hessian oracles, and the declared constants `b` (uniform bound on `|f|`)
//! and `l` (Lipschitz constant of the Hessian). The solver never queries
//! x-derivatives. Oracles are pure and safe to call from multiple threads;
//! the atomic call counters exist only for reporting.
//!
//! Declared `(b, l)` for transcendental entries are conservative termwise
//! bounds; each constructor documents its region of interest, the box used
//! by randomized tests (the functions themselves are defined on all of R^d).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{GaeError, Result};
use crate::linalg;

type ValueFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;
type HessFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;
type ArgFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Identifiers accepted by [`make_problem`].
pub const ZOO_IDS: [&str; 8] = [
    "ex22",
    "fig4",
    "quad_scsc",
    "cosine1d",
    "concquad",
    "shiftmin1d",
    "mirror_bilinear",
    "constant",
];

/// A point `(x, y)` with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Point {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(GaeError::Validation("point has non-finite entries".into()));
        }
        Ok(Point { x, y })
    }
}

const COUNTER_SHARDS: usize = 16;

/// One cache line per shard; each thread sticks to its own shard so the hot
/// oracle path never bounces a line between cores.
#[derive(Debug, Default)]
#[repr(align(64))]
struct CounterShard {
    value: AtomicU64,
    grad_y: AtomicU64,
    hess_y: AtomicU64,
}

#[derive(Debug, Default)]
pub struct OracleCounters {
    shards: [CounterShard; COUNTER_SHARDS],
}

fn shard_index() -> usize {
    use std::sync::atomic::AtomicUsize;
    static NEXT: AtomicUsize = AtomicUsize::new(0);
    thread_local! {
        static SHARD: usize = NEXT.fetch_add(1, Ordering::Relaxed) % COUNTER_SHARDS;
    }
    SHARD.with(|s| *s)
}

impl OracleCounters {
    fn bump(&self, pick: impl Fn(&CounterShard) -> &AtomicU64) {
        pick(&self.shards[shard_index()]).fetch_add(1, Ordering::Relaxed);
    }

    fn total(&self, pick: impl Fn(&CounterShard) -> &AtomicU64) -> u64 {
        self.shards.iter().map(|s| pick(s).load(Ordering::Relaxed)).sum()
    }
}

/// Snapshot of oracle-call totals by kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct OracleCounts {
    pub value: u64,
    pub grad_y: u64,
    pub hess_y: u64,
}

impl std::ops::Sub for OracleCounts {
    type Output = OracleCounts;
    fn sub(self, rhs: OracleCounts) -> OracleCounts {
        OracleCounts {
            value: self.value - rhs.value,
            grad_y: self.grad_y - rhs.grad_y,
            hess_y: self.hess_y - rhs.hess_y,
        }
    }
}

/// Analytic best responses, available on certification-only problems.
#[derive(Clone)]
pub struct BestResponse {
    /// `argmax_z f(x, z)`.
    pub argmax_z: Arc<ArgFn>,
    /// `argmin_w f(w, y)`.
    pub argmin_w: Arc<ArgFn>,
}

/// An oracle bundle: value, `∇_y f`, `∇²_y f`, and declared `(b, l)`.
#[derive(Clone)]
pub struct Problem {
    pub id: String,
    /// Dimension of each of `x` and `y`.
    pub d: usize,
    /// Uniform bound: `|f| <= b` on the region of interest.
    pub b: f64,
    /// Lipschitz constant of the full Hessian.
    pub l: f64,
    /// Box half-width for randomized tests (region of interest).
    pub roi_halfwidth: f64,
    value: Arc<ValueFn>,
    grad_y: Arc<GradFn>,
    hess_y: Arc<HessFn>,
    best_response: Option<BestResponse>,
    counters: Arc<OracleCounters>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("id", &self.id)
            .field("d", &self.d)
            .field("b", &self.b)
            .field("l", &self.l)
            .finish()
    }
}

impl Problem {
    pub fn new(
        id: &str,
        d: usize,
        b: f64,
        l: f64,
        value: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        grad_y: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        hess_y: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if d == 0 {
            return Err(GaeError::Validation("d must be positive".into()));
        }
        if !(b > 0.0) || !(l > 0.0) {
            return Err(GaeError::Validation("b and l must be positive".into()));
        }
        Ok(Problem {
            id: id.to_string(),
            d,
            b,
            l,
            roi_halfwidth: 3.0,
            value: Arc::new(value),
            grad_y: Arc::new(grad_y),
            hess_y: Arc::new(hess_y),
            best_response: None,
            counters: Arc::new(OracleCounters::default()),
        })
    }

    pub fn with_best_response(
        mut self,
        argmax_z: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        argmin_w: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.best_response = Some(BestResponse {
            argmax_z: Arc::new(argmax_z),
            argmin_w: Arc::new(argmin_w),
        });
        self
    }

    fn with_roi(mut self, halfwidth: f64) -> Self {
        self.roi_halfwidth = halfwidth;
        self
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.counters.bump(|s| &s.value);
        (self.value)(x, y)
    }

    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.counters.bump(|s| &s.grad_y);
        (self.grad_y)(x, y)
    }

    /// Row-major `d x d` symmetric matrix.
    pub fn hess_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.counters.bump(|s| &s.hess_y);
        (self.hess_y)(x, y)
    }

    pub fn best_response(&self) -> Option<&BestResponse> {
        self.best_response.as_ref()
    }

    pub fn oracle_counts(&self) -> OracleCounts {
        OracleCounts {
            value: self.counters.total(|s| &s.value),
            grad_y: self.counters.total(|s| &s.grad_y),
            hess_y: self.counters.total(|s| &s.hess_y),
        }
    }
}

/// Flat key-value parameter map for zoo constructors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProblemParams {
    entries: BTreeMap<String, ParamValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl ProblemParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_scalar(&mut self, key: &str, v: f64) -> &mut Self {
        self.entries.insert(key.into(), ParamValue::Scalar(v));
        self
    }

    pub fn set_vector(&mut self, key: &str, v: Vec<f64>) -> &mut Self {
        self.entries.insert(key.into(), ParamValue::Vector(v));
        self
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &ParamValue)> {
        self.entries.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn scalar(&self, key: &str, default: f64) -> Result<f64> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(ParamValue::Scalar(v)) if v.is_finite() => Ok(*v),
            Some(_) => Err(GaeError::Validation(format!(
                "parameter `{key}` must be a finite scalar"
            ))),
        }
    }

    fn dim(&self, default: usize) -> Result<usize> {
        let d = self.scalar("d", default as f64)?;
        if d < 1.0 || d.fract() != 0.0 {
            return Err(GaeError::Validation("parameter `d` must be a positive integer".into()));
        }
        Ok(d as usize)
    }

    fn matrix(&self, key: &str, d: usize) -> Result<Vec<f64>> {
        match self.entries.get(key) {
            None => {
                let mut m = vec![0.0; d * d];
                for i in 0..d {
                    m[i * d + i] = 1.0;
                }
                Ok(m)
            }
            Some(ParamValue::Vector(v)) if v.len() == d * d => Ok(v.clone()),
            Some(ParamValue::Scalar(s)) => {
                let mut m = vec![0.0; d * d];
                for i in 0..d {
                    m[i * d + i] = *s;
                }
                Ok(m)
            }
            Some(_) => Err(GaeError::Validation(format!(
                "parameter `{key}` must have {} entries (row-major {d}x{d})",
                d * d
            ))),
        }
    }
}

/// `L1 <= 4 b^(2/3) L^(1/3)` and `L2 <= 2 b^(1/3) L^(2/3)`: the function and
/// gradient Lipschitz constants implied by a uniform bound plus a
/// Hessian-Lipschitz bound.
pub fn derive_lipschitz(b: f64, l: f64) -> Result<(f64, f64)> {
    if !(b > 0.0) || !(l > 0.0) {
        return Err(GaeError::Validation("b and l must be positive".into()));
    }
    let l1 = 4.0 * b.powf(2.0 / 3.0) * l.powf(1.0 / 3.0);
    let l2 = 2.0 * b.powf(1.0 / 3.0) * l.powf(2.0 / 3.0);
    Ok((l1, l2))
}

/// Max absolute error between the analytic `∇_y f` and a central difference
/// of the value oracle.
pub fn fd_check_grad(problem: &Problem, p: &Point, step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(GaeError::Validation("step must be positive".into()));
    }
    let g = problem.grad_y(&p.x, &p.y);
    let mut worst = 0.0f64;
    for i in 0..problem.d {
        let mut yp = p.y.clone();
        let mut ym = p.y.clone();
        yp[i] += step;
        ym[i] -= step;
        let fd = (problem.value(&p.x, &yp) - problem.value(&p.x, &ym)) / (2.0 * step);
        worst = worst.max((g[i] - fd).abs());
    }
    Ok(worst)
}

/// Same routine one derivative up: `∇²_y f` against a central difference of
/// the gradient oracle.
pub fn fd_check_hess(problem: &Problem, p: &Point, step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(GaeError::Validation("step must be positive".into()));
    }
    let d = problem.d;
    let h = problem.hess_y(&p.x, &p.y);
    let mut worst = 0.0f64;
    for i in 0..d {
        let mut yp = p.y.clone();
        let mut ym = p.y.clone();
        yp[i] += step;
        ym[i] -= step;
        let gp = problem.grad_y(&p.x, &yp);
        let gm = problem.grad_y(&p.x, &ym);
        for j in 0..d {
            let fd = (gp[j] - gm[j]) / (2.0 * step);
            worst = worst.max((h[i * d + j] - fd).abs());
        }
    }
    Ok(worst)
}

/// Build a registered zoo problem.
pub fn make_problem(id: &str, params: &ProblemParams) -> Result<Problem> {
    match id {
        "ex22" => ex22(params),
        "fig4" => fig4(params),
        "quad_scsc" => quad_scsc(params),
        "cosine1d" => cosine1d(params),
        "concquad" => concquad(params),
        "shiftmin1d" => shiftmin1d(params),
        "mirror_bilinear" => mirror_bilinear(params),
        "constant" => constant(params),
        other => Err(GaeError::UnknownProblem(other.to_string())),
    }
}

/// `f(x,y) = cos(x+y) sin(2x+2y) - exp(-x^2)`, d = 1.
///
/// The trig part is `(sin 3u + sin u)/2` with `u = x + y`; termwise third
/// derivatives give a Hessian-Lipschitz bound of `2*sqrt(2)*14 + 4 < 44`.
/// Region of interest: `[-4, 4]^2`.
fn ex22(params: &ProblemParams) -> Result<Problem> {
    if !params.is_empty() {
        return Err(GaeError::Validation("ex22 takes no parameters".into()));
    }
    let trig = |u: f64| 0.5 * ((3.0 * u).sin() + u.sin());
    let trig_d1 = |u: f64| 0.5 * (3.0 * (3.0 * u).cos() + u.cos());
    let trig_d2 = |u: f64| -0.5 * (9.0 * (3.0 * u).sin() + u.sin());
    Ok(Problem::new(
        "ex22",
        1,
        2.0,
        44.0,
        move |x, y| trig(x[0] + y[0]) - (-x[0] * x[0]).exp(),
        move |x, y| vec![trig_d1(x[0] + y[0])],
        move |x, y| vec![trig_d2(x[0] + y[0])],
    )?
    .with_roi(4.0))
}

/// Periodic Gaussian landscape, d = 1:
/// `f = sum_k 1.2 e^{-(x+y+2+9k)^2} + 2 e^{-(x+y-2+9k)^2} - e^{-(x+6k)^2}`.
///
/// Each sum keeps exactly the terms with `|s + c + period*k| <= 8`, so the
/// omitted tail is below `e^{-64} < 1e-27` at the evaluation point. Region
/// of interest: `[-6, 6]^2`.
fn fig4(params: &ProblemParams) -> Result<Problem> {
    if !params.is_empty() {
        return Err(GaeError::Validation("fig4 takes no parameters".into()));
    }
    // sum of a*e^{-(s+c+p*k)^2} and its first two derivatives in s
    fn gsum(s: f64, amp: f64, c: f64, period: f64, deriv: u8) -> f64 {
        let k_lo = ((-8.0 - s - c) / period).ceil() as i64;
        let k_hi = ((8.0 - s - c) / period).floor() as i64;
        (k_lo..=k_hi)
            .map(|k| {
                let t = s + c + period * (k as f64);
                let e = (-t * t).exp();
                match deriv {
                    0 => amp * e,
                    1 => amp * (-2.0 * t) * e,
                    _ => amp * (4.0 * t * t - 2.0) * e,
                }
            })
            .sum()
    }
    let a = |s: f64, deriv: u8| gsum(s, 1.2, 2.0, 9.0, deriv) + gsum(s, 2.0, -2.0, 9.0, deriv);
    let c = |x: f64, deriv: u8| gsum(x, 1.0, 0.0, 6.0, deriv);
    Ok(Problem::new(
        "fig4",
        1,
        2.5,
        40.0,
        move |x, y| a(x[0] + y[0], 0) - c(x[0], 0),
        move |x, y| vec![a(x[0] + y[0], 1)],
        move |x, y| vec![a(x[0] + y[0], 2)],
    )?
    .with_roi(6.0))
}

/// `f = (alpha/2)||x||^2 - (alpha/2)||y||^2 + x^T B y` with analytic best
/// responses `z*(x) = B^T x / alpha` and `w*(y) = -B y / alpha`.
///
/// The Hessian is constant, so any positive `l` is valid; `b` bounds `|f|`
/// on the `[-10, 10]` test box.
fn quad_scsc(params: &ProblemParams) -> Result<Problem> {
    let alpha = params.scalar("alpha", 1.0)?;
    if alpha <= 0.0 {
        return Err(GaeError::Validation("alpha must be positive".into()));
    }
    let d = params.dim(1)?;
    let bmat = params.matrix("b_matrix", d)?;
    let b_frob = bmat.iter().map(|v| v * v).sum::<f64>().sqrt();
    let bound = 100.0 * d as f64 * (alpha + b_frob);
    let bm = Arc::new(bmat);
    let bm_v = bm.clone();
    let bm_g = bm.clone();
    let bm_z = bm.clone();
    let bm_w = bm.clone();
    Ok(Problem::new(
        "quad_scsc",
        d,
        bound,
        1.0,
        move |x, y| {
            let sx: f64 = x.iter().map(|v| v * v).sum();
            let sy: f64 = y.iter().map(|v| v * v).sum();
            let cross: f64 = (0..d)
                .map(|i| x[i] * linalg::dot(&bm_v[i * d..(i + 1) * d], y))
                .sum();
            0.5 * alpha * sx - 0.5 * alpha * sy + cross
        },
        move |x, y| {
            // -alpha y + B^T x
            (0..d)
                .map(|j| {
                    let btx: f64 = (0..d).map(|i| bm_g[i * d + j] * x[i]).sum();
                    -alpha * y[j] + btx
                })
                .collect()
        },
        move |_x, _y| {
            let mut h = vec![0.0; d * d];
            for i in 0..d {
                h[i * d + i] = -alpha;
            }
            h
        },
    )?
    .with_best_response(
        move |x| {
            (0..d)
                .map(|j| (0..d).map(|i| bm_z[i * d + j] * x[i]).sum::<f64>() / alpha)
                .collect()
        },
        move |y| {
            (0..d)
                .map(|i| -linalg::dot(&bm_w[i * d..(i + 1) * d], y) / alpha)
                .collect()
        },
    ))
}

/// `f(x, y) = cos(y)`, d = 1. `b = 1`, `l = 1` exactly.
fn cosine1d(params: &ProblemParams) -> Result<Problem> {
    if !params.is_empty() {
        return Err(GaeError::Validation("cosine1d takes no parameters".into()));
    }
    Ok(Problem::new(
        "cosine1d",
        1,
        1.0,
        1.0,
        |_x, y| y[0].cos(),
        |_x, y| vec![-y[0].sin()],
        |_x, y| vec![-y[0].cos()],
    )?
    .with_roi(6.0))
}

/// `f(x, y) = -||y||^2 / 2`, constant in x. Constant Hessian, so `l = 1` is
/// a valid (slack) bound; `b` covers the `[-10, 10]` test box.
fn concquad(params: &ProblemParams) -> Result<Problem> {
    let d = params.dim(1)?;
    Ok(Problem::new(
        "concquad",
        d,
        50.0 * d as f64 + 1.0,
        1.0,
        |_x, y| -0.5 * y.iter().map(|v| v * v).sum::<f64>(),
        |_x, y| y.iter().map(|v| -v).collect(),
        move |_x, _y| {
            let mut h = vec![0.0; d * d];
            for i in 0..d {
                h[i * d + i] = -1.0;
            }
            h
        },
    )?
    .with_roi(5.0))
}

/// The shifted-minimum staircase as a y-independent objective, d = 1:
/// `psi(x) = x - 3x*1(x<0) + 1(x<0)` (strict indicator, so `psi(0) = 0` and
/// `x = 0` is the exact global minimum, `psi >= 0` everywhere).
///
/// The value is discontinuous in x at 0; this entry exists to exercise the
/// truncated-smoothing machinery, which never differentiates in x. `l` is
/// nominal.
fn shiftmin1d(params: &ProblemParams) -> Result<Problem> {
    if !params.is_empty() {
        return Err(GaeError::Validation("shiftmin1d takes no parameters".into()));
    }
    Problem::new(
        "shiftmin1d",
        1,
        21.0,
        1.0,
        |x, _y| shifted_staircase(x[0]),
        |_x, _y| vec![0.0],
        |_x, _y| vec![0.0],
    )
}

pub(crate) fn shifted_staircase(x: f64) -> f64 {
    if x < 0.0 {
        x - 3.0 * x + 1.0
    } else {
        x
    }
}

/// Mirrored bilinear game `f = sum_i m(y_i)^2 - 2 m(x_i) m(y_i)` where `m`
/// is the period-4 mirror map (triangle wave), made C^2 by quartic caps of
/// radius 0.25 at the fold points. Termwise third-derivative bounds give
/// `l < 250`; `|f| <= 3d`. Region of interest: `[-2, 2]^{2d}`.
fn mirror_bilinear(params: &ProblemParams) -> Result<Problem> {
    let d = params.dim(1)?;
    Ok(Problem::new(
        "mirror_bilinear",
        d,
        3.0 * d as f64,
        250.0,
        |x, y| {
            (0..x.len())
                .map(|i| {
                    let (mx, _, _) = mirror_map(x[i]);
                    let (my, _, _) = mirror_map(y[i]);
                    my * my - 2.0 * mx * my
                })
                .sum()
        },
        |x, y| {
            (0..x.len())
                .map(|i| {
                    let (mx, _, _) = mirror_map(x[i]);
                    let (my, dmy, _) = mirror_map(y[i]);
                    2.0 * (my - mx) * dmy
                })
                .collect()
        },
        move |x, y| {
            let mut h = vec![0.0; d * d];
            for i in 0..d {
                let (mx, _, _) = mirror_map(x[i]);
                let (my, dmy, d2my) = mirror_map(y[i]);
                h[i * d + i] = 2.0 * dmy * dmy + 2.0 * (my - mx) * d2my;
            }
            h
        },
    )?
    .with_roi(2.0))
}

const MIRROR_CAP_RADIUS: f64 = 0.25;

/// C^2 mirror map: `(m, m', m'')` at `z`. Outside the caps this is the
/// triangle wave `|((z+3) mod 4) - 2| - 1` with slope +-1; inside a cap of
/// radius `r`, the corner is replaced by `1 - r*phi(s)` (peaks) or
/// `-1 + r*phi(s)` (valleys) with `phi(s) = 3/8 + (3/4)s^2 - (1/8)s^4`,
/// which matches value, slope and curvature at `s = +-1`.
pub(crate) fn mirror_map(z: f64) -> (f64, f64, f64) {
    let r = MIRROR_CAP_RADIUS;
    let w = (z + 3.0).rem_euclid(4.0); // peak at w = 0 (mod 4), valley at w = 2
    let phi = |s: f64| 0.375 + 0.75 * s * s - 0.125 * s.powi(4);
    let phi_d1 = |s: f64| 1.5 * s - 0.5 * s * s * s;
    let phi_d2 = |s: f64| 1.5 - 1.5 * s * s;
    let wp = if w > 2.0 { w - 4.0 } else { w }; // signed distance to peak
    if wp.abs() <= r {
        let s = wp / r;
        (1.0 - r * phi(s), -phi_d1(s), -phi_d2(s) / r)
    } else if (w - 2.0).abs() <= r {
        let s = (w - 2.0) / r;
        (-1.0 + r * phi(s), phi_d1(s), phi_d2(s) / r)
    } else if w < 2.0 {
        (1.0 - w, -1.0, 0.0)
    } else {
        (w - 3.0, 1.0, 0.0)
    }
}

/// `f = 0` identically.
fn constant(params: &ProblemParams) -> Result<Problem> {
    let d = params.dim(1)?;
    Problem::new(
        "constant",
        d,
        1.0,
        1.0,
        |_x, _y| 0.0,
        move |_x, _y| vec![0.0; d],
        move |_x, _y| vec![0.0; d * d],
    )
}
