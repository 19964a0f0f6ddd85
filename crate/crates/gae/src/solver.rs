//! The full equilibrium search: alternate a hill-climb phase and a noisy
//! zeroth-order SGD phase for the min-player against the ascent subroutine
//! for the max-player.
//!
//! Each outer iteration works at accuracy `eps_i = eps0 (1 + delta)^{2i}`.
//! An update is accepted only when the surrogate drops by at least
//! `gamma1`, so `f` decreases monotonically across accepted iterations and
//! the loop must stop within `2b/gamma1 + 1` rounds. The final round, by
//! construction, exhausted all `I3` probes and `I4` SGD restarts without
//! finding such a drop; its iterate is returned together with
//! `eps_star = eps_{i_star}`.

use rand_chacha::ChaCha8Rng;

use crate::error::{GaeError, Result};
use crate::hyper::{eps_schedule, HyperParams};
use crate::oracle::{OracleCounts, Problem};
use crate::par;
use crate::smoothing::{eval_h, stoch_grad, Anchor};
use crate::trace::{IterationRecord, Phase, ProbeRecord};

/// The claimed equilibrium: `y_star` is an approximate local maximum of
/// `f(x_star, ·)` at level `eps_star <= eps`, and `x_star` an approximate
/// local minimum of the truncated smoothed surrogate.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Equilibrium {
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    pub eps_star: f64,
    pub sigma: f64,
    pub i_star: u64,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct SolverTrace {
    pub iterations: Vec<IterationRecord>,
    pub probes: Vec<ProbeRecord>,
    pub oracle_calls: OracleCounts,
}

/// Current iterate as seen by the two phases.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub i: u64,
    pub eps_i: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `f(x, y)` at the current iterate (the acceptance reference).
    pub f_val: f64,
    /// Stochastic-gradient reference value (previous accepted surrogate).
    pub h0: f64,
}

#[derive(Debug, Clone)]
pub struct PhaseOutcome {
    pub accepted: bool,
    /// `(x, y, f)` of the accepted candidate.
    pub candidate: Option<(Vec<f64>, Vec<f64>, f64)>,
    pub probes_used: u64,
    pub restarts_used: u64,
}

pub enum SolveEvent<'a> {
    Iteration(&'a IterationRecord),
    Probe(&'a ProbeRecord),
}

fn budget(v: f64) -> u64 {
    v.ceil().clamp(1.0, 1e12) as u64
}

/// Draw up to `I3` Gaussian probes `x + sigma*zeta`; accept the first whose
/// ascended value drops by `gamma1`.
pub fn hillclimb_phase(
    problem: &Problem,
    state: &SolverState,
    hp: &HyperParams,
    rng: &mut ChaCha8Rng,
    mut on_probe: impl FnMut(ProbeRecord),
) -> Result<PhaseOutcome> {
    let i3 = budget(hp.i3);
    for j in 1..=i3 {
        let zeta = par::normal_vec(rng, problem.d);
        let xp: Vec<f64> = state
            .x
            .iter()
            .zip(&zeta)
            .map(|(x, z)| x + hp.sigma * z)
            .collect();
        let (f_probe, y_end) = eval_h(problem, &xp, &state.y, state.eps_i, hp)?;
        let accepted = f_probe <= state.f_val - hp.gamma1;
        on_probe(ProbeRecord {
            i: state.i,
            phase: Phase::HillClimb,
            j,
            k: None,
            x: xp.clone(),
            f: f_probe,
            h: f_probe,
            accepted,
        });
        if accepted {
            return Ok(PhaseOutcome {
                accepted: true,
                candidate: Some((xp, y_end, f_probe)),
                probes_used: j,
                restarts_used: 0,
            });
        }
    }
    Ok(PhaseOutcome { accepted: false, candidate: None, probes_used: i3, restarts_used: 0 })
}

/// Up to `I4` restarts of `I2` noisy SGD steps from `X_0 = x`. Each step
/// uses the zeroth-order sample `Gamma_k = (h^k - h^{k-1}) * u / sigma`
/// with `h^k = min(f(X_{k-1} + sigma*u, Y), f(x, y))`; the stale reference
/// `h^{k-1}` is independent of the fresh `u`, so the estimate stays
/// unbiased. A restart is accepted when the ascended value at its final
/// `X` drops by `gamma1`.
pub fn sgd_phase(
    problem: &Problem,
    state: &SolverState,
    hp: &HyperParams,
    rng: &mut ChaCha8Rng,
    mut on_probe: impl FnMut(ProbeRecord),
) -> Result<PhaseOutcome> {
    let d = problem.d;
    let i4 = budget(hp.i4);
    let i2 = budget(hp.i2);
    let anchor = Anchor::new(state.x.clone(), state.f_val)?;
    for j in 1..=i4 {
        let mut x_cur = state.x.clone();
        let mut h_prev = state.h0;
        for k in 1..=i2 {
            let s = stoch_grad(
                problem, &anchor, &x_cur, &state.y, hp.sigma, state.eps_i, hp, h_prev, rng,
            )?;
            let xp: Vec<f64> =
                x_cur.iter().zip(&s.zeta).map(|(x, z)| x + hp.sigma * z).collect();
            let h_k = s.h_perturbed.min(anchor.c);
            h_prev = h_k;
            let xi = par::normal_vec(rng, d);
            for idx in 0..d {
                x_cur[idx] += -hp.eta * s.gamma[idx] + hp.alpha_noise * xi[idx];
            }
            on_probe(ProbeRecord {
                i: state.i,
                phase: Phase::Sgd,
                j,
                k: Some(k),
                x: xp,
                f: s.h_perturbed,
                h: h_k,
                accepted: false,
            });
        }
        let (f_final, y_end) = eval_h(problem, &x_cur, &state.y, state.eps_i, hp)?;
        let accepted = f_final <= state.f_val - hp.gamma1;
        on_probe(ProbeRecord {
            i: state.i,
            phase: Phase::Sgd,
            j,
            k: None,
            x: x_cur.clone(),
            f: f_final,
            h: f_final.min(state.f_val),
            accepted,
        });
        if accepted {
            return Ok(PhaseOutcome {
                accepted: true,
                candidate: Some((x_cur, y_end, f_final)),
                probes_used: 0,
                restarts_used: j,
            });
        }
    }
    Ok(PhaseOutcome { accepted: false, candidate: None, probes_used: 0, restarts_used: i4 })
}

/// Run the full search from `(x0, y0)`.
pub fn solve(
    problem: &Problem,
    eps: f64,
    sigma: f64,
    hp: &HyperParams,
    x0: &[f64],
    y0: &[f64],
    seed: u64,
) -> Result<(Equilibrium, SolverTrace)> {
    solve_with(problem, eps, sigma, hp, x0, y0, seed, |_| {})
}

/// As [`solve`], streaming every record to `on_event` as it is produced.
#[allow(clippy::too_many_arguments)]
pub fn solve_with(
    problem: &Problem,
    eps: f64,
    sigma: f64,
    hp: &HyperParams,
    x0: &[f64],
    y0: &[f64],
    seed: u64,
    mut on_event: impl FnMut(SolveEvent),
) -> Result<(Equilibrium, SolverTrace)> {
    let d = problem.d;
    if x0.len() != d || y0.len() != d {
        return Err(GaeError::Validation("x0/y0 dimension mismatch".into()));
    }
    if x0.iter().chain(y0.iter()).any(|v| !v.is_finite()) {
        return Err(GaeError::Validation("x0/y0 must be finite".into()));
    }
    let sigma_cap = 1.0 / (eps * d as f64).sqrt();
    if !(sigma > 0.0 && sigma <= sigma_cap * (1.0 + 1e-12)) {
        return Err(GaeError::Validation(format!(
            "need 0 < sigma <= 1/sqrt(eps*d) = {sigma_cap}, got {sigma}"
        )));
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs());
    if !close(hp.eps, eps) || !close(hp.sigma, sigma) || hp.d != d {
        return Err(GaeError::Validation(
            "hyperparameters were built for different (eps, sigma, d)".into(),
        ));
    }
    if hp.b < problem.b * (1.0 - 1e-12) || hp.l < problem.l * (1.0 - 1e-12) {
        return Err(GaeError::Validation(
            "hyperparameters declare smaller (b, L) than the problem".into(),
        ));
    }
    hp.validate()?;

    let counts_before = problem.oracle_counts();
    let mut trace = SolverTrace::default();
    let mut rng = par::stream_rng(seed, 0);
    let seed_state =
        |rng: &ChaCha8Rng| format!("{:x}:{:x}", rng.get_stream(), rng.get_word_pos());

    // initialization: one ascent from (x0, y0) at accuracy eps0
    let (f1, y1) = eval_h(problem, x0, y0, hp.eps0, hp)?;
    let mut x = x0.to_vec();
    let mut y = y1;
    let mut f_val = f1;
    let mut h0 = f1;
    let init = IterationRecord {
        i: 0,
        eps_i: hp.eps0,
        phase: Phase::Init,
        x: x.clone(),
        y: y.clone(),
        f_val,
        h_val: h0,
        accepted: false,
        inner_k: None,
        probes_used: 0,
        restarts_used: 0,
        seed_state: seed_state(&rng),
    };
    on_event(SolveEvent::Iteration(&init));
    trace.iterations.push(init);

    let i_cap = (2.0 * hp.b / hp.gamma1).floor() as u64 + 1;
    let mut i = 0u64;
    let equilibrium = loop {
        i += 1;
        if i > i_cap {
            return Err(GaeError::Internal(format!(
                "outer loop passed its {i_cap}-iteration bound; monotone descent by gamma1 \
                 must have been violated"
            )));
        }
        let eps_i = eps_schedule(hp.eps0, hp.delta, i);
        let state = SolverState { i, eps_i, x: x.clone(), y: y.clone(), f_val, h0 };
        let mut sink = |p: ProbeRecord| {
            on_event(SolveEvent::Probe(&p));
            trace.probes.push(p);
        };
        let hc = hillclimb_phase(problem, &state, hp, &mut rng, &mut sink)?;
        let (phase, outcome) = if hc.accepted {
            (Phase::HillClimb, hc)
        } else {
            let sg = sgd_phase(problem, &state, hp, &mut rng, &mut sink)?;
            if sg.accepted {
                (Phase::Sgd, sg)
            } else {
                (Phase::Stop, sg)
            }
        };
        match phase {
            Phase::Stop => {
                let rec = IterationRecord {
                    i,
                    eps_i,
                    phase,
                    x: x.clone(),
                    y: y.clone(),
                    f_val,
                    h_val: h0,
                    accepted: false,
                    inner_k: None,
                    probes_used: budget(hp.i3),
                    restarts_used: budget(hp.i4),
                    seed_state: seed_state(&rng),
                };
                on_event(SolveEvent::Iteration(&rec));
                trace.iterations.push(rec);
                break Equilibrium {
                    x_star: x,
                    y_star: y,
                    eps_star: eps_i,
                    sigma,
                    i_star: i,
                };
            }
            _ => {
                let (cx, cy, cf) = outcome.candidate.clone().expect("accepted without candidate");
                h0 = f_val;
                x = cx;
                y = cy;
                f_val = cf;
                let rec = IterationRecord {
                    i,
                    eps_i,
                    phase,
                    x: x.clone(),
                    y: y.clone(),
                    f_val,
                    h_val: h0,
                    accepted: true,
                    inner_k: Some(if phase == Phase::HillClimb {
                        outcome.probes_used
                    } else {
                        outcome.restarts_used
                    }),
                    probes_used: outcome.probes_used,
                    restarts_used: outcome.restarts_used,
                    seed_state: seed_state(&rng),
                };
                on_event(SolveEvent::Iteration(&rec));
                trace.iterations.push(rec);
            }
        }
    };
    if equilibrium.eps_star > eps * (1.0 + 1e-9) {
        return Err(GaeError::Internal(format!(
            "eps_star = {} exceeded the requested accuracy {eps}",
            equilibrium.eps_star
        )));
    }
    trace.oracle_calls = problem.oracle_counts() - counts_before;
    Ok((equilibrium, trace))
}

/// Outer rounds actually run (excludes the initialization record).
pub fn outer_iterations(trace: &SolverTrace) -> u64 {
    trace.iterations.iter().filter(|r| r.phase != Phase::Init).count() as u64
}

/// Monotone-descent audit: accepted iterations must drop `f` by `gamma1`.
pub fn descent_violations(trace: &SolverTrace, gamma1: f64) -> usize {
    let mut last_f = None;
    let mut violations = 0;
    for rec in &trace.iterations {
        if rec.phase == Phase::Init {
            last_f = Some(rec.f_val);
            continue;
        }
        if rec.accepted {
            if let Some(prev) = last_f {
                if !(rec.f_val <= prev - gamma1) {
                    violations += 1;
                }
            }
            last_f = Some(rec.f_val);
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyper::practical_params;
    use crate::linalg;
    use crate::oracle::{make_problem, Problem, ProblemParams};

    fn zoo(id: &str) -> Problem {
        make_problem(id, &ProblemParams::new()).unwrap()
    }

    #[test]
    fn constant_stops_after_one_round_at_origin() {
        let p = zoo("constant");
        let hp = practical_params(0.1, 0.1, p.b, p.l, p.d).unwrap();
        let (eq, trace) = solve(&p, 0.1, 0.1, &hp, &[0.0], &[0.0], 1).unwrap();
        assert_eq!(eq.x_star, vec![0.0]);
        assert_eq!(eq.y_star, vec![0.0]);
        assert_eq!(eq.i_star, 1);
        assert_eq!(outer_iterations(&trace), 1);
        assert!(trace.iterations.iter().all(|r| !r.accepted));
        let last = trace.iterations.last().unwrap();
        assert_eq!(last.phase, Phase::Stop);
        assert_eq!(last.probes_used, 200);
        assert_eq!(last.restarts_used, 20);
    }

    #[test]
    fn quad_saddle_is_never_left() {
        let p = zoo("quad_scsc");
        let hp = practical_params(0.05, 0.05, p.b, p.l, p.d).unwrap();
        for seed in [7u64, 42] {
            let (eq, trace) = solve(&p, 0.05, 0.05, &hp, &[0.0], &[0.0], seed).unwrap();
            assert!(linalg::norm(&eq.x_star) <= 0.3, "x_star = {:?}", eq.x_star);
            assert_eq!(descent_violations(&trace, hp.gamma1), 0);
        }
    }

    #[test]
    fn hillclimb_accepts_on_a_steep_slope() {
        // f = tanh(x): a probe with zeta <= -gamma1/sigma decreases f, so
        // each probe succeeds with probability about 1/2
        let p = Problem::new(
            "slope",
            1,
            1.0,
            4.0,
            |x, _y| x[0].tanh(),
            |_x, _y| vec![0.0],
            |_x, _y| vec![0.0],
        )
        .unwrap();
        let hp = practical_params(0.05, 0.05, p.b, p.l, 1).unwrap();
        let mut accepted = 0;
        for seed in 0..50u64 {
            let state = SolverState {
                i: 1,
                eps_i: hp.eps0,
                x: vec![0.0],
                y: vec![0.0],
                f_val: 0.0,
                h0: 0.0,
            };
            let mut rng = crate::par::stream_rng(seed, 0);
            let out = hillclimb_phase(&p, &state, &hp, &mut rng, |_| {}).unwrap();
            if out.accepted {
                accepted += 1;
                let (_, _, f) = out.candidate.unwrap();
                assert!(f <= -hp.gamma1);
            }
        }
        assert!(accepted >= 45, "only {accepted}/50 phases accepted");
    }

    #[test]
    fn hillclimb_rejects_the_exact_quad_saddle() {
        // ascended probe values are v(x) - err with v >= sigma^2 zeta^2 and
        // err < v whenever any ascent step ran, so no probe clears -gamma1
        let p = zoo("quad_scsc");
        let hp = practical_params(0.05, 0.05, p.b, p.l, p.d).unwrap();
        for seed in 0..20u64 {
            let state = SolverState {
                i: 1,
                eps_i: eps_schedule(hp.eps0, hp.delta, 1),
                x: vec![0.0],
                y: vec![0.0],
                f_val: 0.0,
                h0: 0.0,
            };
            let mut rng = crate::par::stream_rng(seed, 0);
            let out = hillclimb_phase(&p, &state, &hp, &mut rng, |_| {}).unwrap();
            assert!(!out.accepted, "seed {seed} accepted a probe at the saddle");
        }
    }

    #[test]
    fn hillclimb_rejects_constant() {
        let p = zoo("constant");
        let hp = practical_params(0.1, 0.1, p.b, p.l, 1).unwrap();
        let state = SolverState {
            i: 1,
            eps_i: hp.eps0,
            x: vec![0.0],
            y: vec![0.0],
            f_val: 0.0,
            h0: 0.0,
        };
        let mut rng = crate::par::stream_rng(3, 0);
        let out = hillclimb_phase(&p, &state, &hp, &mut rng, |_| {}).unwrap();
        assert!(!out.accepted);
        assert_eq!(out.probes_used, 200);
    }

    #[test]
    fn sgd_descends_a_convex_slope() {
        // f = (x - 2)^2 / 2 from x = 0: the smoothed gradient points away
        // from the minimizer, so the first restart already moves downhill
        let p = Problem::new(
            "convex_x",
            1,
            200.0,
            1.0,
            |x, _y| 0.5 * (x[0] - 2.0) * (x[0] - 2.0),
            |_x, _y| vec![0.0],
            |_x, _y| vec![0.0],
        )
        .unwrap();
        let hp = practical_params(0.05, 0.05, p.b, p.l, 1).unwrap();
        let state = SolverState {
            i: 1,
            eps_i: hp.eps0,
            x: vec![0.0],
            y: vec![0.0],
            f_val: 2.0,
            h0: 2.0,
        };
        let mut rng = crate::par::stream_rng(11, 0);
        let out = sgd_phase(&p, &state, &hp, &mut rng, |_| {}).unwrap();
        assert!(out.accepted, "sgd phase failed to decrease a convex slope");
        assert_eq!(out.restarts_used, 1);
        let (_, _, f) = out.candidate.unwrap();
        assert!(f <= 2.0 - hp.gamma1);
    }

    #[test]
    fn sgd_phase_is_bit_deterministic() {
        let p = zoo("fig4");
        let hp = practical_params(0.05, 0.05, p.b, p.l, 1).unwrap();
        let state = SolverState {
            i: 1,
            eps_i: hp.eps0,
            x: vec![0.0],
            y: vec![2.0],
            f_val: p.value(&[0.0], &[2.0]),
            h0: p.value(&[0.0], &[2.0]),
        };
        let run = || {
            let mut rng = crate::par::stream_rng(99, 0);
            let mut probes = Vec::new();
            let out = sgd_phase(&p, &state, &hp, &mut rng, |r| probes.push(r)).unwrap();
            (out.accepted, out.restarts_used, probes)
        };
        let a = run();
        let b = run();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
    }

    #[test]
    fn solve_rejects_mismatched_hyperparams() {
        let p = zoo("constant");
        let hp = practical_params(0.1, 0.1, p.b, p.l, 1).unwrap();
        assert!(matches!(
            solve(&p, 0.2, 0.1, &hp, &[0.0], &[0.0], 1),
            Err(GaeError::Validation(_))
        ));
    }

    #[test]
    fn solve_rejects_oversized_sigma() {
        let p = zoo("constant");
        let hp = practical_params(0.25, 3.0, p.b, p.l, 1);
        assert!(hp.is_err());
    }
}
