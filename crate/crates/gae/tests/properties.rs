//! Cross-module invariant checks that back the per-module contracts:
//! ascent progress under the practical preset, surrogate bounds and
//! lower-bound audits across the zoo, the smoothing regression at a second
//! sigma, and deterministic certificates on solver outputs.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gae::certify::{certify, check_fixed_point, check_y_local_max, Verdict};
use gae::greedy_path::{greedy_ensemble_max, run_greedy_path};
use gae::hyper::{practical_params, verified_path_params};
use gae::linalg;
use gae::oracle::{make_problem, Problem, ProblemParams, ZOO_IDS};
use gae::smoothing::{eval_h, mc_smoothed_grad, mc_smoothed_hess, Anchor};
use gae::solver::solve;

fn zoo(id: &str) -> Problem {
    make_problem(id, &ProblemParams::new()).unwrap()
}

fn random_box(rng: &mut ChaCha8Rng, d: usize, halfwidth: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-halfwidth..halfwidth)).collect()
}

#[test]
fn practical_preset_keeps_monotone_ascent() {
    let eps_prime = 0.05;
    for id in ZOO_IDS {
        let problem = zoo(id);
        let hp = practical_params(eps_prime, 0.05, problem.b, problem.l, problem.d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x9a9a);
        for _ in 0..10 {
            let w = problem.roi_halfwidth;
            let x = random_box(&mut rng, problem.d, w);
            let y0 = random_box(&mut rng, problem.d, w);
            let (_, trace) = run_greedy_path(&problem, &x, &y0, eps_prime, &hp).unwrap();
            let floor = (0.5 * trace.mu1 * eps_prime * eps_prime)
                .min(0.25 * trace.mu3 * trace.mu3 * (problem.l * eps_prime).sqrt());
            for s in &trace.steps {
                assert!(
                    s.f_after - s.f_before >= floor - 1e-12,
                    "{id}: step gained {} < floor {floor}",
                    s.f_after - s.f_before
                );
            }
        }
    }
}

#[test]
fn surrogate_is_bounded_and_below_the_ensemble() {
    for id in ZOO_IDS {
        let problem = zoo(id);
        let hp = verified_path_params(0.05, problem.b, problem.l, problem.d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5b5b);
        for k in 0..100u64 {
            let w = problem.roi_halfwidth;
            let x = random_box(&mut rng, problem.d, w);
            let y = random_box(&mut rng, problem.d, w);
            let (h, _) = eval_h(&problem, &x, &y, 0.05, &hp).unwrap();
            assert!(h.abs() <= problem.b, "{id}: |h| = {} exceeds b = {}", h.abs(), problem.b);
            let g = greedy_ensemble_max(&problem, &x, &y, 0.05, 8, 9000 + k, &hp).unwrap();
            assert!(g >= h - 1e-12, "{id}: ensemble {g} below surrogate {h}");
        }
    }
}

#[test]
fn truncated_smoothing_regression_at_second_sigma() {
    // the staircase keeps its exact minimum under truncated smoothing for
    // sigma = 0.05 as well: gradient and curvature estimates sit at zero,
    // while plain smoothing pushes the gradient past 1/(sigma sqrt(2 pi)) - 1
    let problem = zoo("shiftmin1d");
    let hp = verified_path_params(0.1, problem.b, problem.l, 1).unwrap();
    let sigma = 0.05;
    let truncated = Anchor::new(vec![0.0], 0.0).unwrap();
    let (mean, se) =
        mc_smoothed_grad(&problem, &truncated, &[0.0], &[0.0], sigma, 0.1, &hp, 100_000, 1)
            .unwrap();
    assert!(mean[0].abs() <= 3.0 * se[0]);
    let (hest, hse) =
        mc_smoothed_hess(&problem, &truncated, &[0.0], &[0.0], sigma, 0.1, &hp, 100_000, 2)
            .unwrap();
    let lam = linalg::min_eigenvalue(&hest, 1).unwrap();
    assert!(lam >= -3.0 * hse, "lambda_min estimate {lam} below -3 stderr {hse}");

    let plain = Anchor::untruncated(vec![0.0]);
    let (mean_p, _) =
        mc_smoothed_grad(&problem, &plain, &[0.0], &[0.0], sigma, 0.1, &hp, 100_000, 3).unwrap();
    let floor = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt()) - 1.0;
    assert!(mean_p[0].abs() >= floor);
}

#[test]
fn solver_outputs_carry_deterministic_certificates() {
    for (id, eps, sigma) in [
        ("quad_scsc", 0.05, 0.05),
        ("fig4", 0.05, 0.05),
        ("ex22", 0.05, 0.05),
        ("constant", 0.1, 0.1),
    ] {
        let problem = zoo(id);
        let hp = practical_params(eps, sigma, problem.b, problem.l, problem.d).unwrap();
        let x0 = vec![0.0; problem.d];
        let (eq, _) = solve(&problem, eps, sigma, &hp, &x0, &x0, 11).unwrap();
        let y_check =
            check_y_local_max(&problem, &eq.x_star, &eq.y_star, eq.eps_star, problem.l).unwrap();
        assert!(y_check.ok, "{id}: y-side certificate failed deterministically");
        assert!(
            check_fixed_point(&problem, &eq.x_star, &eq.y_star, eq.eps_star, &hp).unwrap(),
            "{id}: fixed point failed deterministically"
        );
    }
}

#[test]
fn statistical_certificates_are_decisive_on_quad_and_fig4() {
    for (id, seed) in [("quad_scsc", 21u64), ("fig4", 22)] {
        let problem = zoo(id);
        let hp = practical_params(0.05, 0.05, problem.b, problem.l, 1).unwrap();
        let (eq, _) = solve(&problem, 0.05, 0.05, &hp, &[0.0], &[0.0], seed).unwrap();
        let cert = certify(
            &problem, &eq.x_star, &eq.y_star, eq.eps_star, 0.05, &hp, 100_000, seed,
        )
        .unwrap();
        assert_eq!(
            cert.verdict,
            Verdict::Pass,
            "{id}: expected a decisive pass, got {cert:?}"
        );
    }
}
