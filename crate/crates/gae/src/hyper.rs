//! The constants ledger: every algorithm hyperparameter in one place.
//!
//! Three constructors:
//! - [`theoretical_params`]: the analysis-faithful formulas. These are
//!   astronomically conservative (step sizes shrink like high powers of
//!   `eps` and `sigma`) and exist to be printed and unit-checked, not run.
//! - [`practical_params`]: usable desk-scale values that keep the inequality
//!   constraints the ascent guarantees actually need (`mu1*L2 <= 1/2`,
//!   `mu3 <= sqrt(eps/L)/2`).
//! - [`verified_path_params`]: a moderate set under which every segment of
//!   the ascent path certifies the `(1+delta)`-tightened slope/curvature
//!   margins, used when a path must pass independent verification.
//!
//! Log arguments of the form `log(b d sigma eps)` are implemented as
//! `ln(2 + b*d/(sigma*eps))` (and `ln(2 + b*d/sqrt(sigma*eps))`): the
//! literal products are below 1 for all valid inputs, which would make the
//! formulas negative or undefined; the clamp keeps the intended magnitude
//! of the large ratio.

use crate::error::{GaeError, Result};
use crate::oracle::derive_lipschitz;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Theoretical,
    Practical,
    Custom,
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Preset::Theoretical => write!(f, "theoretical"),
            Preset::Practical => write!(f, "practical"),
            Preset::Custom => write!(f, "custom"),
        }
    }
}

/// All algorithm constants. Iteration budgets `i2, i3, i4` are kept as
/// reals because the theoretical formulas overflow any integer type; they
/// are ceiled at the point of use.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HyperParams {
    pub eps: f64,
    pub sigma: f64,
    pub b: f64,
    pub l: f64,
    pub l1: f64,
    pub l2: f64,
    pub d: usize,
    pub omega: f64,
    pub gamma1: f64,
    pub delta: f64,
    pub mu1: f64,
    pub mu3: f64,
    pub mu4: f64,
    pub eta: f64,
    pub alpha_noise: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub eps0: f64,
    /// The universal constant scaling eta, I2 and alpha.
    pub c_univ: f64,
    pub preset: Preset,
}

impl HyperParams {
    /// Per-preset consistency checks; constructors call this.
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("eps", self.eps),
            ("sigma", self.sigma),
            ("b", self.b),
            ("l", self.l),
            ("gamma1", self.gamma1),
            ("mu1", self.mu1),
            ("mu3", self.mu3),
            ("mu4", self.mu4),
            ("eta", self.eta),
            ("eps0", self.eps0),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(GaeError::Validation(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.delta < 0.0 || !self.delta.is_finite() {
            return Err(GaeError::Validation("delta must be nonnegative".into()));
        }
        if self.i2 < 1.0 || self.i3 < 1.0 || self.i4 < 1.0 {
            return Err(GaeError::Validation("I2, I3, I4 must be >= 1".into()));
        }
        let slack = 1.0 + 1e-12;
        match self.preset {
            Preset::Theoretical => {
                if self.mu1 > slack * self.delta / (self.l2 * (self.l1 + 1.0)) {
                    return Err(GaeError::Validation("mu1 exceeds delta/(L2(L1+1))".into()));
                }
                let mu3_cap =
                    (self.delta * self.eps.sqrt() / self.l.sqrt()).min(self.eps / self.l.sqrt())
                        / 7.0;
                if self.mu3 > slack * mu3_cap {
                    return Err(GaeError::Validation("mu3 exceeds its ledger bound".into()));
                }
                if self.mu4 > slack * (self.delta * self.l * self.eps).sqrt() / 7.0 {
                    return Err(GaeError::Validation("mu4 exceeds its ledger bound".into()));
                }
            }
            // the ascent-progress derivations only need these two
            Preset::Practical => {
                if self.mu1 * self.l2 > 0.5 * slack {
                    return Err(GaeError::Validation("mu1 * L2 must be <= 1/2".into()));
                }
                if self.mu3 > slack * 0.5 * (self.eps / self.l).sqrt() {
                    return Err(GaeError::Validation("mu3 must be <= sqrt(eps/L)/2".into()));
                }
            }
            // positivity only; step-size preconditions are the caller's
            Preset::Custom => {}
        }
        Ok(())
    }
}

fn check_inputs(eps: f64, sigma: f64, b: f64, l: f64, d: usize) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(GaeError::Validation(format!("need 0 < eps <= 1, got {eps}")));
    }
    if !(b >= 1.0) {
        return Err(GaeError::Validation(format!("need b >= 1, got {b}")));
    }
    if !(l > 0.0) {
        return Err(GaeError::Validation(format!("need L > 0, got {l}")));
    }
    if d == 0 {
        return Err(GaeError::Validation("need d >= 1".into()));
    }
    let sigma_cap = 1.0 / (eps * d as f64).sqrt();
    if !(sigma > 0.0 && sigma <= sigma_cap) {
        return Err(GaeError::Validation(format!(
            "need 0 < sigma <= 1/sqrt(eps*d) = {sigma_cap}, got {sigma}"
        )));
    }
    Ok(())
}

/// `ln(2 + b*d/(sigma*eps))` — the clamped form of `log(b d sigma eps)`.
pub fn log_ratio(b: f64, d: usize, sigma: f64, eps: f64) -> f64 {
    (2.0 + b * d as f64 / (sigma * eps)).ln()
}

/// `ln(2 + b*d/sqrt(sigma*eps))` — the clamped form of `log(b d sqrt(sigma eps))`.
pub fn log_ratio_sqrt(b: f64, d: usize, sigma: f64, eps: f64) -> f64 {
    (2.0 + b * d as f64 / (sigma * eps).sqrt()).ln()
}

/// The analysis-faithful constants ledger.
pub fn theoretical_params(eps: f64, sigma: f64, b: f64, l: f64, d: usize) -> Result<HyperParams> {
    check_inputs(eps, sigma, b, l, d)?;
    let (l1, l2) = derive_lipschitz(b, l)?;
    let c_univ = 1e3;
    let omega = 1e-3;
    let gamma1 = eps.powf(2.1) * sigma.powf(16.6)
        / (1e4 * (1.0 + b.powf(3.1)) * (d as f64).powf(0.6) * log_ratio(b, d, sigma, eps));
    let delta = gamma1 * gamma1 / (8.0 * b * b);
    let mu1 = delta / (l2 * (l1 + 1.0));
    let mu3 = (delta * eps.sqrt() / l.sqrt()).min(eps / l.sqrt()) / 7.0;
    let mu4 = (delta * l * eps).sqrt() / 7.0;
    let lg = log_ratio_sqrt(b, d, sigma, eps);
    let eta = sigma.powi(9)
        / (b.powi(6)
            * (d as f64).powi(2)
            * (1.0 + 10.0 * b * d as f64 / (sigma.powi(12) * eps * eps))
            * c_univ
            * lg.powi(9));
    let i2 = c_univ * lg / (eta * eps.sqrt());
    let i3 = 30.0 * b / gamma1;
    let i4 = 6.0 * (2.0 * b / (gamma1 * omega)).ln();
    let alpha_noise = eta * c_univ * lg * (1.0 + b * b * (d as f64).powi(2) / (sigma * sigma)).sqrt();
    let hp = HyperParams {
        eps,
        sigma,
        b,
        l,
        l1,
        l2,
        d,
        omega,
        gamma1,
        delta,
        mu1,
        mu3,
        mu4,
        eta,
        alpha_noise,
        i2,
        i3,
        i4,
        eps0: eps / 2.0,
        c_univ,
        preset: Preset::Theoretical,
    };
    hp.validate()?;
    Ok(hp)
}

/// Desk-scale constants that keep the ascent-progress inequalities.
pub fn practical_params(eps: f64, sigma: f64, b: f64, l: f64, d: usize) -> Result<HyperParams> {
    check_inputs(eps, sigma, b, l, d)?;
    let (l1, l2) = derive_lipschitz(b, l)?;
    let gamma1 = 1e-3 * eps * eps;
    let delta = (gamma1 * gamma1 / (8.0 * b * b)).min(1e-4);
    let eta = 1e-2 * sigma * sigma / d as f64;
    let hp = HyperParams {
        eps,
        sigma,
        b,
        l,
        l1,
        l2,
        d,
        omega: 1e-3,
        gamma1,
        delta,
        mu1: (0.25 / l2).min(0.1),
        mu3: 0.5 * eps.sqrt() / l.sqrt(),
        mu4: 1e-8,
        eta,
        alpha_noise: 0.3 * eta * (d as f64).sqrt(),
        i2: 200.0,
        i3: 200.0,
        i4: 20.0,
        eps0: eps / 2.0,
        c_univ: 1.0,
        preset: Preset::Practical,
    };
    hp.validate()?;
    Ok(hp)
}

/// Constants under which the ascent path provably verifies as an
/// `eps'/(1+delta)`-greedy path: every gradient segment keeps slope
/// `(1 - L2*mu1) ||grad|| >= eps'/(1+delta)` and every curvature segment
/// keeps second derivative `>= sqrt(L*eps'/(1+delta))`.
pub fn verified_path_params(eps_prime: f64, b: f64, l: f64, d: usize) -> Result<HyperParams> {
    if !(eps_prime > 0.0) {
        return Err(GaeError::Validation("eps_prime must be positive".into()));
    }
    if !(b > 0.0) || !(l > 0.0) || d == 0 {
        return Err(GaeError::Validation("b, L, d must be positive".into()));
    }
    let (l1, l2) = derive_lipschitz(b, l)?;
    let delta = 0.5;
    let eps = eps_prime.min(1.0);
    let hp = HyperParams {
        eps,
        sigma: 0.1,
        b,
        l,
        l1,
        l2,
        d,
        omega: 1e-3,
        gamma1: 1e-3 * eps_prime * eps_prime,
        delta,
        mu1: delta / (l2 * (l1 + 1.0)),
        mu3: (delta * eps_prime.sqrt()).min(eps_prime) / (7.0 * l.sqrt()),
        mu4: (delta * l * eps_prime).sqrt() / 7.0,
        eta: 1e-2,
        alpha_noise: 1e-3,
        i2: 1.0,
        i3: 1.0,
        i4: 1.0,
        eps0: eps_prime / 2.0,
        c_univ: 1.0,
        preset: Preset::Custom,
    };
    hp.validate()?;
    Ok(hp)
}

/// `eps_i = eps0 * (1 + delta)^(2i)`.
pub fn eps_schedule(eps0: f64, delta: f64, i: u64) -> f64 {
    eps0 * (1.0 + delta).powi(2 * i as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        assert_eq!(eps_schedule(0.05, 0.3, 0), 0.05);
        let v = eps_schedule(0.05, 0.01, 2);
        assert!((v - 0.05 * 1.01f64.powi(4)).abs() < 1e-15);
        assert!((v - 0.0520302).abs() < 1e-7);
    }

    #[test]
    fn schedule_stays_below_doubling() {
        for i_max in [1u64, 5, 50, 500] {
            let delta = 1.0 / (4.0 * (i_max * i_max) as f64);
            for i in 0..=i_max {
                assert!((1.0 + delta).powi(i as i32) <= 2.0, "i_max={i_max}, i={i}");
            }
        }
    }

    #[test]
    fn schedule_monotone() {
        let mut last = 0.0;
        for i in 0..100 {
            let v = eps_schedule(0.01, 0.03, i);
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn theoretical_ledger_spot_values() {
        let hp = theoretical_params(0.1, 0.1, 1.0, 1.0, 2).unwrap();
        assert_eq!((hp.l1, hp.l2), (4.0, 2.0));
        let expect_gamma1 = 0.1f64.powf(2.1) * 0.1f64.powf(16.6)
            / (1e4 * 2.0 * 2f64.powf(0.6) * (2.0 + 1.0 * 2.0 / (0.1 * 0.1_f64)).ln());
        assert!((hp.gamma1 - expect_gamma1).abs() <= 1e-12 * expect_gamma1.abs());
        assert!((hp.delta - hp.gamma1 * hp.gamma1 / 8.0).abs() <= 1e-25);
        assert!((hp.eps0 - 0.05).abs() < 1e-15);
    }

    #[test]
    fn theoretical_rejects_large_sigma() {
        // sigma cap is 1/sqrt(eps*d)
        assert!(matches!(
            theoretical_params(0.25, 2.1, 1.0, 1.0, 4),
            Err(GaeError::Validation(_))
        ));
        assert!(theoretical_params(0.25, 0.9, 1.0, 1.0, 4).is_ok());
    }

    #[test]
    fn practical_spot_values() {
        let hp = practical_params(0.05, 0.05, 2.0, 27.0, 2).unwrap();
        let expect = 0.5 * 0.05f64.sqrt() / 27.0f64.sqrt();
        assert!((hp.mu3 - expect).abs() < 1e-15);
        assert!((hp.mu3 - 0.02152).abs() < 1e-5);

        // min(0.25/L2, 0.1) with L2 = 2: the 0.1 cap binds
        let hp = practical_params(0.1, 0.1, 1.0, 1.0, 1).unwrap();
        assert_eq!(hp.mu1, 0.1);
        // L2 = 2 * 8^(1/3) * 8^(2/3) = 16
        let hp = practical_params(0.1, 0.1, 8.0, 8.0, 1).unwrap();
        assert!((hp.mu1 - 0.25 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn constructors_produce_valid_params() {
        for (eps, sigma, b, l, d) in [
            (0.1, 0.1, 1.0, 1.0, 1usize),
            (0.05, 0.05, 2.5, 40.0, 1),
            (0.5, 0.2, 21.0, 1.0, 3),
        ] {
            practical_params(eps, sigma, b, l, d).unwrap().validate().unwrap();
            theoretical_params(eps, sigma, b, l, d).unwrap().validate().unwrap();
            verified_path_params(eps, b, l, d).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn verified_path_margins_hold() {
        // gradient: (1 - L2 mu1) >= 1/(1+delta); curvature:
        // sqrt(L e') - mu3 L >= sqrt(L e'/(1+delta))
        for eps_prime in [0.1, 0.01] {
            for (b, l) in [(1.0, 1.0), (2.0, 44.0), (3.0, 250.0)] {
                let hp = verified_path_params(eps_prime, b, l, 1).unwrap();
                let grad_margin = (1.0 - hp.l2 * hp.mu1) - 1.0 / (1.0 + hp.delta);
                assert!(grad_margin > 0.0, "gradient margin {grad_margin}");
                let curv_margin = ((l * eps_prime).sqrt() - hp.mu3 * l)
                    - (l * eps_prime / (1.0 + hp.delta)).sqrt();
                assert!(curv_margin > 0.0, "curvature margin {curv_margin}");
            }
        }
    }
}
