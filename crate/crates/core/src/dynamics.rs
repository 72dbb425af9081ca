//! Learning curve of a single mode strength under gradient flow.
//!
//! A training-aligned mode with data singular value ŝ and balanced layers obeys
//! `τ du/dt = (N_l−1)·u^{2−2/(N_l−1)}·(ŝ−u)`. Three-layer networks have the
//! logistic solution, five-layer networks an implicit closed form t(u), and
//! every other depth is integrated numerically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Tolerance};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    eps: f64,
    tau: f64,
    depth: usize,
}

impl DynamicsParams {
    pub fn new(eps: f64, tau: f64, depth: usize) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::ConfigInvalid(format!("eps must be positive, got {eps}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::ConfigInvalid(format!("tau must be positive, got {tau}")));
        }
        if depth < 3 {
            return Err(Error::ConfigInvalid(format!(
                "depth counts all layers and must be at least 3, got {depth}"
            )));
        }
        Ok(DynamicsParams { eps, tau, depth })
    }

    /// Three-layer network with τ = 1.
    pub fn shallow(eps: f64) -> Result<Self> {
        Self::new(eps, 1.0, 3)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn with_tau(self, tau: f64) -> Result<Self> {
        Self::new(self.eps, tau, self.depth)
    }

    pub fn with_eps(self, eps: f64) -> Result<Self> {
        Self::new(eps, self.tau, self.depth)
    }

    /// Exponent `2 − 2/(N_l−1)` of the mode ODE.
    fn power(&self) -> f64 {
        2.0 - 2.0 / (self.depth as f64 - 1.0)
    }

    fn check_target(&self, shat: f64) -> Result<()> {
        if !(shat > 0.0) {
            return Err(Error::NonPositiveMode(shat));
        }
        if self.eps >= shat {
            return Err(Error::InvalidInit {
                eps: self.eps,
                shat,
            });
        }
        Ok(())
    }
}

pub fn mode_ode_rhs(u: f64, shat: f64, params: &DynamicsParams) -> f64 {
    let n = params.depth as f64 - 1.0;
    n * u.powf(params.power()) * (shat - u) / params.tau
}

/// Mode strength at time `t` (same units as τ).
pub fn s_of_t(t: f64, shat: f64, params: &DynamicsParams) -> Result<f64> {
    params.check_target(shat)?;
    if !(t >= 0.0) {
        return Err(Error::ConfigInvalid(format!("time must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(params.eps);
    }
    if t.is_infinite() {
        return Ok(shat);
    }
    Ok(match params.depth {
        3 => {
            let decay = (-2.0 * shat * t / params.tau).exp();
            shat / (1.0 + (shat / params.eps - 1.0) * decay)
        }
        5 => invert_depth5(t, shat, params),
        _ => ode::integrate(
            |_, u| mode_ode_rhs(u.max(0.0), shat, params),
            0.0,
            params.eps,
            t,
            Tolerance::default(),
        )
        .min(shat),
    })
}

/// Time at which the mode reaches strength `s`.
pub fn t_of_s(s: f64, shat: f64, params: &DynamicsParams) -> Result<f64> {
    params.check_target(shat)?;
    let eps = params.eps;
    if !(s >= eps && s < shat) {
        return Err(Error::OutOfRange {
            s,
            lo: eps,
            hi: shat,
        });
    }
    Ok(match params.depth {
        3 => params.tau / (2.0 * shat) * ((shat - eps) / eps * s / (shat - s)).ln(),
        5 => depth5_time(s, shat, params),
        _ => {
            // dt/d(ln u) = τ u^{1−p} / ((N_l−1)(ŝ−u))
            let n = params.depth as f64 - 1.0;
            let p = params.power();
            let tau = params.tau;
            ode::integrate(
                |x, _| {
                    let u = x.exp();
                    tau * u.powf(1.0 - p) / (n * (shat - u))
                },
                eps.ln(),
                0.0,
                s.ln(),
                Tolerance::default(),
            )
        }
    })
}

/// Half-rise time. Closed form `τ/(2ŝ)·ln(ŝ/ε − 1)` for three layers; deeper
/// networks use `t_of_s(ŝ/2)`.
pub fn transition_time(shat: f64, params: &DynamicsParams) -> Result<f64> {
    params.check_target(shat)?;
    if params.depth == 3 {
        return Ok(params.tau / (2.0 * shat) * (shat / params.eps - 1.0).ln());
    }
    t_of_s(0.5 * shat, shat, params)
}

fn depth5_antiderivative(u: f64, shat: f64) -> f64 {
    (u / shat).sqrt().atanh() / shat.powf(1.5) - 1.0 / (shat * u.sqrt())
}

fn depth5_time(s: f64, shat: f64, params: &DynamicsParams) -> f64 {
    0.5 * params.tau * (depth5_antiderivative(s, shat) - depth5_antiderivative(params.eps, shat))
}

fn invert_depth5(t: f64, shat: f64, params: &DynamicsParams) -> f64 {
    let mut lo = params.eps;
    let mut hi = shat;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if depth5_time(mid, shat, params) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dp(eps: f64, depth: usize) -> DynamicsParams {
        DynamicsParams::new(eps, 1.0, depth).unwrap()
    }

    #[test]
    fn initial_and_final_values() {
        for depth in [3, 4, 5, 6] {
            let p = dp(1e-3, depth);
            assert_eq!(s_of_t(0.0, 3.0, &p).unwrap(), 1e-3);
            assert_eq!(s_of_t(f64::INFINITY, 3.0, &p).unwrap(), 3.0);
            assert!((s_of_t(200.0, 3.0, &p).unwrap() - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn half_rise_example() {
        let p = dp(0.01, 3);
        let t = (299f64).ln() / 6.0;
        assert!((t - 0.9501).abs() < 1e-4);
        assert!((s_of_t(t, 3.0, &p).unwrap() - 1.5).abs() < 1e-12);
        assert!((transition_time(3.0, &p).unwrap() - t).abs() < 1e-12);
    }

    #[test]
    fn round_trip_depth3() {
        // Bulk-scale targets keep ŝ − s resolvable in f64 up to t = 10τ.
        let p = dp(1e-3, 3);
        for shat in [0.3, 0.5, 0.8] {
            for i in 0..=100 {
                let t = 0.1 * i as f64;
                let s = s_of_t(t, shat, &p).unwrap();
                assert!((t_of_s(s, shat, &p).unwrap() - t).abs() < 1e-9, "ŝ={shat} t={t}");
            }
        }
        assert_eq!(t_of_s(1e-3, 2.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn t_of_s_diverges() {
        for depth in [3, 5, 7] {
            let p = dp(1e-3, depth);
            let a = t_of_s(0.99 * 3.0, 3.0, &p).unwrap();
            let b = t_of_s(0.999 * 3.0, 3.0, &p).unwrap();
            assert!(b > a);
        }
    }

    #[test]
    fn domain_errors() {
        let p = dp(1e-3, 3);
        assert!(matches!(s_of_t(1.0, 0.0, &p), Err(Error::NonPositiveMode(_))));
        assert!(matches!(s_of_t(1.0, 1e-4, &p), Err(Error::InvalidInit { .. })));
        assert!(matches!(t_of_s(3.0, 3.0, &p), Err(Error::OutOfRange { .. })));
        assert!(matches!(t_of_s(1e-4, 3.0, &p), Err(Error::OutOfRange { .. })));
        assert!(matches!(transition_time(1e-4, &p), Err(Error::InvalidInit { .. })));
        assert!(DynamicsParams::new(1e-3, 1.0, 2).is_err());
        assert!(DynamicsParams::new(0.0, 1.0, 3).is_err());
    }

    #[test]
    fn rhs_values() {
        let p3 = dp(1e-3, 3);
        assert!((mode_ode_rhs(0.7, 2.0, &p3) - 2.0 * 0.7 * 1.3).abs() < 1e-14);
        assert_eq!(mode_ode_rhs(2.0, 2.0, &p3), 0.0);
        assert!((mode_ode_rhs(1.0, 2.0, &dp(1e-3, 5)) - 4.0).abs() < 1e-14);
        let slow = DynamicsParams::new(1e-3, 2.0, 3).unwrap();
        assert!((mode_ode_rhs(0.7, 2.0, &slow) - 0.7 * 1.3).abs() < 1e-14);
    }

    #[test]
    fn depth5_closed_form_matches_ode() {
        let p = dp(1e-3, 5);
        let shat = 3.0;
        let t_half = t_of_s(1.5, shat, &p).unwrap();
        for i in 1..=50 {
            let t = 2.0 * t_half * i as f64 / 50.0;
            let closed = s_of_t(t, shat, &p).unwrap();
            let ode = ode::integrate(
                |_, u| mode_ode_rhs(u, shat, &p),
                0.0,
                p.eps(),
                t,
                Tolerance {
                    rel: 1e-9,
                    abs: 1e-12,
                },
            );
            assert!((closed - ode).abs() < 1e-6, "t={t}: {closed} vs {ode}");
        }
    }

    #[test]
    fn generic_depth_inverse_pair() {
        let p = dp(1e-2, 4);
        for &t in &[0.3, 1.0, 2.5] {
            let s = s_of_t(t, 2.0, &p).unwrap();
            let back = t_of_s(s, 2.0, &p).unwrap();
            assert!((back - t).abs() < 1e-7, "{t} -> {s} -> {back}");
        }
    }

    #[test]
    fn deeper_is_later() {
        let s3 = transition_time(3.0, &dp(1e-3, 3)).unwrap();
        let s5 = transition_time(3.0, &dp(1e-3, 5)).unwrap();
        assert!(s5 > s3);
        let p = dp(1e-3, 3);
        assert!(transition_time(6.0, &p).unwrap() < transition_time(2.0, &p).unwrap());
    }
}
