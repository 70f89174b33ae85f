//! Estimators of the homogeneous Besov norm `‖f‖_{B^s_{p,q}}`.
//!
//! Three routes are provided:
//!
//! * [`besov_norm_difference`]: the difference definition
//!   `(∫ |h|^{-qs} ‖f(.+h) - f‖_p^q dh/|h|^n)^{1/q}` discretized over dyadic
//!   annuli of lattice offsets, with [`besov_norm_oracle`] as its exhaustive
//!   reference;
//! * [`besov_norm_cp`]: the ball-oscillation profile `C_p(f)(t)` integrated
//!   against `t^{-sq} dt/t`;
//! * [`hajlasz_upper_bound`]: an `ℓ^q(L^p)` norm of a feasible fractional
//!   Hajłasz gradient.
//!
//! The three agree only up to equivalence constants.
//! [`separated`] evaluates the same difference norm for families of bumps
//! living at widely different scales, where a single uniform grid is not
//! practical.

mod cp;
pub(crate) mod difference;
mod hajlasz;
pub mod separated;

pub use cp::{
    besov_norm_cp, besov_norm_cp_traced, cp_profile, cp_profile_with, dyadic_scales, CpOptions,
    CpProfile,
};
pub use difference::{
    besov_norm_difference, besov_norm_difference_traced, besov_norm_oracle,
    besov_norm_oracle_with_radius, default_outer_radius, default_sampler, LevelTrace, NormTrace,
};
pub use hajlasz::{
    default_hajlasz_levels, hajlasz_halfsup_gradient, hajlasz_norm, hajlasz_upper_bound,
    HajlaszGradient, HajlaszLevel,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothness `s`, integrability `p`, fine index `q` and dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub n: u32,
    pub s: f64,
    pub p: f64,
    pub q: f64,
    /// When set, `p` must equal `n/s`.
    pub scaling_invariant: bool,
}

impl BesovParams {
    /// Scaling-invariant parameters `p = n/s` in the plane.
    pub fn scaling_invariant(s: f64, q: f64) -> Result<Self> {
        let n = crate::grid::DIM;
        let params = BesovParams {
            n,
            s,
            p: f64::from(n) / s,
            q,
            scaling_invariant: true,
        };
        params.validate()?;
        Ok(params)
    }

    /// Parameters with an explicit `p`, not tied to `n/s`.
    pub fn with_p(s: f64, p: f64, q: f64) -> Result<Self> {
        let params = BesovParams {
            n: crate::grid::DIM,
            s,
            p,
            q,
            scaling_invariant: false,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.diagnostics();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(errs.join("; ")))
        }
    }

    /// Every violated constraint, as human-readable messages.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n < 2 || self.n > 3 {
            out.push(format!("n must be 2 or 3, got {}", self.n));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            out.push(format!("s out of (0,1): {}", self.s));
        }
        if self.q.is_nan() || self.q < 1.0 {
            out.push(format!("q must be >= 1, got {}", self.q));
        }
        let n = f64::from(self.n);
        if self.p.is_nan() || self.p < 1.0 || self.p <= n / (n + self.s) {
            out.push(format!("p must be >= 1 and > n/(n+s), got {}", self.p));
        }
        if self.scaling_invariant && self.s > 0.0 && self.p != n / self.s {
            out.push(format!(
                "scaling-invariant parameters require p = n/s = {}, got {}",
                n / self.s,
                self.p
            ));
        }
        out
    }

    /// Same parameters with another fine index.
    pub fn with_q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    /// `(n - 1)`-measure of the unit sphere in `R^n`.
    pub fn sphere_measure(&self) -> f64 {
        match self.n {
            2 => 2.0 * std::f64::consts::PI,
            3 => 4.0 * std::f64::consts::PI,
            n => {
                // 2 π^{n/2} / Γ(n/2) for completeness; only n = 2, 3 are used.
                let half = f64::from(n) / 2.0;
                2.0 * std::f64::consts::PI.powf(half) / gamma_half_integer(half)
            }
        }
    }
}

fn gamma_half_integer(x: f64) -> f64 {
    // Γ for positive integers and half-integers by recursion.
    if (x - 0.5).abs() < 1e-12 {
        return std::f64::consts::PI.sqrt();
    }
    if (x - 1.0).abs() < 1e-12 {
        return 1.0;
    }
    (x - 1.0) * gamma_half_integer(x - 1.0)
}

/// `(Σ a_i^q)^{1/q}`, or the max for `q = ∞`.
pub fn lq_sum(values: impl IntoIterator<Item = f64>, q: f64) -> f64 {
    if q.is_infinite() {
        values.into_iter().fold(0.0, f64::max)
    } else {
        values
            .into_iter()
            .map(|v| v.powf(q))
            .sum::<f64>()
            .powf(1.0 / q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(BesovParams::scaling_invariant(0.5, 2.0).is_ok());
        assert_eq!(BesovParams::scaling_invariant(0.5, 2.0).unwrap().p, 4.0);
        assert!(BesovParams::scaling_invariant(1.5, 2.0).is_err());
        assert!(BesovParams::scaling_invariant(0.5, 0.5).is_err());
        assert!(BesovParams::scaling_invariant(0.5, f64::INFINITY).is_ok());
        let mut p = BesovParams::scaling_invariant(0.5, 2.0).unwrap();
        p.p = 3.0;
        assert!(p.validate().is_err());
        p.scaling_invariant = false;
        assert!(p.validate().is_ok());
        let d = BesovParams::with_p(1.5, 0.5, 0.5).unwrap_err().to_string();
        assert!(d.contains("s out of (0,1)"));
    }

    #[test]
    fn sphere_measures() {
        let mut p = BesovParams::scaling_invariant(0.5, 2.0).unwrap();
        assert!((p.sphere_measure() - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        p.n = 3;
        assert!((p.sphere_measure() - 4.0 * std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn lq_sum_monotone_in_q() {
        let a = [0.3, 1.2, 0.7, 2.0];
        let mut prev = f64::INFINITY;
        for q in [1.0, 2.0, 3.0, 8.0, f64::INFINITY] {
            let v = lq_sum(a, q);
            assert!(v <= prev);
            prev = v;
        }
        assert_eq!(lq_sum(a, f64::INFINITY), 2.0);
    }
}
