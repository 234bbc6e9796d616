//! Operator parameter records: growth bounds, integrability exponents and
//! the coupling inequalities between them.

use crate::error::{Error, Result};

/// Constants attached to an operator handle.
///
/// `omega_a`/`m_a` are the growth bound and stability constant of the
/// semigroup generated by the part of the operator in its domain closure,
/// `p` the convolution integrability exponent, `omega_b`/`p_star` the decay
/// data of an analytic (almost sectorial) partner, and `alpha`, `eta`,
/// `lambda0`, `r` the derived thresholds used by the sum constructions.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorParams {
    /// Growth bound of the domain-part semigroup.
    pub omega_a: f64,
    /// Stability constant, at least 1.
    pub m_a: f64,
    /// Convolution exponent, > 1.
    pub p: f64,
    /// Growth bound of the analytic partner.
    pub omega_b: f64,
    /// Almost-sectorial resolvent decay exponent, in [1, inf).
    pub p_star: f64,
    /// Conjugate of `p_star`: 1/p* + 1/q* = 1.
    pub q_star: f64,
    /// Derivative-semigroup singularity exponent, in (1/q*, 1/p).
    pub alpha: f64,
    /// Exponential weight, > max(0, omega_a).
    pub eta: f64,
    /// Resolvent threshold for the sum constructions.
    pub lambda0: f64,
    /// Regularity exponent: 1 + 1/r < 1/p + 1/p*.
    pub r: f64,
}

impl OperatorParams {
    /// Parameters for the reference configuration p = q = 2, where the
    /// analytic partner has p* = 2q/(1+q) = 4/3 and q* = 4.
    pub fn reference(omega_a: f64, m_a: f64, omega_b: f64) -> Self {
        let p = 2.0;
        let p_star = 4.0 / 3.0;
        let q_star = 1.0 / (1.0 - 1.0 / p_star);
        let eta = (omega_a.max(0.0)) + 0.5;
        OperatorParams {
            omega_a,
            m_a,
            p,
            omega_b,
            p_star,
            q_star,
            // midpoint of the admissible band (1/q*, 1/p) = (1/4, 1/2)
            alpha: 0.5 * (1.0 / q_star + 1.0 / p),
            eta,
            lambda0: eta + omega_b.max(0.0) + 1.0,
            r: 5.0,
        }
    }

    /// Check every coupling inequality; messages name the violated rule.
    pub fn validate(&self) -> Result<()> {
        if self.m_a < 1.0 {
            return Err(Error::argument(format!("m_a = {} must be >= 1", self.m_a)));
        }
        if self.p <= 1.0 {
            return Err(Error::argument(format!("p = {} must be > 1", self.p)));
        }
        if self.p_star < 1.0 {
            return Err(Error::argument(format!(
                "p_star = {} must be >= 1",
                self.p_star
            )));
        }
        let conj = 1.0 / self.p_star + 1.0 / self.q_star;
        if (conj - 1.0).abs() > 1e-12 {
            return Err(Error::argument(format!(
                "q_star = {} is not conjugate to p_star = {}: 1/p* + 1/q* = {conj}",
                self.q_star, self.p_star
            )));
        }
        if 1.0 / self.p + 1.0 / self.p_star <= 1.0 {
            return Err(Error::argument(format!(
                "exponent coupling violated: 1/p + 1/p* = {} must exceed 1",
                1.0 / self.p + 1.0 / self.p_star
            )));
        }
        if !(self.alpha > 1.0 / self.q_star && self.alpha < 1.0 / self.p) {
            return Err(Error::argument(format!(
                "alpha = {} outside the admissible band (1/q*, 1/p) = ({}, {})",
                self.alpha,
                1.0 / self.q_star,
                1.0 / self.p
            )));
        }
        if self.eta <= self.omega_a.max(0.0) {
            return Err(Error::argument(format!(
                "eta = {} must exceed max(0, omega_a) = {}",
                self.eta,
                self.omega_a.max(0.0)
            )));
        }
        if 1.0 + 1.0 / self.r >= 1.0 / self.p + 1.0 / self.p_star {
            return Err(Error::argument(format!(
                "regularity exponent violated: 1 + 1/r = {} must stay below 1/p + 1/p* = {}",
                1.0 + 1.0 / self.r,
                1.0 / self.p + 1.0 / self.p_star
            )));
        }
        Ok(())
    }

    /// Bound constant for the limit operator:
    /// `M_A^{1 + 1/p} / (1 - e^{omega_a - eta})`; requires `eta > omega_a`.
    pub fn kappa_bound_constant(&self, eta: f64) -> f64 {
        self.m_a.powf(1.0 + 1.0 / self.p) / (1.0 - (self.omega_a - eta).exp())
    }
}

impl Default for OperatorParams {
    fn default() -> Self {
        OperatorParams::reference(0.0, 1.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_params_validate() {
        let p = OperatorParams::reference(-1.0, 1.0, -9.87);
        p.validate().unwrap();
        assert!((p.p_star - 4.0 / 3.0).abs() < 1e-15);
        assert!((p.q_star - 4.0).abs() < 1e-12);
        assert!((p.alpha - 0.375).abs() < 1e-12);
    }

    #[test]
    fn bad_alpha_rejected() {
        let mut p = OperatorParams::reference(0.0, 1.0, 0.0);
        p.alpha = 0.6; // above 1/p = 0.5
        assert!(p.validate().is_err());
    }

    #[test]
    fn bad_regularity_exponent_rejected() {
        let mut p = OperatorParams::reference(0.0, 1.0, 0.0);
        p.r = 4.0; // 1 + 1/4 = 1.25 = 1/p + 1/p*, not strictly below
        assert!(p.validate().is_err());
    }

    #[test]
    fn kappa_bound_scalar_case() {
        // m_a = 1, p = 2, omega_a = -1, eta = 1: 1 / (1 - e^{-2}).
        let p = OperatorParams::reference(-1.0, 1.0, 0.0);
        let c = p.kappa_bound_constant(1.0);
        assert!((c - 1.0 / (1.0 - (-2.0f64).exp())).abs() < 1e-14);
    }
}
