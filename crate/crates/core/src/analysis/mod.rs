//! Morrey norms, Riesz potentials, the maximal function, mollification,
//! the Zorko distance and the potential representation of compactly
//! supported functions.

mod family;
mod maximal;
mod mollify;
mod morrey;
mod representation;
mod riesz;

pub use family::{dyadic_radii, BallFamily, CenterLattice};
pub use maximal::maximal_function;
pub use mollify::{mollify, zorko_distance};
pub use morrey::{morrey_norm, morrey_profile, MorreyNorm};
pub use representation::{representation_reconstruct, Reconstruction};
pub use riesz::{riesz_potential, riesz_potential_at, riesz_potential_cellwise, self_cell_term};
pub(crate) use riesz::{convolve, KernelTable};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponents of a Morrey space `L^{p,λ}` and the optional potential order
/// `α`, relaxed exponent `μ`, derivative order `m` and integrability `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorreyParams {
    pub p: f64,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

impl MorreyParams {
    pub fn new(p: f64, lambda: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Parameter(format!("p = {p} must be a finite number > 1")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Parameter(format!("λ = {lambda} must be positive")));
        }
        Ok(MorreyParams { p, lambda, alpha: None, mu: None, m: None, q: None })
    }

    /// The exponent of `|D^m u|` for a solution in `W^{m,p} ∩ L^q`:
    /// `λ = (m + n/q)·p`, with `q = ∞` giving `λ = m·p`.
    pub fn for_solution(m: u32, n: usize, p: f64, q: f64) -> Result<Self> {
        if !(q > p) {
            return Err(Error::Parameter(format!("q = {q} must exceed p = {p}")));
        }
        let lambda = (m as f64 + n as f64 / q) * p;
        if lambda >= n as f64 {
            return Err(Error::Regime(format!("λ = (m + n/q)p = {lambda} is not below n = {n}")));
        }
        let mut out = MorreyParams::new(p, lambda)?;
        out.m = Some(m);
        out.q = Some(q);
        Ok(out)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Parameter(format!("α = {alpha} must be positive")));
        }
        self.alpha = Some(alpha);
        Ok(self)
    }

    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        if mu < self.lambda {
            return Err(Error::Parameter(format!("μ = {mu} is below λ = {}", self.lambda)));
        }
        self.mu = Some(mu);
        Ok(self)
    }

    /// Check the exponents against the ambient dimension.
    pub fn validate(&self, n: usize) -> Result<()> {
        let nf = n as f64;
        if self.lambda > nf {
            return Err(Error::Parameter(format!("λ = {} exceeds n = {n}", self.lambda)));
        }
        if let Some(a) = self.alpha {
            if a >= nf {
                return Err(Error::Parameter(format!("α = {a} must be below n = {n}")));
            }
        }
        if let Some(mu) = self.mu {
            if mu > nf {
                return Err(Error::Parameter(format!("μ = {mu} exceeds n = {n}")));
            }
        }
        Ok(())
    }

    /// `λ − α·p`, the ball-capacity scaling exponent.
    pub fn capacity_gap(&self) -> Option<f64> {
        self.alpha.map(|a| self.lambda - a * self.p)
    }

    /// True when `λ − α·p < 0`, outside the capacity scaling regime.
    pub fn outside_capacity_regime(&self) -> bool {
        self.capacity_gap().is_some_and(|g| g < 0.0)
    }

    /// Same parameters with λ replaced by μ.
    pub fn relaxed(&self) -> Result<MorreyParams> {
        let mu = self.mu.ok_or_else(|| Error::Parameter("μ is not set".into()))?;
        Ok(MorreyParams { lambda: mu, ..*self })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(MorreyParams::new(1.0, 1.0).is_err());
        assert!(MorreyParams::new(2.0, 0.0).is_err());
        let p = MorreyParams::new(2.0, 2.5).unwrap().with_alpha(1.0).unwrap();
        assert_eq!(p.capacity_gap(), Some(0.5));
        assert!(!p.outside_capacity_regime());
        assert!(p.validate(3).is_ok());
        assert!(p.validate(2).is_err());
        assert!(MorreyParams::new(2.0, 2.0).unwrap().with_mu(1.0).is_err());
    }

    #[test]
    fn solution_exponent() {
        let p = MorreyParams::for_solution(1, 3, 2.0, 12.0).unwrap();
        assert!((p.lambda - 2.5).abs() < 1e-12);
        let inf = MorreyParams::for_solution(1, 3, 2.0, f64::INFINITY).unwrap();
        assert_eq!(inf.lambda, 2.0);
        assert!(MorreyParams::for_solution(1, 3, 2.0, 4.0).is_err());
    }
}
