//! Weak-form verification of elliptic systems: residuals against a fixed
//! test-function battery, structure conditions, the Caccioppoli ratio and
//! the monotone quantity Φ.

mod caccioppoli;
mod monotonicity;
mod residual;
mod structure;

pub use caccioppoli::{caccioppoli_check, CaccioppoliProfile, CaccioppoliRow};
pub use monotonicity::{monotonicity_check, MonotonicityProfile, MonotonicityRow};
pub use residual::{
    battery_residuals, weak_residual, weak_residual_higher, BatteryReport, BatteryRow, ResidualReport,
};
pub use structure::{structure_check, StructureReport, Violation};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Ball, GridSpec, MultiIndex};
use crate::numeric::{bump, random_direction, seeded_rng};

/// `φ(x) = v · Π_a ψ((x_a − c_a)/ρ)` with `ψ` the standard bump. The support
/// is the cube of half-width `ρ`, inside the ball of radius `ρ√n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: Vec<f64>,
    pub half_width: f64,
    pub direction: Vec<f64>,
}

/// `ψ`, `ψ'`, `ψ''` at `t`.
fn bump_derivs(t: f64) -> [f64; 3] {
    let s = 1.0 - t * t;
    if s <= 0.0 {
        return [0.0; 3];
    }
    let g = bump(t * t);
    let q = 2.0 * t / (s * s);
    [g, -g * q, g * (q * q - 2.0 / (s * s) - 8.0 * t * t / (s * s * s))]
}

impl TestFunction {
    pub fn new(center: Vec<f64>, half_width: f64, direction: Vec<f64>) -> Self {
        TestFunction { center, half_width, direction }
    }

    pub fn n(&self) -> usize {
        self.center.len()
    }

    pub fn components(&self) -> usize {
        self.direction.len()
    }

    /// Smallest ball containing the support.
    pub fn support_ball(&self) -> Ball {
        Ball::new(self.center.clone(), self.half_width * (self.n() as f64).sqrt())
    }

    /// Reject supports closer than `2h` to the boundary of Ω.
    pub fn check_support(&self, spec: &GridSpec) -> Result<()> {
        let b = self.support_ball();
        let padded = Ball::new(b.center.clone(), b.radius + 2.0 * spec.h());
        if !spec.contains_ball(&padded) {
            return Err(Error::NotContained { center: padded.center, radius: padded.radius });
        }
        Ok(())
    }

    /// Scalar profile `∂^γ Π_a ψ(t_a)`; per-axis orders up to 2.
    pub fn profile(&self, gamma: &MultiIndex, x: &[f64]) -> Result<f64> {
        let mut out = 1.0;
        for a in 0..self.n() {
            let o = gamma.0[a] as usize;
            if o > 2 {
                return Err(Error::Parameter(format!("test-function derivative of order {o} along one axis")));
            }
            let t = (x[a] - self.center[a]) / self.half_width;
            out *= bump_derivs(t)[o] / self.half_width.powi(o as i32);
            if out == 0.0 {
                break;
            }
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        let p = self.profile(&MultiIndex::zero(self.n()), x).expect("order 0");
        for (o, v) in out.iter_mut().zip(&self.direction) {
            *o = p * v;
        }
    }

    /// `∂_j φ^l` at `out[l * n + j]`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n();
        let mut d = [[0.0; 3]; crate::grid::MAX_DIM];
        for a in 0..n {
            d[a] = bump_derivs((x[a] - self.center[a]) / self.half_width);
        }
        for j in 0..n {
            let mut p = d[j][1] / self.half_width;
            for a in (0..n).filter(|&a| a != j) {
                p *= d[a][0];
            }
            for l in 0..self.components() {
                out[l * n + j] = p * self.direction[l];
            }
        }
    }

    /// Central-difference `∂^γ` of the profile with step `h` (per-axis
    /// orders up to 2), the same stencils the grid applies to `u`. Summed
    /// over a grid these telescope, so constant fluxes give zero residual.
    pub fn fd_profile(&self, gamma: &MultiIndex, x: &[f64], h: f64) -> f64 {
        let n = self.n();
        let mut terms: Vec<(Vec<f64>, f64)> = vec![(x.to_vec(), 1.0)];
        for a in 0..n {
            let stencil: &[(f64, f64)] = match gamma.0[a] {
                0 => continue,
                1 => &[(1.0, 0.5), (-1.0, -0.5)],
                _ => &[(1.0, 1.0), (0.0, -2.0), (-1.0, 1.0)],
            };
            let scale = h.powi(gamma.0[a] as i32);
            terms = terms
                .into_iter()
                .flat_map(|(p, w)| {
                    stencil.iter().map(move |&(s, c)| {
                        let mut q = p.clone();
                        q[a] += s * h;
                        (q, w * c / scale)
                    })
                })
                .collect();
        }
        let zero = MultiIndex::zero(n);
        terms.iter().map(|(p, w)| w * self.profile(&zero, p).expect("order 0")).sum()
    }

    /// Central-difference gradient, `out[l * n + j]`.
    pub fn fd_gradient(&self, x: &[f64], h: f64, out: &mut [f64]) {
        let n = self.n();
        for j in 0..n {
            let p = self.fd_profile(&MultiIndex::unit(n, j), x, h);
            for l in 0..self.components() {
                out[l * n + j] = p * self.direction[l];
            }
        }
    }

    /// The fixed battery: 5 centres at distance 0.5 from the origin in
    /// seeded random directions, times 3 half-widths whose support balls
    /// have radii 0.3, 0.225 and 0.15. Supports stay inside the shell
    /// `0.2 < |x| < 0.8`.
    pub fn battery(n: usize, components: usize, seed: u64) -> Vec<TestFunction> {
        let mut rng = seeded_rng(seed);
        let centres: Vec<Vec<f64>> = (0..5)
            .map(|_| random_direction(&mut rng, n).into_iter().map(|v| 0.5 * v).collect())
            .collect();
        let mut out = Vec::with_capacity(15);
        for c in &centres {
            for s in [0.3, 0.225, 0.15] {
                let mut v = random_direction(&mut rng, components);
                // avoid near-degenerate directions in one-component systems
                if components == 1 {
                    v[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
                out.push(TestFunction::new(c.clone(), s / (n as f64).sqrt(), v));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_derivatives_match_differences() {
        for t in [-0.8, -0.3, 0.0, 0.45, 0.9] {
            let e = 1e-6;
            let [_, d1, d2] = bump_derivs(t);
            let fd1 = (bump_derivs(t + e)[0] - bump_derivs(t - e)[0]) / (2.0 * e);
            let fd2 = (bump_derivs(t + e)[1] - bump_derivs(t - e)[1]) / (2.0 * e);
            assert!((d1 - fd1).abs() < 1e-7 && (d2 - fd2).abs() < 1e-6, "t={t}");
        }
        assert_eq!(bump_derivs(1.0), [0.0; 3]);
    }

    #[test]
    fn differences_converge_to_closed_form() {
        let phi = TestFunction::new(vec![0.0, 0.0], 0.5, vec![1.0]);
        let x = [0.13, -0.21];
        for g in [MultiIndex(vec![1, 0]), MultiIndex(vec![1, 1]), MultiIndex(vec![0, 2])] {
            let exact = phi.profile(&g, &x).unwrap();
            let e1 = (phi.fd_profile(&g, &x, 0.01) - exact).abs();
            let e2 = (phi.fd_profile(&g, &x, 0.005) - exact).abs();
            assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5, "{g:?}: {e1} {e2}");
        }
    }

    #[test]
    fn battery_layout() {
        let b = TestFunction::battery(3, 3, 42);
        assert_eq!(b.len(), 15);
        for phi in &b {
            let c = phi.center.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((c - 0.5).abs() < 1e-12);
            let r = phi.support_ball().radius;
            assert!(c - r >= 0.2 - 1e-12 && c + r <= 0.8 + 1e-12);
        }
        assert_eq!(b, TestFunction::battery(3, 3, 42));
    }

    #[test]
    fn gradient_matches_profile_derivatives() {
        let phi = TestFunction::new(vec![0.1, -0.2, 0.3], 0.2, vec![1.0, -2.0]);
        let x = [0.15, -0.25, 0.22];
        let mut g = [0.0; 6];
        phi.gradient(&x, &mut g);
        for j in 0..3 {
            let p = phi.profile(&MultiIndex::unit(3, j), &x).unwrap();
            assert!((g[j] - p).abs() < 1e-14 && (g[3 + j] + 2.0 * p).abs() < 1e-14);
        }
    }
}
