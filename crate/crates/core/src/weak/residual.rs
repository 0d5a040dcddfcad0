use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TestFunction;
use crate::error::{Error, Result};
use crate::fit::log_log;
use crate::fixtures::CoefficientField;
use crate::grid::{for_each_row, gradient, jet, Gradient, MultiIndex, VectorField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `R(φ) = Σ_nodes a(x,u) Du : Dφ hⁿ`.
    pub residual: f64,
    /// `‖Dφ‖₂ · ‖Du‖₂` over the support of φ.
    pub normalization: f64,
    /// `|R| / normalization`, when the normalization is positive.
    pub relative: Option<f64>,
    pub h: f64,
    /// Slope of `log |R|/norm` against `log h`, when several resolutions ran.
    pub refinement_slope: Option<f64>,
}

fn check_shapes(u: &VectorField, phi: &TestFunction) -> Result<()> {
    if phi.n() != u.spec().n() || phi.components() != u.components() {
        return Err(Error::Parameter(format!(
            "test function shape ({}, {}) does not match the field ({}, {})",
            phi.n(),
            phi.components(),
            u.spec().n(),
            u.components()
        )));
    }
    phi.check_support(u.spec())
}

fn residual_with(u: &VectorField, grad: &Gradient, a: &CoefficientField, phi: &TestFunction) -> Result<ResidualReport> {
    check_shapes(u, phi)?;
    let spec = u.spec();
    let n = spec.n();
    let m = u.components();
    if a.n != n || a.m != m {
        return Err(Error::Parameter("coefficient field shape does not match the solution".into()));
    }
    let support = phi.support_ball();
    let h = spec.h();
    let mut dphi = vec![0.0; n * m];
    let mut flux = vec![0.0; n * m];
    let (mut r, mut nphi, mut nu) = (0.0, 0.0, 0.0);
    for_each_row(spec, &support.center, support.radius + 2.0 * h, |base, lo, hi| {
        for i in base + lo..base + hi {
            if !u.mask()[i] {
                continue;
            }
            let x = spec.point(i);
            let x = &x[..n];
            phi.fd_gradient(x, h, &mut dphi);
            let gp: f64 = dphi.iter().map(|v| v * v).sum();
            if gp == 0.0 {
                continue;
            }
            let du = grad.at(i);
            a.flux(x, u.node(i), du, &mut flux);
            r += flux.iter().zip(&dphi).map(|(p, q)| p * q).sum::<f64>();
            nphi += gp;
            nu += du.iter().map(|v| v * v).sum::<f64>();
        }
    });
    let hn = spec.cell_volume();
    let residual = r * hn;
    let normalization = (nphi * hn).sqrt() * (nu * hn).sqrt();
    Ok(ResidualReport {
        residual,
        normalization,
        relative: (normalization > 0.0).then(|| residual.abs() / normalization),
        h: spec.h(),
        refinement_slope: None,
    })
}

/// Residual of the second-order system `−∂_j(a_ij^kl ∂_i u^k) = 0` tested
/// against `φ`. Both `Du` and `Dφ` use central differences, so that the
/// discrete form annihilates constant fluxes exactly.
pub fn weak_residual(u: &VectorField, a: &CoefficientField, phi: &TestFunction) -> Result<ResidualReport> {
    let grad = gradient(u)?;
    residual_with(u, &grad, a, phi)
}

/// Residual of the order-`m` system with `A_γ(x, D^m u) = ∂^γ u` for
/// `|γ| = m` (weighted by the multinomial count), i.e. the weak form of
/// `(−Δ)^m u = 0` on the top-order tensor.
pub fn weak_residual_higher(u: &VectorField, m: u32, phi: &TestFunction) -> Result<ResidualReport> {
    check_shapes(u, phi)?;
    if m == 0 || m > 2 {
        return Err(Error::Parameter(format!("order {m} not in 1..=2")));
    }
    let spec = u.spec();
    let n = spec.n();
    let j = jet(u, m)?;
    let top: Vec<_> = j.top_order().collect();
    let support = phi.support_ball();
    let (mut r, mut nphi, mut nu) = (0.0, 0.0, 0.0);
    let gammas = MultiIndex::of_order(n, m);
    let h = spec.h();
    for_each_row(spec, &support.center, support.radius + 2.0 * h, |base, lo, hi| {
        for i in base + lo..base + hi {
            let x = spec.point(i);
            let x = &x[..n];
            for g in &gammas {
                let w = g.multinomial();
                let p = phi.fd_profile(g, x, h);
                for e in top.iter().filter(|e| &e.gamma == g) {
                    let du = e.derivative.field.values()[i];
                    let dp = p * phi.direction[e.component];
                    r += w * du * dp;
                    nphi += w * dp * dp;
                    nu += w * du * du;
                }
            }
        }
    });
    let hn = spec.cell_volume();
    let residual = r * hn;
    let normalization = (nphi * hn).sqrt() * (nu * hn).sqrt();
    Ok(ResidualReport {
        residual,
        normalization,
        relative: (normalization > 0.0).then(|| residual.abs() / normalization),
        h: spec.h(),
        refinement_slope: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryRow {
    pub cells: usize,
    pub h: f64,
    pub reports: Vec<ResidualReport>,
    pub max_relative: f64,
    pub mean_relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub rows: Vec<BatteryRow>,
    /// Slope of `log max_relative` against `log h` (needs ≥ 2 rows).
    pub slope: Option<f64>,
    /// Smallest per-function slope.
    pub min_function_slope: Option<f64>,
}

/// Residuals of one system over the battery at several resolutions of the
/// same solution. Test functions run concurrently; each residual is a
/// fixed-order sum.
pub fn battery_residuals(
    fields: &[VectorField],
    a: &CoefficientField,
    battery: &[TestFunction],
) -> Result<BatteryReport> {
    if battery.is_empty() {
        return Err(Error::Config("empty test-function battery".into()));
    }
    let mut rows = Vec::with_capacity(fields.len());
    for u in fields {
        let grad = gradient(u)?;
        let reports: Vec<ResidualReport> = battery
            .par_iter()
            .map(|phi| residual_with(u, &grad, a, phi))
            .collect::<Result<_>>()?;
        let rel: Vec<f64> = reports.iter().map(|r| r.relative.unwrap_or(0.0)).collect();
        rows.push(BatteryRow {
            cells: u.spec().cells(),
            h: u.spec().h(),
            max_relative: rel.iter().copied().fold(0.0, f64::max),
            mean_relative: rel.iter().sum::<f64>() / rel.len() as f64,
            reports,
        });
    }
    let mut slope = None;
    let mut min_function_slope = None;
    if rows.len() >= 2 {
        let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let maxes: Vec<f64> = rows.iter().map(|r| r.max_relative).collect();
        slope = log_log(&hs, &maxes, 2).ok().map(|f| f.slope);
        let mut worst = f64::INFINITY;
        for k in 0..battery.len() {
            let ys: Vec<f64> = rows.iter().map(|r| r.reports[k].relative.unwrap_or(0.0)).collect();
            if let Ok(f) = log_log(&hs, &ys, 2) {
                for row in rows.iter_mut() {
                    row.reports[k].refinement_slope = Some(f.slope);
                }
                worst = worst.min(f.slope);
            }
        }
        min_function_slope = worst.is_finite().then_some(worst);
    }
    Ok(BatteryReport { rows, slope, min_function_slope })
}
