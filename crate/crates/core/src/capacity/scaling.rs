use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{morrey_capacity, nodes_in_ball, Basis, CapacityProblem, SolverOptions};
use crate::analysis::{dyadic_radii, BallFamily, CenterLattice, MorreyParams};
use crate::error::{Error, Result};
use crate::fit::least_squares;
use crate::grid::GridSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingRow {
    pub radius: f64,
    pub nodes: usize,
    pub capacity: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingFit {
    pub rows: Vec<ScalingRow>,
    /// Slope of `log C` against `log r`, or against `log(−ln r)` in the
    /// logarithmic case.
    pub slope: f64,
    pub intercept: f64,
    pub logarithmic: bool,
    /// `λ − αp`, or `−p` in the logarithmic case.
    pub expected: f64,
}

/// Dyadic lattice family from the inradius of `Ω` down to `2h`, centres at
/// cell corners spaced `r/2`.
pub fn capacity_family(spec: &GridSpec) -> BallFamily {
    let radii = dyadic_radii(spec.inradius(), 2.0 * spec.h());
    BallFamily::lattice(spec, &radii, 0.5, CenterLattice::Corners)
}

/// Node sets of the concentric balls `B_r(0)`.
pub fn ball_targets(spec: &GridSpec, radii: &[f64]) -> Vec<Vec<usize>> {
    let origin = vec![0.0; spec.n()];
    radii.iter().map(|&r| nodes_in_ball(spec, &origin, r)).collect()
}

/// Capacities of `B_r(0)` over the ladder and the fitted exponent.
pub fn ball_capacity_scaling(
    spec: Arc<GridSpec>,
    params: MorreyParams,
    radii: &[f64],
    solver: &SolverOptions,
) -> Result<ScalingFit> {
    let alpha = params.alpha.ok_or_else(|| Error::Parameter("capacity scaling needs α".into()))?;
    if radii.len() < 3 {
        return Err(Error::Fit(format!("{} radii, at least 3 needed", radii.len())));
    }
    let critical = params.lambda / alpha;
    let rel = (params.p - critical) / critical;
    if rel > 1e-12 {
        return Err(Error::Regime(format!("p = {} exceeds λ/α = {critical}", params.p)));
    }
    let logarithmic = rel.abs() <= 1e-12;
    if logarithmic && radii.iter().any(|&r| r >= 1.0) {
        return Err(Error::Parameter("logarithmic fit needs radii below 1".into()));
    }
    let floor = 2.0 * spec.h();
    if let Some(&r) = radii.iter().find(|&&r| r < floor * (1.0 - 1e-12)) {
        return Err(Error::Resolution { what: "ball radius", value: r, floor });
    }
    let family = capacity_family(&spec);
    let basis = Basis::RadialShells { center: vec![0.0; spec.n()], width: spec.h() / 2.0 };
    let solver = SolverOptions { basis, ..solver.clone() };
    let mut rows = Vec::with_capacity(radii.len());
    for (&r, target) in radii.iter().zip(ball_targets(&spec, radii)) {
        let res = morrey_capacity(&CapacityProblem {
            spec: spec.clone(),
            target: target.clone(),
            params,
            family: family.clone(),
            solver: solver.clone(),
        })?;
        log::info!("capacity r = {r}: {} ({} iterations)", res.value, res.iterations);
        rows.push(ScalingRow { radius: r, nodes: target.len(), capacity: res.value, iterations: res.iterations });
    }
    let x: Vec<f64> = rows.iter().map(|r| if logarithmic { (-r.radius.ln()).ln() } else { r.radius.ln() }).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.capacity.ln()).collect();
    let fit = least_squares(&x, &y, 3)?;
    let expected = if logarithmic { -params.p } else { params.lambda - alpha * params.p };
    Ok(ScalingFit { rows, slope: fit.slope, intercept: fit.intercept, logarithmic, expected })
}
