use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{hausdorff_content, morrey_capacity, CandidatePool, CapacityProblem, SolverOptions};
use crate::analysis::{dyadic_radii, BallFamily, MorreyParams};
use crate::error::{Error, Result};
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsocapCase {
    /// `1 < p < λ/α`: content bounded by a multiple of `C^(q/p)`.
    Power,
    /// `p = λ/α`: exponential decay of content as capacity vanishes.
    Exponential,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsocapRow {
    pub label: f64,
    pub nodes: usize,
    pub content: f64,
    pub capacity: f64,
    /// `C^(q/p)`.
    pub capacity_power: f64,
    /// `content / C^(q/p)`; absent for an empty set.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsocapReport {
    pub case: IsocapCase,
    pub rows: Vec<IsocapRow>,
    /// `max/min` of the ratios (power case).
    pub ratio_spread: Option<f64>,
    /// `ln Λ` strictly decreasing in `C^(−q/p)` (exponential case).
    pub decreasing: Option<bool>,
    /// Slopes of `ln Λ` against `C^(−q/p)` non-decreasing up to 10% (exponential case).
    pub convex: Option<bool>,
    pub vacuous: bool,
    pub passed: bool,
}

/// Classify `(p, λ, α, d, q)` or name the violated inequality.
pub fn isocap_case(n: usize, params: &MorreyParams, d: f64, q: f64) -> Result<IsocapCase> {
    let alpha = params.alpha.ok_or_else(|| Error::Parameter("isocapacitary check needs α".into()))?;
    let gap = params.lambda - alpha * params.p;
    let eps = 1e-12 * params.lambda.max(1.0);
    if gap < -eps {
        return Err(Error::Regime(format!("0 ≤ λ−αp violated: λ−αp = {gap}")));
    }
    if !(gap < d) {
        return Err(Error::Regime(format!("λ−αp < d violated: λ−αp = {gap}, d = {d}")));
    }
    if d > n as f64 {
        return Err(Error::Regime(format!("d ≤ n violated: d = {d}, n = {n}")));
    }
    if !(q > 0.0) {
        return Err(Error::Regime(format!("q = {q} must be positive")));
    }
    if gap.abs() <= eps {
        if q > 1.0 {
            return Err(Error::Regime(format!("q ≤ 1 violated at p = λ/α: q = {q}")));
        }
        Ok(IsocapCase::Exponential)
    } else {
        let qmax = d * params.p / gap;
        if !(q < qmax) {
            return Err(Error::Regime(format!("q < dp/(λ−αp) = {qmax} violated: q = {q}")));
        }
        Ok(IsocapCase::Power)
    }
}

/// Content and capacity of every set in the family, with the case-specific
/// verdict. `factor` bounds the ratio spread in the power case.
pub fn isocapacitary_check(
    spec: Arc<GridSpec>,
    params: MorreyParams,
    d: f64,
    q: f64,
    sets: &[(f64, Vec<usize>)],
    family: &BallFamily,
    solver: &SolverOptions,
    factor: f64,
) -> Result<IsocapReport> {
    let case = isocap_case(spec.n(), &params, d, q)?;
    let radii = dyadic_radii(spec.inradius(), 2.0 * spec.h());
    let mut rows = Vec::with_capacity(sets.len());
    for (label, target) in sets {
        if target.is_empty() {
            rows.push(IsocapRow { label: *label, nodes: 0, content: 0.0, capacity: 0.0, capacity_power: 0.0, ratio: None });
            continue;
        }
        let pool = CandidatePool::dyadic(&spec, target, &radii);
        let content = hausdorff_content(&pool, d)?.content_value;
        let cap = morrey_capacity(&CapacityProblem {
            spec: spec.clone(),
            target: target.clone(),
            params,
            family: family.clone(),
            solver: solver.clone(),
        })?
        .value;
        let power = cap.powf(q / params.p);
        rows.push(IsocapRow {
            label: *label,
            nodes: target.len(),
            content,
            capacity: cap,
            capacity_power: power,
            ratio: Some(content / power),
        });
    }
    let live: Vec<&IsocapRow> = rows.iter().filter(|r| r.ratio.is_some()).collect();
    let vacuous = live.is_empty();
    let mut report = IsocapReport { case, rows: rows.clone(), ratio_spread: None, decreasing: None, convex: None, vacuous, passed: vacuous };
    if vacuous {
        return Ok(report);
    }
    match case {
        IsocapCase::Power => {
            let r: Vec<f64> = live.iter().filter_map(|r| r.ratio).collect();
            let spread = r.iter().cloned().fold(f64::MIN, f64::max) / r.iter().cloned().fold(f64::MAX, f64::min);
            report.ratio_spread = Some(spread);
            report.passed = spread <= factor;
        }
        IsocapCase::Exponential => {
            let mut pts: Vec<(f64, f64)> =
                live.iter().map(|r| (r.capacity.powf(-q / params.p), r.content.ln())).collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let decreasing = pts.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 < w[0].1);
            let slopes: Vec<f64> = pts.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
            let convex = slopes.windows(2).all(|s| s[1] >= s[0] - 0.1 * s[0].abs());
            report.decreasing = Some(decreasing);
            report.convex = Some(convex);
            report.passed = decreasing && convex;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, lambda: f64) -> MorreyParams {
        MorreyParams::new(p, lambda).unwrap().with_alpha(1.0).unwrap()
    }

    #[test]
    fn regime_classification() {
        assert_eq!(isocap_case(3, &params(2.0, 2.5), 1.0, 3.0).unwrap(), IsocapCase::Power);
        assert_eq!(isocap_case(3, &params(2.0, 2.0), 1.0, 1.0).unwrap(), IsocapCase::Exponential);
        let e = isocap_case(3, &params(2.0, 2.5), 0.4, 1.0).unwrap_err().to_string();
        assert!(e.contains("λ−αp < d"), "{e}");
        let e = isocap_case(3, &params(2.0, 1.5), 1.0, 1.0).unwrap_err().to_string();
        assert!(e.contains("0 ≤ λ−αp"), "{e}");
        let e = isocap_case(3, &params(2.0, 2.5), 3.5, 1.0).unwrap_err().to_string();
        assert!(e.contains("d ≤ n"), "{e}");
        assert!(isocap_case(3, &params(2.0, 2.5), 1.0, 4.0).is_err());
        assert!(isocap_case(3, &params(2.0, 2.0), 1.0, 1.5).is_err());
    }

    #[test]
    fn empty_family_is_vacuous() {
        let spec = Arc::new(GridSpec::cube(3, 1.0, 8).unwrap());
        let fam = super::super::capacity_family(&spec);
        let r = isocapacitary_check(spec, params(2.0, 2.5), 1.0, 3.0, &[(0.5, vec![])], &fam, &SolverOptions::default(), 4.0)
            .unwrap();
        assert!(r.vacuous && r.passed);
    }
}
