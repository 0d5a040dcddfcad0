use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ball_integral, jet, Ball, VectorField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaccioppoliRow {
    pub radius: f64,
    /// `r^{mp} ∫_{B_{r/2}} |∂^m u|^p`.
    pub numerator: f64,
    /// `∫_{B_r} |u|^p`.
    pub denominator: f64,
    /// Absent when the denominator vanishes (vacuous row).
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaccioppoliProfile {
    pub rows: Vec<CaccioppoliRow>,
    /// Largest ratio: the constant bounding the profile.
    pub bound: Option<f64>,
    /// `max/min` over the defined ratios.
    pub spread: Option<f64>,
}

/// Caccioppoli ratios about `x0` for each radius of the ladder.
pub fn caccioppoli_check(u: &VectorField, m: u32, p: f64, x0: &[f64], radii: &[f64]) -> Result<CaccioppoliProfile> {
    let spec = u.spec();
    for &r in radii {
        let b = Ball::new(x0.to_vec(), r);
        if !spec.contains_ball(&b) {
            return Err(Error::NotContained { center: b.center, radius: r });
        }
    }
    let top = jet(u, m)?.top_norm()?;
    let modulus = u.norm_field();
    let rows: Vec<CaccioppoliRow> = radii
        .iter()
        .map(|&r| {
            let numerator = r.powf(m as f64 * p) * ball_integral(&top, &Ball::new(x0.to_vec(), r / 2.0), |v| v.abs().powf(p));
            let denominator = ball_integral(&modulus, &Ball::new(x0.to_vec(), r), |v| v.abs().powf(p));
            CaccioppoliRow { radius: r, numerator, denominator, ratio: (denominator > 0.0).then(|| numerator / denominator) }
        })
        .collect();
    let defined: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let bound = defined.iter().copied().reduce(f64::max);
    let spread = match (bound, defined.iter().copied().reduce(f64::min)) {
        (Some(hi), Some(lo)) if lo > 0.0 => Some(hi / lo),
        _ => None,
    };
    Ok(CaccioppoliProfile { rows, bound, spread })
}
