use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixtures::CoefficientField;
use crate::grid::{for_each_row, gradient, Ball, VectorField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityRow {
    pub t: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityProfile {
    pub rows: Vec<MonotonicityRow>,
    /// `max/min − 1` over the profile.
    pub spread: f64,
    /// Largest relative drop `(Φ(t_i) − Φ(t_{i+1}))/Φ(t_i)` between
    /// consecutive ladder points (0 for a non-decreasing profile).
    pub max_drop: f64,
    /// Ladder points removed because `t·r < 2h`.
    pub truncated: Vec<f64>,
}

/// `Φ(t) = t^(2−n) e^(τ t^β) ∫_{B_{tr}(x₀)} a(x,u)(Du, Du)` on the t ladder.
pub fn monotonicity_check(
    u: &VectorField,
    a: &CoefficientField,
    x0: &[f64],
    r: f64,
    tau: f64,
    beta: f64,
    ts: &[f64],
) -> Result<MonotonicityProfile> {
    let spec = u.spec();
    let n = spec.n();
    if !spec.contains_ball(&Ball::new(x0.to_vec(), r)) {
        return Err(Error::NotContained { center: x0.to_vec(), radius: r });
    }
    if ts.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Error::Parameter("t ladder must lie in (0, 1)".into()));
    }
    let grad = gradient(u)?;
    let hn = spec.cell_volume();
    let mut rows = Vec::new();
    let mut truncated = Vec::new();
    for &t in ts {
        if t * r < 2.0 * spec.h() {
            log::warn!("monotonicity: t = {t} gives a ball below 2h, dropped from the ladder");
            truncated.push(t);
            continue;
        }
        let mut e = 0.0;
        for_each_row(spec, x0, t * r, |base, lo, hi| {
            for i in base + lo..base + hi {
                if u.mask()[i] {
                    let du = grad.at(i);
                    e += a.bilinear(&spec.point(i)[..n], u.node(i), du, du);
                }
            }
        });
        let phi = t.powf(2.0 - n as f64) * (tau * t.powf(beta)).exp() * e * hn;
        rows.push(MonotonicityRow { t, phi });
    }
    let hi = rows.iter().map(|r| r.phi).fold(f64::NEG_INFINITY, f64::max);
    let lo = rows.iter().map(|r| r.phi).fold(f64::INFINITY, f64::min);
    let max_drop = rows
        .windows(2)
        .map(|w| ((w[0].phi - w[1].phi) / w[0].phi).max(0.0))
        .fold(0.0, f64::max);
    Ok(MonotonicityProfile { spread: hi / lo - 1.0, rows, max_drop, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample_vector_field, GridSpec};
    use std::sync::Arc;

    #[test]
    fn affine_grows_like_t_squared() {
        let g = Arc::new(GridSpec::cube(3, 1.0, 24).unwrap());
        let u = sample_vector_field(g, 3, |x, o| {
            o[0] = x[0] + 2.0 * x[1];
            o[1] = x[2];
            o[2] = -x[0];
        })
        .unwrap();
        let a = CoefficientField::identity(3, 3);
        let ts = [0.3, 0.5, 0.7, 0.9];
        let prof = monotonicity_check(&u, &a, &[0.0; 3], 1.0, 0.0, 1.0, &ts).unwrap();
        assert_eq!(prof.max_drop, 0.0);
        let ratio = prof.rows[3].phi / prof.rows[1].phi;
        assert!((ratio / (0.9f64 / 0.5).powi(2) - 1.0).abs() < 0.1, "{ratio}");
        let with_tau = monotonicity_check(&u, &a, &[0.0; 3], 1.0, 0.5, 1.0, &ts).unwrap();
        for (a, b) in with_tau.rows.iter().zip(&prof.rows) {
            assert!((a.phi / b.phi - (0.5 * a.t).exp()).abs() < 1e-12);
        }
    }
}
