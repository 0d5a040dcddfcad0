use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BallFamily, MorreyParams};
use crate::error::Result;
use crate::grid::{Ball, BallSummer, ScalarField};
use crate::numeric::ball_volume;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorreyNorm {
    /// `(max r^λ ⨍|f|^p)^(1/p)`.
    pub value: f64,
    /// The maximising ball (first in family order on ties).
    pub argmax: Ball,
}

impl MorreyNorm {
    pub fn pth_power(&self, p: f64) -> f64 {
        self.value.powf(p)
    }
}

/// `r^λ · ⨍_B |f|^p` for every ball of the family, in family order.
pub fn morrey_profile(f: &ScalarField, p: f64, lambda: f64, family: &BallFamily) -> Vec<f64> {
    let spec = f.spec();
    let summer = BallSummer::of_field(f, |v| v.abs().powf(p));
    let hn = spec.cell_volume();
    family
        .balls()
        .par_iter()
        .map(|b| {
            let s = summer.sum(spec, &b.center, b.radius) * hn;
            b.radius.powf(lambda) * s / ball_volume(spec.n(), b.radius)
        })
        .collect()
}

pub fn morrey_norm(f: &ScalarField, params: &MorreyParams, family: &BallFamily) -> Result<MorreyNorm> {
    family.require_nonempty()?;
    params.validate(f.spec().n())?;
    let profile = morrey_profile(f, params.p, params.lambda, family);
    let mut best = 0;
    for (i, v) in profile.iter().enumerate() {
        if *v > profile[best] {
            best = i;
        }
    }
    Ok(MorreyNorm { value: profile[best].powf(1.0 / params.p), argmax: family.balls()[best].clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{dyadic_radii, family::CenterLattice};
    use crate::grid::{sample_field, GridSpec};
    use std::sync::Arc;

    #[test]
    fn constant_on_unit_ball() {
        let g = Arc::new(GridSpec::ball(3, 1.0, 16).unwrap());
        let f = ScalarField::constant(g.clone(), 1.0);
        let fam = BallFamily::lattice(&g, &dyadic_radii(1.0, 2.0 * g.h()), 0.5, CenterLattice::Corners);
        let params = MorreyParams::new(2.0, 1.0).unwrap();
        let m = morrey_norm(&f, &params, &fam).unwrap();
        assert_eq!(m.argmax.radius, 1.0);
        // node counting against the exact volume: O(h) bias
        assert!((m.value - 1.0).abs() < 0.05, "{}", m.value);
        let z = morrey_norm(&ScalarField::zeros(g), &params, &fam).unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn empty_family_is_a_configuration_error() {
        let g = Arc::new(GridSpec::cube(2, 1.0, 8).unwrap());
        let fam = BallFamily::centered(&g, &[0.0, 0.0], &[5.0]);
        let f = ScalarField::constant(g, 1.0);
        assert!(morrey_norm(&f, &MorreyParams::new(2.0, 1.0).unwrap(), &fam).is_err());
    }

    #[test]
    fn extremal_power_function() {
        // r^λ ⨍_{B_r(0)} |x|^{-λ} = n/(n-λ) = 3 for every r
        let g = Arc::new(GridSpec::ball(3, 1.0, 48).unwrap());
        let f = sample_field(g.clone(), |x| x.iter().map(|v| v * v).sum::<f64>().powf(-0.5)).unwrap();
        let radii = dyadic_radii(1.0, 4.0 * g.h());
        let fam = BallFamily::lattice(&g, &radii, 0.5, CenterLattice::Corners);
        let params = MorreyParams::new(2.0, 2.0).unwrap();
        let m = morrey_norm(&f, &params, &fam).unwrap();
        assert!((m.value / 3f64.sqrt() - 1.0).abs() < 0.05, "{}", m.value);
        assert!(m.argmax.center.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn norm_decreases_in_lambda() {
        let g = Arc::new(GridSpec::ball(2, 1.0, 32).unwrap());
        let f = sample_field(g.clone(), |x| 1.0 + x[0].sin() * x[1]).unwrap();
        let fam = BallFamily::lattice(&g, &dyadic_radii(1.0, 2.0 * g.h()), 0.5, CenterLattice::Nodes);
        let mut last = f64::INFINITY;
        for lambda in [0.5, 1.0, 1.5, 2.0] {
            let v = morrey_norm(&f, &MorreyParams::new(2.0, lambda).unwrap(), &fam).unwrap().value;
            assert!(v <= last + 1e-12);
            last = v;
        }
    }
}
