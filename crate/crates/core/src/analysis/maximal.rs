use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Ball, BallSummer, ScalarField};

/// Centred maximal function: at each node the larger of `|f(x)|` and the
/// averages of `|f|` over balls `B_r(x) ⊆ Ω` with `r` from `radii` (radii
/// below `2h` are skipped). Averages divide by the node count, so constants
/// are fixed points.
pub fn maximal_function(f: &ScalarField, radii: &[f64]) -> Result<ScalarField> {
    if radii.is_empty() {
        return Err(Error::Config("empty radius ladder".into()));
    }
    let spec = f.spec();
    let floor = 2.0 * spec.h() * (1.0 - 1e-12);
    let summer = BallSummer::of_field(f, f64::abs);
    let counter = BallSummer::of_field(f, |_| 1.0);
    let mask = f.mask();
    let values: Vec<f64> = (0..f.len())
        .into_par_iter()
        .map(|i| {
            if !mask[i] {
                return 0.0;
            }
            let c = spec.coords(i);
            let mut best = f.values()[i].abs();
            for &r in radii {
                if r < floor || !spec.contains_ball(&Ball::new(c.clone(), r)) {
                    continue;
                }
                let count = counter.sum(spec, &c, r);
                if count > 0.0 {
                    best = best.max(summer.sum(spec, &c, r) / count);
                }
            }
            best
        })
        .collect();
    ScalarField::with_mask(f.spec_arc().clone(), values, mask.to_vec())
}
