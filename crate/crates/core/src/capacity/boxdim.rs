use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::least_squares;
use crate::grid::GridSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxDimension {
    pub dimension: f64,
    /// `(δ, N(δ))` for every usable scale.
    pub counts: Vec<(f64, usize)>,
}

/// Lower corner and largest side of the union of the target's cells.
fn cell_bounds(spec: &GridSpec, target: &[usize]) -> (Vec<f64>, f64) {
    let n = spec.n();
    let h = spec.h();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for &i in target {
        let x = spec.point(i);
        for a in 0..n {
            lo[a] = lo[a].min(x[a] - h / 2.0);
            hi[a] = hi[a].max(x[a] + h / 2.0);
        }
    }
    let side = (0..n).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    (lo, side)
}

/// Three dyadic scales `E/2, E/4, E/8` from the target's extent `E`, with
/// the top scale raised to `8h` for small sets.
pub fn box_scales(spec: &GridSpec, target: &[usize]) -> Vec<f64> {
    let (_, side) = cell_bounds(spec, target);
    let top = (side / 2.0).max(8.0 * spec.h());
    vec![top, top / 2.0, top / 4.0]
}

/// Slope of `log N(δ)` against `log(1/δ)`, boxes anchored at the lower
/// corner of the target's cell bounding box. Scales below `2h` are skipped.
pub fn box_dimension(spec: &GridSpec, target: &[usize], scales: &[f64]) -> Result<BoxDimension> {
    if target.is_empty() {
        return Err(Error::Fit("box dimension of an empty set".into()));
    }
    let n = spec.n();
    let (anchor, _) = cell_bounds(spec, target);
    let floor = 2.0 * spec.h() * (1.0 - 1e-12);
    let counts: Vec<(f64, usize)> = scales
        .iter()
        .filter(|&&d| d >= floor)
        .map(|&delta| {
            let boxes: BTreeSet<Vec<i64>> = target
                .iter()
                .map(|&i| {
                    let x = spec.point(i);
                    (0..n).map(|a| ((x[a] - anchor[a]) / delta).floor() as i64).collect()
                })
                .collect();
            (delta, boxes.len())
        })
        .collect();
    if counts.len() < 3 {
        return Err(Error::Fit(format!("{} usable scales, at least 3 needed", counts.len())));
    }
    let x: Vec<f64> = counts.iter().map(|(d, _)| -d.ln()).collect();
    let y: Vec<f64> = counts.iter().map(|(_, k)| (*k as f64).ln()).collect();
    Ok(BoxDimension { dimension: least_squares(&x, &y, 3)?.slope, counts })
}
