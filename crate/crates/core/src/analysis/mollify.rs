use super::{morrey_norm, BallFamily, KernelTable, MorreyNorm, MorreyParams};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::numeric::bump;

/// `f_ε = φ_ε * f` with `φ` the bump `exp(−1/(1−|x|²))`, normalised so the
/// discrete weights sum to one. `f` is extended by zero outside Ω.
pub fn mollify(f: &ScalarField, eps: f64) -> Result<ScalarField> {
    let spec = f.spec();
    let h = spec.h();
    if eps < 2.0 * h * (1.0 - 1e-12) {
        return Err(Error::Resolution { what: "mollifier radius", value: eps, floor: 2.0 * h });
    }
    let half = ((eps / h).ceil() as usize).min(spec.cells() - 1);
    let scale = h * h / (eps * eps);
    let raw = KernelTable::build(spec.n(), half, |o| {
        let k2: i64 = o.iter().map(|v| v * v).sum();
        bump(k2 as f64 * scale)
    });
    let total = raw.total();
    let table = raw.scaled(1.0 / total);
    let src: Vec<f64> = (0..f.len()).map(|i| f.get(i)).collect();
    let targets: Vec<usize> = (0..f.len()).filter(|&i| f.mask()[i]).collect();
    let vals = super::convolve(spec, &src, &table, &targets);
    let mut out = vec![0.0; f.len()];
    for (t, v) in targets.iter().zip(vals) {
        out[*t] = v;
    }
    ScalarField::with_mask(f.spec_arc().clone(), out, f.mask().to_vec())
}

/// Morrey distance `‖f − f_ε‖` in `L^{p,μ}` over the given family, with μ
/// taken from `params`.
pub fn zorko_distance(f: &ScalarField, eps: f64, params: &MorreyParams, family: &BallFamily) -> Result<MorreyNorm> {
    let relaxed = params.relaxed()?;
    let fe = mollify(f, eps)?;
    let diff = f.zip_with(&fe, |a, b| a - b)?;
    morrey_norm(&diff, &relaxed, family)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample_field, GridSpec};
    use std::sync::Arc;

    #[test]
    fn constant_preserved_in_the_interior() {
        let g = Arc::new(GridSpec::cube(3, 1.0, 16).unwrap());
        let f = ScalarField::constant(g.clone(), 3.0);
        let fe = mollify(&f, 0.25).unwrap();
        for i in 0..g.len() {
            if g.boundary_distance(i) > 0.25 {
                assert!((fe.values()[i] - 3.0).abs() < 1e-12);
            }
        }
        assert!(mollify(&f, g.h()).is_err());
    }

    #[test]
    fn mass_is_preserved() {
        let g = Arc::new(GridSpec::cube(2, 1.0, 32).unwrap());
        let f = sample_field(g.clone(), |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 < 0.25 { 1.0 + x[0] } else { 0.0 }
        })
        .unwrap();
        let fe = mollify(&f, 0.2).unwrap();
        assert!((fe.integral() - f.integral()).abs() < 1e-12);
        assert!(fe.max_abs() <= f.max_abs() * (1.0 + 1e-12));
    }
}
