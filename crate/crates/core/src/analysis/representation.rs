use serde::{Deserialize, Serialize};

use super::riesz::riesz_table;
use super::{convolve, KernelTable};
use crate::error::{Error, Result};
use crate::grid::{derivative, MultiIndex, ScalarField};
use crate::numeric::pow_from_sq;

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// `c · K[h]` with `K` the order-`k` kernel integral.
    pub field: ScalarField,
    /// The raw kernel integral `K[h]`.
    pub kernel_integral: ScalarField,
    /// Empirical constant `c`, absent when `h ≡ 0`.
    pub constant: Option<f64>,
    /// Set when `h` does not vanish next to the boundary.
    pub truncated: bool,
    pub summary: ReconstructionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSummary {
    pub order: u32,
    pub constant: Option<f64>,
    /// Spread (max/min) of the node-wise ratios entering the constant.
    pub ratio_spread: Option<f64>,
    pub nodes_used: usize,
    pub relative_l2_error: Option<f64>,
    pub truncated: bool,
}

/// Recover `h` from its derivatives through the Riesz-type kernels:
/// `k = 2` integrates `−Δh` against `|x−y|^(2−n)`, `k = 1` integrates `∇h`
/// against `(x−y)/|x−y|^n`. The constant is the mean of `h/K[h]` over nodes
/// where `|h|` exceeds 10% of its maximum.
pub fn representation_reconstruct(h: &ScalarField, k: u32) -> Result<Reconstruction> {
    let spec = h.spec();
    let n = spec.n();
    let targets: Vec<usize> = (0..h.len()).filter(|&i| h.mask()[i]).collect();
    let kernel_values = match k {
        2 => {
            if n < 3 {
                return Err(Error::Parameter("order-2 representation needs n ≥ 3".into()));
            }
            let mut lap = vec![0.0; h.len()];
            for a in 0..n {
                let mut g = MultiIndex::zero(n);
                g.0[a] = 2;
                let d = derivative(h, &g)?;
                for (l, v) in lap.iter_mut().zip(d.field.values()) {
                    *l -= v;
                }
            }
            let table = riesz_table(spec, 2.0, spec.cells() - 1);
            convolve(spec, &lap, &table, &targets)
        }
        1 => {
            let mut acc = vec![0.0; targets.len()];
            let hh = spec.h();
            let hn = spec.cell_volume();
            for a in 0..n {
                let d = derivative(h, &MultiIndex::unit(n, a))?;
                let table = KernelTable::build(n, spec.cells() - 1, |o| {
                    let k2: i64 = o.iter().map(|v| v * v).sum();
                    if k2 == 0 {
                        0.0
                    } else {
                        o[a] as f64 * hh * pow_from_sq(k2 as f64 * hh * hh, -(n as f64)) * hn
                    }
                });
                let part = convolve(spec, d.field.values(), &table, &targets);
                for (s, v) in acc.iter_mut().zip(part) {
                    *s += v;
                }
            }
            acc
        }
        _ => return Err(Error::Parameter(format!("representation order {k} not in {{1, 2}}"))),
    };
    let mut kernel = vec![0.0; h.len()];
    for (t, v) in targets.iter().zip(kernel_values) {
        kernel[*t] = v;
    }
    let kernel_integral = ScalarField::with_mask(h.spec_arc().clone(), kernel, h.mask().to_vec())?;

    let hmax = h.max_abs();
    let truncated = hmax > 0.0
        && targets.iter().any(|&i| {
            let edge = spec.boundary_distance(i) < 2.0 * spec.h()
                || matches!(spec.domain(), crate::grid::DomainKind::Ball { .. })
                    && !spec.in_domain(&spec.coords(i).iter().map(|x| x * (1.0 + 2.0 * spec.h())).collect::<Vec<_>>());
            edge && h.values()[i].abs() > 1e-12 * hmax
        });
    if truncated {
        log::warn!("representation: support of h reaches the boundary; the kernel integral is truncated");
    }

    let ratios: Vec<f64> = targets
        .iter()
        .filter(|&&i| hmax > 0.0 && h.values()[i].abs() > 0.1 * hmax && kernel_integral.values()[i] != 0.0)
        .map(|&i| h.values()[i] / kernel_integral.values()[i])
        .collect();
    let constant = (!ratios.is_empty()).then(|| crate::numeric::det_sum(&ratios) / ratios.len() as f64);
    let ratio_spread = constant.map(|_| {
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi / lo
    });
    let field = kernel_integral.scale(constant.unwrap_or(0.0));
    let relative_l2_error = constant.map(|_| {
        let diff = field.zip_with(h, |a, b| a - b).expect("same grid");
        diff.lp_norm(2.0) / h.lp_norm(2.0)
    });
    Ok(Reconstruction {
        summary: ReconstructionSummary {
            order: k,
            constant,
            ratio_spread,
            nodes_used: ratios.len(),
            relative_l2_error,
            truncated,
        },
        field,
        kernel_integral,
        constant,
        truncated,
    })
}
