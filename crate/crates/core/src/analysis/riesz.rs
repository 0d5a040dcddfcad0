use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, MAX_DIM};
use crate::numeric::{pow_from_sq, sphere_area};

/// Kernel values on integer cell offsets `|o_a| ≤ half`, laid out so that the
/// last-axis index runs opposite to the offset: a source row is then read
/// forwards against a forward kernel slice.
pub(crate) struct KernelTable {
    n: usize,
    half: usize,
    width: usize,
    values: Vec<f64>,
    /// Nonzero last-axis extent `[lo, hi)` per kernel row.
    extent: Vec<(usize, usize)>,
}

impl KernelTable {
    /// `f` receives the offset `target − source` in cells.
    pub(crate) fn build(n: usize, half: usize, f: impl Fn(&[i64]) -> f64 + Sync) -> Self {
        let width = 2 * half + 1;
        let rows = width.pow(n as u32 - 1);
        let chunks: Vec<(Vec<f64>, (usize, usize))> = (0..rows)
            .into_par_iter()
            .map(|row| {
                let mut off = [0i64; MAX_DIM];
                let mut r = row;
                for a in (0..n - 1).rev() {
                    off[a] = (r % width) as i64 - half as i64;
                    r /= width;
                }
                let vals: Vec<f64> = (0..width)
                    .map(|j| {
                        off[n - 1] = half as i64 - j as i64;
                        f(&off[..n])
                    })
                    .collect();
                let lo = vals.iter().position(|v| *v != 0.0).unwrap_or(width);
                let hi = vals.iter().rposition(|v| *v != 0.0).map_or(lo, |p| p + 1);
                (vals, (lo, hi.max(lo)))
            })
            .collect();
        let mut values = Vec::with_capacity(rows * width);
        let mut extent = Vec::with_capacity(rows);
        for (v, e) in chunks {
            values.extend(v);
            extent.push(e);
        }
        KernelTable { n, half, width, values, extent }
    }

    pub(crate) fn total(&self) -> f64 {
        crate::numeric::det_sum(&self.values)
    }

    pub(crate) fn scaled(mut self, s: f64) -> Self {
        for v in self.values.iter_mut() {
            *v *= s;
        }
        self
    }

    pub(crate) fn dim(&self) -> usize {
        self.n
    }

    #[cfg(test)]
    pub(crate) fn at(&self, off: &[i64]) -> f64 {
        let mut idx = 0usize;
        for a in 0..self.n - 1 {
            idx = idx * self.width + (off[a] + self.half as i64) as usize;
        }
        idx = idx * self.width + (self.half as i64 - off[self.n - 1]) as usize;
        self.values[idx]
    }
}

/// `out[t] = Σ_s K(t − s)·src[s]` at the listed target nodes. Each target
/// is summed sequentially in a fixed source order.
pub(crate) fn convolve(spec: &GridSpec, src: &[f64], kernel: &KernelTable, targets: &[usize]) -> Vec<f64> {
    let n = spec.n();
    debug_assert_eq!(kernel.dim(), n);
    let c = spec.cells();
    let rows = spec.len() / c;
    let half = kernel.half as i64;
    let width = kernel.width;
    // nonzero extent of every source row
    let extent: Vec<(usize, usize)> = (0..rows)
        .map(|r| {
            let row = &src[r * c..(r + 1) * c];
            let lo = row.iter().position(|v| *v != 0.0).unwrap_or(c);
            let hi = row.iter().rposition(|v| *v != 0.0).map_or(lo, |p| p + 1);
            (lo, hi.max(lo))
        })
        .collect();
    targets
        .par_iter()
        .map(|&t| {
            let tm = spec.multi_index(t);
            let tl = tm[n - 1] as i64;
            let mut ranges = [(0i64, 0i64); MAX_DIM];
            for a in 0..n - 1 {
                ranges[a] = ((tm[a] as i64 - half).max(0), (tm[a] as i64 + half).min(c as i64 - 1));
            }
            let mut s = [0i64; MAX_DIM];
            for a in 0..n - 1 {
                s[a] = ranges[a].0;
            }
            let mut acc = 0.0;
            loop {
                let mut row = 0usize;
                let mut krow = 0usize;
                for a in 0..n - 1 {
                    row = row * c + s[a] as usize;
                    krow = krow * width + (tm[a] as i64 - s[a] + half) as usize;
                }
                let (lo, hi) = extent[row];
                let (klo, khi) = kernel.extent[krow];
                // kernel column j = k − t_last + half
                let k0 = (lo as i64).max(tl - half + klo as i64);
                let k1 = (hi as i64).min(tl - half + khi as i64);
                if k0 < k1 {
                    let sv = &src[row * c + k0 as usize..row * c + k1 as usize];
                    let kb = krow * width + (k0 - tl + half) as usize;
                    let kv = &kernel.values[kb..kb + sv.len()];
                    acc += sv.iter().zip(kv).map(|(a, b)| a * b).sum::<f64>();
                }
                if n == 1 {
                    break;
                }
                let mut a = n - 1;
                let mut done = false;
                loop {
                    if a == 0 {
                        done = true;
                        break;
                    }
                    a -= 1;
                    s[a] += 1;
                    if s[a] <= ranges[a].1 {
                        break;
                    }
                    s[a] = ranges[a].0;
                }
                if done {
                    break;
                }
            }
            acc
        })
        .collect()
}

/// Integral of `|y|^(α−n)` over the ball of volume `hⁿ` centred at 0:
/// `ω_{n−1} ρ^α / α` with `ρ = (hⁿ n / ω_{n−1})^(1/n)`.
pub fn self_cell_term(n: usize, alpha: f64, h: f64) -> f64 {
    let w = sphere_area(n);
    let rho = (h.powi(n as i32) * n as f64 / w).powf(1.0 / n as f64);
    w * rho.powf(alpha) / alpha
}

fn check_alpha(n: usize, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < n as f64) {
        return Err(Error::Parameter(format!("α = {alpha} outside (0, {n})")));
    }
    Ok(())
}

/// The Riesz kernel table in cell units, pre-multiplied by `hⁿ`.
pub(crate) fn riesz_table(spec: &GridSpec, alpha: f64, half: usize) -> KernelTable {
    let n = spec.n();
    let h = spec.h();
    let hn = spec.cell_volume();
    let centre = self_cell_term(n, alpha, h);
    let e = alpha - n as f64;
    KernelTable::build(n, half, |o| {
        let k2: i64 = o.iter().map(|v| v * v).sum();
        if k2 == 0 {
            centre
        } else {
            pow_from_sq(k2 as f64 * h * h, e) * hn
        }
    })
}

/// `I_α f(x) = Σ_{y≠x} |x−y|^(α−n) f(y) hⁿ` plus the equal-volume ball
/// integral for the cell of `x` itself, at every masked-in node.
pub fn riesz_potential(f: &ScalarField, alpha: f64) -> Result<ScalarField> {
    let spec = f.spec();
    check_alpha(spec.n(), alpha)?;
    let table = riesz_table(spec, alpha, spec.cells() - 1);
    let src: Vec<f64> = (0..f.len()).map(|i| f.get(i)).collect();
    let targets: Vec<usize> = (0..f.len()).filter(|&i| f.mask()[i]).collect();
    let vals = convolve(spec, &src, &table, &targets);
    let mut out = vec![0.0; f.len()];
    for (t, v) in targets.iter().zip(vals) {
        out[*t] = v;
    }
    ScalarField::with_mask(f.spec_arc().clone(), out, f.mask().to_vec())
}

/// `I_α f` at arbitrary points. A point closer than `10⁻⁹h` to a node is
/// treated as that node (self-cell term included); other points see the
/// plain sum over all masked-in nodes.
pub fn riesz_potential_at(f: &ScalarField, alpha: f64, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let spec = f.spec();
    let n = spec.n();
    check_alpha(n, alpha)?;
    let h = spec.h();
    let hn = spec.cell_volume();
    let e = alpha - n as f64;
    let sources: Vec<(usize, f64)> = (0..f.len())
        .filter(|&i| f.mask()[i] && f.values()[i] != 0.0)
        .map(|i| (i, f.values()[i]))
        .collect();
    let centre = self_cell_term(n, alpha, h);
    Ok(points
        .par_iter()
        .map(|x| {
            let mut acc = 0.0;
            for &(i, v) in &sources {
                let y = spec.point(i);
                let d2: f64 = (0..n).map(|a| (x[a] - y[a]) * (x[a] - y[a])).sum();
                if d2 < 1e-18 * h * h {
                    acc += centre * v;
                } else {
                    acc += pow_from_sq(d2, e) * v * hn;
                }
            }
            acc
        })
        .collect())
}

/// `I_α f` at arbitrary points with `f` read as piecewise constant on cells.
/// Cells within `near` cells of the point (per axis) are integrated on an
/// `sub`-fold subdivision, the subcell holding the point by the
/// equal-volume ball term; farther cells use the point kernel. Values at a
/// fixed point are thus comparable across resolutions whether or not the
/// point is a node.
pub fn riesz_potential_cellwise(f: &ScalarField, alpha: f64, points: &[Vec<f64>], near: usize, sub: usize) -> Result<Vec<f64>> {
    let spec = f.spec();
    let n = spec.n();
    check_alpha(n, alpha)?;
    if sub == 0 {
        return Err(Error::Parameter("subdivision must be positive".into()));
    }
    let h = spec.h();
    let hn = spec.cell_volume();
    let e = alpha - n as f64;
    let c = spec.cells() as i64;
    let sources: Vec<([i64; MAX_DIM], [f64; MAX_DIM], f64)> = (0..f.len())
        .filter(|&i| f.mask()[i] && f.values()[i] != 0.0)
        .map(|i| {
            let m = spec.multi_index(i);
            let mut mi = [0i64; MAX_DIM];
            for a in 0..n {
                mi[a] = m[a] as i64;
            }
            (mi, spec.point(i), f.values()[i])
        })
        .collect();
    // home cell and position inside it, in cell units
    let located: Vec<([i64; MAX_DIM], [f64; MAX_DIM])> = points
        .iter()
        .map(|x| {
            let mut home = [0i64; MAX_DIM];
            let mut frac = [0.0; MAX_DIM];
            for a in 0..n {
                let t = (x[a] - spec.lower()[a]) / h;
                home[a] = (t.floor() as i64).clamp(0, c - 1);
                frac[a] = t - home[a] as f64;
            }
            (home, frac)
        })
        .collect();
    let key = |frac: &[f64; MAX_DIM]| -> Vec<i64> { frac[..n].iter().map(|v| (v * 1e9).round() as i64).collect() };
    let mut keys: Vec<Vec<i64>> = located.iter().map(|(_, fr)| key(fr)).collect();
    keys.sort();
    keys.dedup();
    let tables: Vec<Vec<f64>> = keys.par_iter().map(|k| unit_near_table(n, alpha, k, near, sub)).collect();
    let scale = h.powf(alpha);
    let width = 2 * near as i64 + 1;
    Ok(points
        .par_iter()
        .zip(located.par_iter())
        .map(|(x, (home, frac))| {
            let table = &tables[keys.binary_search(&key(frac)).expect("key present")];
            let mut acc = 0.0;
            for (m, y, v) in &sources {
                let mut slot = 0i64;
                let mut is_near = true;
                for a in 0..n {
                    let o = m[a] - home[a];
                    if o.unsigned_abs() as usize > near {
                        is_near = false;
                        break;
                    }
                    slot = slot * width + o + near as i64;
                }
                if is_near {
                    acc += scale * table[slot as usize] * v;
                } else {
                    let d2: f64 = (0..n).map(|a| (x[a] - y[a]) * (x[a] - y[a])).sum();
                    acc += pow_from_sq(d2, e) * v * hn;
                }
            }
            acc
        })
        .collect())
}

/// Integrals of `|x − z|^(α−n)` over the unit cells at offsets `|o_a| ≤ near`
/// from the cell holding `x`, with `x` at `key · 1e-9` inside it.
fn unit_near_table(n: usize, alpha: f64, key: &[i64], near: usize, sub: usize) -> Vec<f64> {
    let e = alpha - n as f64;
    let x: Vec<f64> = key.iter().map(|&k| k as f64 * 1e-9).collect();
    let hs = 1.0 / sub as f64;
    let sub_self = self_cell_term(n, alpha, hs);
    let sub_vol = hs.powi(n as i32);
    let width = 2 * near + 1;
    let subcells = sub.pow(n as u32);
    (0..width.pow(n as u32))
        .map(|slot| {
            let mut off = [0i64; MAX_DIM];
            let mut r = slot;
            for a in (0..n).rev() {
                off[a] = (r % width) as i64 - near as i64;
                r /= width;
            }
            let mut w = 0.0;
            let mut idx = [0usize; MAX_DIM];
            for _ in 0..subcells {
                let mut d2 = 0.0;
                let mut inside = true;
                for a in 0..n {
                    let lo = off[a] as f64 + idx[a] as f64 * hs;
                    let z = lo + 0.5 * hs;
                    d2 += (x[a] - z) * (x[a] - z);
                    inside &= x[a] >= lo && x[a] < lo + hs;
                }
                w += if inside { sub_self } else { pow_from_sq(d2, e) * sub_vol };
                for a in (0..n).rev() {
                    idx[a] += 1;
                    if idx[a] < sub {
                        break;
                    }
                    idx[a] = 0;
                }
            }
            w
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample_field;
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn table_layout_round_trips_offsets() {
        let t = KernelTable::build(3, 2, |o| (o[0] * 100 + o[1] * 10 + o[2]) as f64);
        for o in [[1i64, -2, 2], [0, 0, -1], [-2, 2, 0]] {
            assert_eq!(t.at(&o), (o[0] * 100 + o[1] * 10 + o[2]) as f64);
        }
    }

    #[test]
    fn convolution_matches_brute_force() {
        let g = Arc::new(GridSpec::cube(3, 1.0, 8).unwrap());
        let f = sample_field(g.clone(), |x| (x[0] + 0.3).max(0.0) * (1.0 + x[1] * x[2])).unwrap();
        let alpha = 1.3;
        let fast = riesz_potential(&f, alpha).unwrap();
        let hn = g.cell_volume();
        for t in [0usize, 17, 200, 511] {
            let mut s = 0.0;
            for i in 0..g.len() {
                let d2 = crate::grid::dist2(&g.point(t)[..3], &g.point(i)[..3]);
                s += if i == t {
                    self_cell_term(3, alpha, g.h()) * f.values()[i]
                } else {
                    d2.powf((alpha - 3.0) / 2.0) * hn * f.values()[i]
                };
            }
            assert!((fast.values()[t] - s).abs() < 1e-12 * s.abs().max(1.0));
        }
    }

    #[test]
    fn zero_and_linearity() {
        let g = Arc::new(GridSpec::cube(2, 1.0, 16).unwrap());
        let a = sample_field(g.clone(), |x| x[0].cos()).unwrap();
        let b = sample_field(g.clone(), |x| x[1] * x[1]).unwrap();
        let ia = riesz_potential(&a, 0.7).unwrap();
        let ib = riesz_potential(&b, 0.7).unwrap();
        let comb = a.zip_with(&b, |u, v| 2.0 * u - 3.0 * v).unwrap();
        let ic = riesz_potential(&comb, 0.7).unwrap();
        for i in 0..g.len() {
            let lin = 2.0 * ia.values()[i] - 3.0 * ib.values()[i];
            assert!((ic.values()[i] - lin).abs() < 1e-12 * (1.0 + lin.abs()));
        }
        let z = riesz_potential(&ScalarField::zeros(g), 0.7).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));
        assert!(riesz_potential(&a, 2.0).is_err());
    }

    #[test]
    fn ball_indicator_at_origin() {
        // I_1 1_{B_1}(0) = ω₂·1/1 = 4π
        let g = Arc::new(GridSpec::cube(3, 1.0, 48).unwrap());
        let f = sample_field(g, |x| if x.iter().map(|v| v * v).sum::<f64>() < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let v = riesz_potential_at(&f, 1.0, &[vec![0.0; 3]]).unwrap()[0];
        assert!((v / (4.0 * PI) - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn self_cell_term_is_the_ball_integral() {
        // in n = 2 with α = 1: ∫_{B_ρ} |y|^{-1} = 2πρ, πρ² = h²
        let h = 0.1;
        let rho = h / PI.sqrt();
        assert!((self_cell_term(2, 1.0, h) - 2.0 * PI * rho).abs() < 1e-14);
    }

    #[test]
    fn cellwise_matches_the_square_integral() {
        // ∫_{[-1,1]²} |y|^{-1} dy = 8 ln(1 + √2), at a corner and off-node
        let spec = Arc::new(GridSpec::cube(2, 1.0, 16).unwrap());
        let f = ScalarField::constant(spec, 1.0);
        let exact = 8.0 * (1.0 + 2f64.sqrt()).ln();
        let v = riesz_potential_cellwise(&f, 1.0, &[vec![0.0, 0.0], vec![0.0, 1e-3]], 2, 8).unwrap();
        for x in v {
            assert!((x / exact - 1.0).abs() < 2e-3, "{x} vs {exact}");
        }
    }
}
