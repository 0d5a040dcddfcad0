use rayon::prelude::*;

use super::{GridSpec, MultiIndex, ScalarField, VectorField, MAX_DIM};
use crate::error::{Error, Result};

/// A derivative sample together with the nodes whose stencil had to leave
/// the centred form (grid edge or mask boundary).
#[derive(Debug, Clone)]
pub struct DerivativeField {
    pub field: ScalarField,
    pub flags: Vec<bool>,
}

impl DerivativeField {
    pub fn flagged(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

#[derive(Clone, Copy)]
struct Line<'a> {
    values: &'a [f64],
    mask: &'a [bool],
    cells: usize,
    stride: usize,
}

impl Line<'_> {
    /// Value `j` steps from node `i`, if on the grid and masked in.
    #[inline]
    fn at(&self, i: usize, k: usize, j: isize) -> Option<f64> {
        let t = k as isize + j;
        if t < 0 || t >= self.cells as isize {
            return None;
        }
        let idx = (i as isize + j * self.stride as isize) as usize;
        self.mask[idx].then(|| self.values[idx])
    }
}

fn d1(line: Line, i: usize, k: usize, h: f64) -> (f64, bool) {
    let f0 = line.values[i];
    let g = |j| line.at(i, k, j);
    if let (Some(p), Some(m)) = (g(1), g(-1)) {
        return ((p - m) / (2.0 * h), false);
    }
    if let (Some(p1), Some(p2)) = (g(1), g(2)) {
        return ((-3.0 * f0 + 4.0 * p1 - p2) / (2.0 * h), true);
    }
    if let (Some(m1), Some(m2)) = (g(-1), g(-2)) {
        return ((3.0 * f0 - 4.0 * m1 + m2) / (2.0 * h), true);
    }
    if let Some(p) = g(1) {
        return ((p - f0) / h, true);
    }
    if let Some(m) = g(-1) {
        return ((f0 - m) / h, true);
    }
    (0.0, true)
}

fn d2(line: Line, i: usize, k: usize, h: f64) -> (f64, bool) {
    let f0 = line.values[i];
    let h2 = h * h;
    let g = |j| line.at(i, k, j);
    if let (Some(p), Some(m)) = (g(1), g(-1)) {
        return ((p - 2.0 * f0 + m) / h2, false);
    }
    for s in [1isize, -1] {
        if let (Some(a), Some(b), Some(c)) = (g(s), g(2 * s), g(3 * s)) {
            return ((2.0 * f0 - 5.0 * a + 4.0 * b - c) / h2, true);
        }
    }
    for s in [1isize, -1] {
        if let (Some(a), Some(b)) = (g(s), g(2 * s)) {
            return ((f0 - 2.0 * a + b) / h2, true);
        }
    }
    (0.0, true)
}

/// One axis derivative of order 1 or 2 over the whole grid.
fn axis_pass(spec: &GridSpec, values: &[f64], mask: &[bool], axis: usize, order: u32) -> (Vec<f64>, Vec<bool>) {
    let h = spec.h();
    let line = Line { values, mask, cells: spec.cells(), stride: spec.stride(axis) };
    let (out, flags): (Vec<f64>, Vec<bool>) = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            if !mask[i] {
                return (0.0, false);
            }
            let k = (i / line.stride) % line.cells;
            if order == 1 {
                d1(line, i, k, h)
            } else {
                d2(line, i, k, h)
            }
        })
        .unzip();
    (out, flags)
}

/// Mixed partial `∂^γ f` by composing second-order accurate axis stencils
/// (second derivatives are taken directly, not as iterated first ones).
pub fn derivative(f: &ScalarField, gamma: &MultiIndex) -> Result<DerivativeField> {
    let spec = f.spec();
    if gamma.dim() != spec.n() {
        return Err(Error::Parameter(format!(
            "multi-index of length {} on a {}-dimensional grid",
            gamma.dim(),
            spec.n()
        )));
    }
    if gamma.order() > 4 {
        return Err(Error::Parameter(format!("derivative order {} > 4", gamma.order())));
    }
    let mask = f.mask();
    let mut values = f.values().to_vec();
    let mut flags = vec![false; values.len()];
    for axis in 0..spec.n() {
        let mut left = gamma.0[axis];
        while left > 0 {
            let order = if left >= 2 { 2 } else { 1 };
            let (v, fl) = axis_pass(spec, &values, mask, axis, order);
            values = v;
            for (a, b) in flags.iter_mut().zip(fl) {
                *a |= b;
            }
            left -= order;
        }
    }
    let field = ScalarField::with_mask(f.spec_arc().clone(), values, mask.to_vec())?;
    Ok(DerivativeField { field, flags })
}

/// First derivatives of every component, stored `[node][component][axis]`.
#[derive(Debug, Clone)]
pub struct Gradient {
    n: usize,
    components: usize,
    values: Vec<f64>,
    pub flags: Vec<bool>,
}

impl Gradient {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn components(&self) -> usize {
        self.components
    }

    /// `∂_i u^k` at node `node`, flattened as `k * n + i`.
    #[inline]
    pub fn at(&self, node: usize) -> &[f64] {
        let w = self.n * self.components;
        &self.values[node * w..(node + 1) * w]
    }

    #[inline]
    pub fn norm_sq(&self, node: usize) -> f64 {
        self.at(node).iter().map(|v| v * v).sum()
    }

    /// Divergence `Σ_i ∂_i u^i` (square systems only).
    #[inline]
    pub fn divergence(&self, node: usize) -> f64 {
        let g = self.at(node);
        (0..self.n.min(self.components)).map(|i| g[i * self.n + i]).sum()
    }
}

pub fn gradient(u: &VectorField) -> Result<Gradient> {
    let spec = u.spec();
    let n = spec.n();
    let m = u.components();
    let w = n * m;
    let mut values = vec![0.0; spec.len() * w];
    let mut flags = vec![false; spec.len()];
    for k in 0..m {
        let comp = u.component(k);
        for axis in 0..n {
            let (v, fl) = axis_pass(spec, comp.values(), comp.mask(), axis, 1);
            for i in 0..spec.len() {
                values[i * w + k * n + axis] = v[i];
                flags[i] |= fl[i];
            }
        }
    }
    Ok(Gradient { n, components: m, values, flags })
}

#[derive(Debug, Clone)]
pub struct JetEntry {
    pub gamma: MultiIndex,
    pub component: usize,
    pub derivative: DerivativeField,
}

/// All `∂^γ u^k` with `|γ| ≤ m`, ordered by increasing `|γ|`, then γ, then
/// component.
#[derive(Debug, Clone)]
pub struct Jet {
    pub order: u32,
    pub entries: Vec<JetEntry>,
}

impl Jet {
    pub fn top_order(&self) -> impl Iterator<Item = &JetEntry> {
        self.entries.iter().filter(move |e| e.gamma.order() == self.order)
    }

    /// Euclidean norm of the full tensor of m-th derivatives, so that each
    /// mixed partial is counted once per ordering of its axes.
    pub fn top_norm(&self) -> Result<ScalarField> {
        let first = self
            .entries
            .first()
            .ok_or_else(|| Error::Parameter("empty jet".into()))?;
        let f0 = &first.derivative.field;
        let mut acc = vec![0.0; f0.len()];
        for e in self.top_order() {
            let w = e.gamma.multinomial();
            for (a, v) in acc.iter_mut().zip(e.derivative.field.values()) {
                *a += w * v * v;
            }
        }
        for a in acc.iter_mut() {
            *a = a.sqrt();
        }
        ScalarField::with_mask(f0.spec_arc().clone(), acc, f0.mask().to_vec())
    }

    pub fn get(&self, gamma: &MultiIndex, component: usize) -> Option<&DerivativeField> {
        self.entries
            .iter()
            .find(|e| &e.gamma == gamma && e.component == component)
            .map(|e| &e.derivative)
    }
}

pub fn jet(u: &VectorField, m: u32) -> Result<Jet> {
    let n = u.spec().n();
    debug_assert!(n <= MAX_DIM);
    let comps: Vec<ScalarField> = (0..u.components()).map(|k| u.component(k)).collect();
    let mut entries = Vec::new();
    for gamma in MultiIndex::up_to(n, m) {
        for (k, c) in comps.iter().enumerate() {
            entries.push(JetEntry { gamma: gamma.clone(), component: k, derivative: derivative(c, &gamma)? });
        }
    }
    Ok(Jet { order: m, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample_field, sample_vector_field};
    use std::sync::Arc;

    fn cube(n: usize, cells: usize) -> Arc<GridSpec> {
        Arc::new(GridSpec::cube(n, 1.0, cells).unwrap())
    }

    #[test]
    fn affine_is_exact_everywhere() {
        let g = cube(3, 12);
        let f = sample_field(g, |x| 2.0 * x[0] - x[1] + 0.5 * x[2] + 1.0).unwrap();
        let d = derivative(&f, &MultiIndex::unit(3, 0)).unwrap();
        assert!(d.field.values().iter().all(|v| (v - 2.0).abs() < 1e-10));
        assert!(d.flagged() > 0);
    }

    #[test]
    fn quadratic_second_derivative() {
        let g = cube(2, 16);
        let f = sample_field(g, |x| x[0] * x[0]).unwrap();
        let d = derivative(&f, &MultiIndex(vec![2, 0])).unwrap();
        assert!(d.field.values().iter().all(|v| (v - 2.0).abs() < 1e-8));
    }

    fn sine_error(cells: usize) -> f64 {
        let g = cube(2, cells);
        let f = sample_field(g.clone(), |x| x[0].sin()).unwrap();
        let d = derivative(&f, &MultiIndex::unit(2, 0)).unwrap();
        (0..g.len())
            .filter(|&i| !d.flags[i])
            .map(|i| (d.field.values()[i] - g.point(i)[0].cos()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn sine_converges_at_second_order() {
        let ratio = sine_error(16) / sine_error(32);
        assert!((ratio - 4.0).abs() < 0.3, "{ratio}");
    }

    #[test]
    fn mixed_partials_commute() {
        // composition order is fixed by axis, so compare ∂x∂y with a
        // transposed field instead
        let g = cube(2, 32);
        let f = sample_field(g.clone(), |x| (x[0] * x[1]).sin() + x[0].exp() * x[1]).unwrap();
        let t = sample_field(g.clone(), |x| (x[1] * x[0]).sin() + x[1].exp() * x[0]).unwrap();
        let a = derivative(&f, &MultiIndex(vec![1, 1])).unwrap();
        let b = derivative(&t, &MultiIndex(vec![1, 1])).unwrap();
        let c = g.cells();
        let mut worst: f64 = 0.0;
        for i in 0..c {
            for j in 0..c {
                worst = worst.max((a.field.values()[i * c + j] - b.field.values()[j * c + i]).abs());
            }
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn harmonic_map_energy_density() {
        let g = cube(3, 32);
        let u = sample_vector_field(g.clone(), 3, |x, out| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            for k in 0..3 {
                out[k] = x[k] / r;
            }
        })
        .unwrap();
        let grad = gradient(&u).unwrap();
        for i in 0..g.len() {
            let x = g.point(i);
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            if r2.sqrt() > 0.5 && !grad.flags[i] {
                let e = grad.norm_sq(i);
                assert!((e * r2 / 2.0 - 1.0).abs() < 0.02, "{e} at r2={r2}");
            }
        }
        let jet1 = jet(&u, 1).unwrap();
        let top = jet1.top_norm().unwrap();
        let i = g.node_containing(&[0.6, 0.3, -0.2]).unwrap();
        assert!((top.values()[i].powi(2) - grad.norm_sq(i)).abs() < 1e-12);
    }

    #[test]
    fn zero_order_jet_is_the_field() {
        let g = cube(2, 8);
        let u = sample_vector_field(g, 2, |x, o| {
            o[0] = x[0];
            o[1] = 1.0;
        })
        .unwrap();
        let j = jet(&u, 0).unwrap();
        assert_eq!(j.entries.len(), 2);
        assert_eq!(j.entries[0].derivative.field.values(), u.component(0).values());
    }
}
