use std::sync::Arc;

use rayon::prelude::*;

use super::GridSpec;
use crate::error::{Error, Result};

/// Real values at every node plus the domain mask. Values at masked-out
/// nodes are carried but ignored by every reduction.
#[derive(Debug, Clone)]
pub struct ScalarField {
    spec: Arc<GridSpec>,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl ScalarField {
    /// Wrap raw values; the mask comes from the grid's domain.
    pub fn from_values(spec: Arc<GridSpec>, values: Vec<f64>) -> Result<Self> {
        let mask = spec.mask();
        ScalarField::with_mask(spec, values, mask)
    }

    pub fn with_mask(spec: Arc<GridSpec>, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != spec.len() || mask.len() != spec.len() {
            return Err(Error::Grid(format!(
                "field length {} does not match grid size {}",
                values.len(),
                spec.len()
            )));
        }
        if let Some(i) = (0..values.len()).find(|&i| mask[i] && !values[i].is_finite()) {
            return Err(Error::NonFinite { node: i, coords: spec.coords(i) });
        }
        Ok(ScalarField { spec, values, mask })
    }

    pub fn constant(spec: Arc<GridSpec>, c: f64) -> Self {
        let mask = spec.mask();
        let values = vec![c; spec.len()];
        ScalarField { spec, values, mask }
    }

    pub fn zeros(spec: Arc<GridSpec>) -> Self {
        ScalarField::constant(spec, 0.0)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn spec_arc(&self) -> &Arc<GridSpec> {
        &self.spec
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a node, zero if the node is masked out.
    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        if self.mask[i] {
            self.values[i]
        } else {
            0.0
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> ScalarField {
        let values = self.values.par_iter().map(|&v| f(v)).collect();
        ScalarField { spec: self.spec.clone(), values, mask: self.mask.clone() }
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<ScalarField> {
        if self.spec != other.spec {
            return Err(Error::Grid("fields live on different grids".into()));
        }
        let values = self
            .values
            .par_iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect();
        Ok(ScalarField { spec: self.spec.clone(), values, mask })
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        self.map(|v| s * v)
    }

    /// Largest |value| over masked-in nodes.
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| v.abs())
            .fold(0.0, f64::max)
    }

    /// Σ f hⁿ over masked-in nodes.
    pub fn integral(&self) -> f64 {
        crate::numeric::det_sum_by(self.len(), |i| self.get(i)) * self.spec.cell_volume()
    }

    /// (Σ |f|^p hⁿ)^{1/p} over masked-in nodes.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let s = crate::numeric::det_sum_by(self.len(), |i| self.get(i).abs().powf(p));
        (s * self.spec.cell_volume()).powf(1.0 / p)
    }
}

/// `m` real components per node, stored node-major.
#[derive(Debug, Clone)]
pub struct VectorField {
    spec: Arc<GridSpec>,
    components: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl VectorField {
    pub fn from_values(spec: Arc<GridSpec>, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 || values.len() != spec.len() * components {
            return Err(Error::Grid("vector field length mismatch".into()));
        }
        let mask = spec.mask();
        for i in 0..spec.len() {
            if mask[i] && values[i * components..(i + 1) * components].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { node: i, coords: spec.coords(i) });
            }
        }
        Ok(VectorField { spec, components, values, mask })
    }

    /// Stack scalar fields as components.
    pub fn from_components(parts: &[ScalarField]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Grid("no components".into()))?;
        let m = parts.len();
        let len = first.len();
        let mut values = vec![0.0; len * m];
        for (k, p) in parts.iter().enumerate() {
            if p.spec() != first.spec() {
                return Err(Error::Grid("components live on different grids".into()));
            }
            for i in 0..len {
                values[i * m + k] = p.values()[i];
            }
        }
        Ok(VectorField {
            spec: first.spec_arc().clone(),
            components: m,
            values,
            mask: first.mask().to_vec(),
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn spec_arc(&self) -> &Arc<GridSpec> {
        &self.spec
    }
    pub fn components(&self) -> usize {
        self.components
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
    pub fn len(&self) -> usize {
        self.spec.len()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.components..(i + 1) * self.components]
    }

    pub fn component(&self, k: usize) -> ScalarField {
        let m = self.components;
        let values = (0..self.len()).map(|i| self.values[i * m + k]).collect();
        ScalarField { spec: self.spec.clone(), values, mask: self.mask.clone() }
    }

    /// Pointwise Euclidean norm.
    pub fn norm_field(&self) -> ScalarField {
        let values = (0..self.len())
            .into_par_iter()
            .map(|i| self.node(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        ScalarField { spec: self.spec.clone(), values, mask: self.mask.clone() }
    }

    /// Add a constant vector to every node.
    pub fn offset(&self, c: &[f64]) -> VectorField {
        let m = self.components;
        let values = self.values.iter().enumerate().map(|(j, v)| v + c[j % m]).collect();
        VectorField { spec: self.spec.clone(), components: m, values, mask: self.mask.clone() }
    }
}

/// Sample a pointwise function at every cell centre. Non-finite values at
/// masked-in nodes are rejected with the offending node; masked-out nodes
/// store zero.
pub fn sample_field<F>(spec: Arc<GridSpec>, evaluator: F) -> Result<ScalarField>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mask = spec.mask();
    let n = spec.n();
    let values: Vec<f64> = (0..spec.len())
        .into_par_iter()
        .map(|i| if mask[i] { evaluator(&spec.point(i)[..n]) } else { 0.0 })
        .collect();
    ScalarField::with_mask(spec, values, mask)
}

/// Vector analogue of [`sample_field`]; the evaluator writes `components`
/// values into the provided buffer.
pub fn sample_vector_field<F>(spec: Arc<GridSpec>, components: usize, evaluator: F) -> Result<VectorField>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let mask = spec.mask();
    let n = spec.n();
    let mut values = vec![0.0; spec.len() * components];
    values
        .par_chunks_mut(components)
        .enumerate()
        .for_each(|(i, out)| {
            if mask[i] {
                evaluator(&spec.point(i)[..n], out);
            }
        });
    VectorField::from_values(spec, components, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_evaluator() {
        let g = Arc::new(GridSpec::cube(2, 1.0, 8).unwrap());
        let f = sample_field(g, |_| 3.0).unwrap();
        assert!(f.values().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn squared_norm_at_node_nearest_origin() {
        for n in 2..=4 {
            let g = Arc::new(GridSpec::cube(n, 1.0, 8).unwrap());
            let h = g.h();
            let f = sample_field(g.clone(), |x| x.iter().map(|v| v * v).sum()).unwrap();
            let i = g.node_containing(&vec![h / 4.0; n]).unwrap();
            assert!((f.values()[i] - n as f64 * h * h / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn inverse_distance_is_finite_on_cell_centres() {
        let g = Arc::new(GridSpec::cube(3, 1.0, 16).unwrap());
        let f = sample_field(g.clone(), |x| 1.0 / x.iter().map(|v| v * v).sum::<f64>().sqrt()).unwrap();
        let h = g.h();
        let max = f.max_abs();
        assert!((max - 2.0 / (h * 3f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn non_finite_is_rejected_with_node() {
        let g = Arc::new(GridSpec::cube(2, 1.0, 8).unwrap());
        let err = sample_field(g, |x| if x[0] > 0.8 { f64::NAN } else { 1.0 }).unwrap_err();
        match err {
            Error::NonFinite { coords, .. } => assert!(coords[0] > 0.8),
            e => panic!("unexpected error {e}"),
        }
    }
}
