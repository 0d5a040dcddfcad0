//! Closed-form singular solutions and their coefficient fields.

mod coefficients;

pub use coefficients::{fixture_coefficients, BKind, CoefficientField, CoefficientKind, StructureConstants};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sample_field, sample_vector_field, GridSpec, ScalarField, VectorField};

/// `γ = (n/2)(1 − 1/√(4(n−1)² + 1))`.
pub fn de_giorgi_gamma(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Parameter(format!("De Giorgi exponent needs n ≥ 2, got {n}")));
    }
    let g = gamma_formula(n as f64);
    debug_assert!(g < n as f64 / 2.0);
    Ok(g)
}

fn gamma_formula(n: f64) -> f64 {
    let k = 4.0 * (n - 1.0) * (n - 1.0) + 1.0;
    0.5 * n * (1.0 - 1.0 / k.sqrt())
}

/// Koshelev's constants `(c, d)`.
pub fn koshelev_constants(n: usize) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(Error::Parameter(format!("Koshelev constants need n ≥ 3, got {n}")));
    }
    let nf = n as f64;
    let c = (nf - 1.0).powf(-0.5) * (1.0 + (nf - 2.0).powi(2) / (nf - 1.0)).powf(-0.25);
    Ok((c, (c + 1.0 / c) / (nf - 2.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixtureKind {
    /// `x/|x|^γ` with De Giorgi's γ.
    DeGiorgi,
    /// `x/|x|` solving the Giusti–Miranda system.
    GiustiMiranda,
    /// `x/|x|` solving Koshelev's system.
    Koshelev,
    /// `x/|x|` into the unit sphere.
    HarmonicMapSphere,
    /// `u(x, y) = x/|x|` for `x ∈ ℝ^d`, constant in the remaining variables.
    SplitHarmonicMap { d: usize },
    /// The scalar `|x|^(−λ/p)`.
    MorreyTest { lambda: f64, p: f64 },
    /// The scalar `exp(−|x|²/(2σ²))`.
    Gaussian { sigma: f64 },
    /// `u = A x + b` with `A` row-major (`components × n`).
    Affine { matrix: Vec<f64>, offset: Vec<f64> },
    /// `u^k = |x|² + x_k`.
    Quadratic,
}

/// Names accepted by [`FixtureSpec::by_name`].
pub const FIXTURE_NAMES: &[&str] = &[
    "de_giorgi",
    "giusti_miranda",
    "koshelev",
    "harmonic_map_sphere",
    "split_harmonic_map",
    "morrey_test",
    "gaussian",
    "affine",
    "quadratic",
];

/// A named closed-form field on ℝⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub kind: FixtureKind,
    pub n: usize,
    /// Power γ in `x/|x|^γ` for the power fixtures.
    pub gamma: Option<f64>,
}

/// Optional numeric parameters for registry lookups.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixtureArgs {
    pub lambda: Option<f64>,
    pub p: Option<f64>,
    pub sigma: Option<f64>,
}

impl FixtureSpec {
    pub fn new(kind: FixtureKind, n: usize) -> Result<Self> {
        if !(1..=crate::grid::MAX_DIM).contains(&n) {
            return Err(Error::Parameter(format!("fixture dimension {n} outside 1..=4")));
        }
        let gamma = match &kind {
            FixtureKind::DeGiorgi => Some(de_giorgi_gamma(n)?),
            FixtureKind::GiustiMiranda | FixtureKind::Koshelev => {
                if n < 3 {
                    return Err(Error::Parameter(format!("{kind:?} needs n ≥ 3 (division by n − 2)")));
                }
                Some(1.0)
            }
            FixtureKind::HarmonicMapSphere => Some(1.0),
            FixtureKind::SplitHarmonicMap { d } => {
                if *d < 2 || *d > n {
                    return Err(Error::Parameter(format!("split map needs 2 ≤ d = {d} ≤ n = {n}")));
                }
                None
            }
            FixtureKind::MorreyTest { lambda, p } => {
                if !(*lambda >= 0.0) || *lambda >= n as f64 {
                    return Err(Error::Parameter(format!(
                        "Morrey test function needs 0 ≤ λ < n, got λ = {lambda}, n = {n}"
                    )));
                }
                if !(*p >= 1.0) {
                    return Err(Error::Parameter(format!("Morrey test function needs p ≥ 1, got {p}")));
                }
                None
            }
            FixtureKind::Gaussian { sigma } => {
                if !(*sigma > 0.0) {
                    return Err(Error::Parameter(format!("Gaussian width {sigma} must be positive")));
                }
                None
            }
            FixtureKind::Affine { matrix, offset } => {
                if offset.is_empty() || matrix.len() != offset.len() * n {
                    return Err(Error::Parameter("affine fixture shape mismatch".into()));
                }
                None
            }
            FixtureKind::Quadratic => None,
        };
        Ok(FixtureSpec { kind, n, gamma })
    }

    /// Registry lookup by name.
    pub fn by_name(name: &str, n: usize, args: FixtureArgs) -> Result<Self> {
        let kind = match name {
            "de_giorgi" => FixtureKind::DeGiorgi,
            "giusti_miranda" => FixtureKind::GiustiMiranda,
            "koshelev" => FixtureKind::Koshelev,
            "harmonic_map_sphere" => FixtureKind::HarmonicMapSphere,
            "split_harmonic_map" => FixtureKind::SplitHarmonicMap { d: 3 },
            "morrey_test" => FixtureKind::MorreyTest {
                lambda: args.lambda.ok_or_else(|| Error::Config("morrey_test needs lambda".into()))?,
                p: args.p.ok_or_else(|| Error::Config("morrey_test needs p".into()))?,
            },
            "gaussian" => FixtureKind::Gaussian { sigma: args.sigma.unwrap_or(0.2) },
            "affine" => FixtureKind::Affine {
                matrix: (0..n * n)
                    .map(|j| {
                        let (k, i) = (j / n, j % n);
                        if k == i {
                            1.0
                        } else if i == (k + 1) % n {
                            0.5
                        } else {
                            0.0
                        }
                    })
                    .collect(),
                offset: (0..n).map(|k| k as f64).collect(),
            },
            "quadratic" => FixtureKind::Quadratic,
            other => return Err(Error::Config(format!("unknown fixture '{other}'"))),
        };
        FixtureSpec::new(kind, n)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FixtureKind::DeGiorgi => "de_giorgi",
            FixtureKind::GiustiMiranda => "giusti_miranda",
            FixtureKind::Koshelev => "koshelev",
            FixtureKind::HarmonicMapSphere => "harmonic_map_sphere",
            FixtureKind::SplitHarmonicMap { .. } => "split_harmonic_map",
            FixtureKind::MorreyTest { .. } => "morrey_test",
            FixtureKind::Gaussian { .. } => "gaussian",
            FixtureKind::Affine { .. } => "affine",
            FixtureKind::Quadratic => "quadratic",
        }
    }

    /// Number of components of `u`.
    pub fn components(&self) -> usize {
        match &self.kind {
            FixtureKind::SplitHarmonicMap { d } => *d,
            FixtureKind::MorreyTest { .. } | FixtureKind::Gaussian { .. } => 1,
            FixtureKind::Affine { offset, .. } => offset.len(),
            _ => self.n,
        }
    }

    /// Squared distance from `x` to the singular locus, if the fixture has one.
    pub fn locus_dist2(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            FixtureKind::DeGiorgi
            | FixtureKind::GiustiMiranda
            | FixtureKind::Koshelev
            | FixtureKind::HarmonicMapSphere => Some(x.iter().map(|v| v * v).sum()),
            FixtureKind::MorreyTest { lambda, .. } if *lambda > 0.0 => Some(x.iter().map(|v| v * v).sum()),
            FixtureKind::SplitHarmonicMap { d } => Some(x[..*d].iter().map(|v| v * v).sum()),
            _ => None,
        }
    }

    /// Human-readable singular locus.
    pub fn locus(&self) -> &'static str {
        match &self.kind {
            FixtureKind::SplitHarmonicMap { .. } => "{0} x R^(n-d)",
            _ if self.locus_dist2(&vec![1.0; self.n]).is_some() => "origin",
            _ => "none",
        }
    }

    /// Dimension of the singular locus, `None` for smooth fixtures.
    pub fn locus_dimension(&self) -> Option<usize> {
        match &self.kind {
            FixtureKind::SplitHarmonicMap { d } => Some(self.n - d),
            _ => self.locus_dist2(&vec![1.0; self.n]).map(|_| 0),
        }
    }

    fn check_locus(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Parameter(format!("point of dimension {} for an n = {} fixture", x.len(), self.n)));
        }
        if self.locus_dist2(x) == Some(0.0) {
            return Err(Error::SingularLocus(format!("{} evaluated at {x:?}", self.name())));
        }
        Ok(())
    }

    /// `u(x)` into `out` (length [`Self::components`]).
    pub fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_locus(x)?;
        self.eval_unchecked(x, out);
        Ok(())
    }

    fn eval_unchecked(&self, x: &[f64], out: &mut [f64]) {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match &self.kind {
            FixtureKind::DeGiorgi
            | FixtureKind::GiustiMiranda
            | FixtureKind::Koshelev
            | FixtureKind::HarmonicMapSphere => {
                let s = r2.powf(-0.5 * self.gamma.unwrap_or(1.0));
                for k in 0..self.n {
                    out[k] = x[k] * s;
                }
            }
            FixtureKind::SplitHarmonicMap { d } => {
                let s = x[..*d].iter().map(|v| v * v).sum::<f64>().sqrt();
                for k in 0..*d {
                    out[k] = x[k] / s;
                }
            }
            FixtureKind::MorreyTest { lambda, p } => out[0] = r2.powf(-0.5 * lambda / p),
            FixtureKind::Gaussian { sigma } => out[0] = (-0.5 * r2 / (sigma * sigma)).exp(),
            FixtureKind::Affine { matrix, offset } => {
                for k in 0..offset.len() {
                    out[k] = offset[k] + (0..self.n).map(|i| matrix[k * self.n + i] * x[i]).sum::<f64>();
                }
            }
            FixtureKind::Quadratic => {
                for k in 0..self.n {
                    out[k] = r2 + x[k];
                }
            }
        }
    }

    /// Closed-form Jacobian `∂_i u^k`, stored at `out[k * n + i]`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_locus(x)?;
        let n = self.n;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        out.iter_mut().for_each(|v| *v = 0.0);
        match &self.kind {
            FixtureKind::DeGiorgi
            | FixtureKind::GiustiMiranda
            | FixtureKind::Koshelev
            | FixtureKind::HarmonicMapSphere => {
                let g = self.gamma.unwrap_or(1.0);
                let s = r2.powf(-0.5 * g);
                for k in 0..n {
                    for i in 0..n {
                        let delta = if i == k { 1.0 } else { 0.0 };
                        out[k * n + i] = s * (delta - g * x[i] * x[k] / r2);
                    }
                }
            }
            FixtureKind::SplitHarmonicMap { d } => {
                let d = *d;
                let q2: f64 = x[..d].iter().map(|v| v * v).sum();
                let q = q2.sqrt();
                for k in 0..d {
                    for i in 0..d {
                        let delta = if i == k { 1.0 } else { 0.0 };
                        out[k * n + i] = (delta - x[i] * x[k] / q2) / q;
                    }
                }
            }
            FixtureKind::MorreyTest { lambda, p } => {
                let e = lambda / p;
                let s = -e * r2.powf(-0.5 * e - 1.0);
                for i in 0..n {
                    out[i] = s * x[i];
                }
            }
            FixtureKind::Gaussian { sigma } => {
                let f = (-0.5 * r2 / (sigma * sigma)).exp();
                for i in 0..n {
                    out[i] = -x[i] / (sigma * sigma) * f;
                }
            }
            FixtureKind::Affine { matrix, .. } => out[..matrix.len()].copy_from_slice(matrix),
            FixtureKind::Quadratic => {
                for k in 0..n {
                    for i in 0..n {
                        out[k * n + i] = 2.0 * x[i] + if i == k { 1.0 } else { 0.0 };
                    }
                }
            }
        }
        Ok(())
    }

    /// Sample on a grid; every node is a cell centre, so the singular locus
    /// (through the origin) is never hit.
    pub fn sample(&self, spec: Arc<GridSpec>) -> Result<VectorField> {
        if spec.n() != self.n {
            return Err(Error::Parameter(format!(
                "fixture has n = {} but the grid has n = {}",
                self.n,
                spec.n()
            )));
        }
        let m = self.components();
        sample_vector_field(spec, m, |x, out| {
            if self.locus_dist2(x) == Some(0.0) {
                out.iter_mut().for_each(|v| *v = f64::NAN);
            } else {
                self.eval_unchecked(x, out);
            }
        })
    }

    /// Scalar fixtures as a [`ScalarField`].
    pub fn sample_scalar(&self, spec: Arc<GridSpec>) -> Result<ScalarField> {
        if self.components() != 1 {
            return Err(Error::Parameter(format!("{} is not scalar", self.name())));
        }
        let u = self.sample(spec)?;
        Ok(u.component(0))
    }
}

/// `f(x) = |x|^(−λ/p)` sampled on the grid; its centred-ball profile
/// `r^λ ⨍_{B_r(0)} |f|^p` equals `n/(n−λ)` for every `r`.
pub fn morrey_test_function(lambda: f64, p: f64, spec: Arc<GridSpec>) -> Result<ScalarField> {
    let n = spec.n();
    if lambda >= n as f64 {
        return Err(Error::Parameter(format!(
            "λ = {lambda} ≥ n = {n}: the Morrey profile of |x|^(−λ/p) is unbounded"
        )));
    }
    let f = FixtureSpec::new(FixtureKind::MorreyTest { lambda, p }, n)?;
    let e = lambda / p;
    sample_field(spec, move |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        debug_assert!(f.locus_dist2(x) != Some(0.0));
        r2.powf(-0.5 * e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert!((de_giorgi_gamma(3).unwrap() - 1.5 * (1.0 - 1.0 / 17f64.sqrt())).abs() < 1e-15);
        assert!((de_giorgi_gamma(3).unwrap() - 1.1362).abs() < 1e-4);
        assert!((de_giorgi_gamma(2).unwrap() - 0.5528).abs() < 1e-4);
        assert!(de_giorgi_gamma(1).is_err());
        assert_eq!(gamma_formula(1.0), 0.0);
        for n in 2..=4 {
            assert!(de_giorgi_gamma(n).unwrap() < n as f64 / 2.0);
        }
    }

    #[test]
    fn locus_dimensions() {
        let a = FixtureArgs::default();
        assert_eq!(FixtureSpec::by_name("harmonic_map_sphere", 3, a.clone()).unwrap().locus_dimension(), Some(0));
        assert_eq!(FixtureSpec::by_name("split_harmonic_map", 4, a.clone()).unwrap().locus_dimension(), Some(1));
        assert_eq!(FixtureSpec::by_name("gaussian", 3, a).unwrap().locus_dimension(), None);
    }

    #[test]
    fn koshelev_values() {
        let (c, d) = koshelev_constants(3).unwrap();
        assert!((c - 0.6390).abs() < 1e-4 && (d - 2.2040).abs() < 1e-4);
        assert!(koshelev_constants(2).is_err());
    }

    #[test]
    fn pointwise_values() {
        let mut u = [0.0; 3];
        FixtureSpec::by_name("harmonic_map_sphere", 3, FixtureArgs::default())
            .unwrap()
            .eval(&[0.3, -1.2, 0.7], &mut u)
            .unwrap();
        assert!((u.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-15);
        let dg = FixtureSpec::new(FixtureKind::DeGiorgi, 3).unwrap();
        dg.eval(&[1.0, 0.0, 0.0], &mut u).unwrap();
        assert_eq!(u, [1.0, 0.0, 0.0]);
        assert!(matches!(dg.eval(&[0.0; 3], &mut u), Err(Error::SingularLocus(_))));
        let split = FixtureSpec::new(FixtureKind::SplitHarmonicMap { d: 3 }, 4).unwrap();
        for y in [-0.7, 0.0, 2.5] {
            split.eval(&[1.0, 0.0, 0.0, y], &mut u).unwrap();
            assert_eq!(u, [1.0, 0.0, 0.0]);
        }
        assert!(split.eval(&[0.0, 0.0, 0.0, 0.3], &mut u).is_err());
    }

    #[test]
    fn closed_form_gradients_match_differences() {
        let names = ["de_giorgi", "koshelev", "split_harmonic_map", "gaussian", "affine", "quadratic"];
        for name in names {
            let n = if name == "split_harmonic_map" { 4 } else { 3 };
            let f = FixtureSpec::by_name(name, n, FixtureArgs::default()).unwrap();
            let m = f.components();
            let x = [0.31, -0.42, 0.27, 0.5];
            let mut g = vec![0.0; m * n];
            f.gradient(&x[..n], &mut g).unwrap();
            let eps = 1e-6;
            for i in 0..n {
                let (mut a, mut b) = (vec![0.0; m], vec![0.0; m]);
                let mut xp = x[..n].to_vec();
                xp[i] += eps;
                f.eval(&xp, &mut a).unwrap();
                xp[i] -= 2.0 * eps;
                f.eval(&xp, &mut b).unwrap();
                for k in 0..m {
                    let fd = (a[k] - b[k]) / (2.0 * eps);
                    assert!((fd - g[k * n + i]).abs() < 1e-6, "{name} k={k} i={i}");
                }
            }
        }
    }

    #[test]
    fn registry_rejects_unknown_and_bad_dimensions() {
        assert!(FixtureSpec::by_name("nope", 3, FixtureArgs::default()).is_err());
        assert!(FixtureSpec::by_name("giusti_miranda", 2, FixtureArgs::default()).is_err());
        assert!(FixtureSpec::by_name("morrey_test", 3, FixtureArgs::default()).is_err());
        for name in FIXTURE_NAMES {
            let args = FixtureArgs { lambda: Some(1.0), p: Some(2.0), sigma: None };
            let f = FixtureSpec::by_name(name, 4, args).unwrap();
            assert_eq!(f.name(), *name);
        }
    }

    #[test]
    fn morrey_test_function_domain() {
        let g = Arc::new(GridSpec::cube(3, 1.0, 8).unwrap());
        assert!(morrey_test_function(3.0, 2.0, g.clone()).is_err());
        let f = morrey_test_function(0.0, 2.0, g).unwrap();
        assert!(f.values().iter().all(|v| *v == 1.0));
    }
}
