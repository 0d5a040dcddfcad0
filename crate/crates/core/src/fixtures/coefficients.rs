use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{koshelev_constants, FixtureKind, FixtureSpec};
use crate::error::{Error, Result};
use crate::numeric::{random_direction, seeded_rng};

/// Which matrix `b_ik` enters the rank-one part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BKind {
    /// `x_i x_k / |x|²`.
    Position,
    /// `u^i u^k / (1 + |u|²)`.
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientKind {
    /// `a_ij^kl = δ_ij δ_kl`.
    Identity,
    /// `a_ij^kl = δ_ij δ_kl + (c δ_ik + d b_ik)(c δ_jl + d b_jl)`.
    DeGiorgiType { c: f64, d: f64, b: BKind },
}

/// Empirical ellipticity and bound constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureConstants {
    /// Smallest Rayleigh quotient `a ξ·ξ / |ξ|²` seen.
    pub a0: f64,
    /// Largest `|a_ij^kl|` seen.
    pub big_m: f64,
    pub samples: usize,
}

/// Coefficients `a_ij^kl(x, u)` of a second-order system, with spatial
/// indices `i, j < n` and component indices `k, l < m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub kind: CoefficientKind,
    pub n: usize,
    pub m: usize,
    pub constants: Option<StructureConstants>,
}

impl CoefficientField {
    pub fn identity(n: usize, m: usize) -> Self {
        CoefficientField { kind: CoefficientKind::Identity, n, m, constants: None }
    }

    pub fn de_giorgi_type(n: usize, c: f64, d: f64, b: BKind) -> Self {
        CoefficientField { kind: CoefficientKind::DeGiorgiType { c, d, b }, n, m: n, constants: None }
    }

    /// `b_ik(x, u)` into `out[i * n + k]`.
    fn b(&self, kind: BKind, x: &[f64], u: &[f64], out: &mut [f64]) {
        let n = self.n;
        match kind {
            BKind::Position => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                for i in 0..n {
                    for k in 0..n {
                        out[i * n + k] = x[i] * x[k] / r2;
                    }
                }
            }
            BKind::Target => {
                let s = 1.0 + u.iter().map(|v| v * v).sum::<f64>();
                for i in 0..n {
                    for k in 0..n {
                        out[i * n + k] = u[i] * u[k] / s;
                    }
                }
            }
        }
    }

    /// Flux `σ_j^l = Σ_{i,k} a_ij^kl ∂_i u^k`, with `du[k * n + i]` and
    /// `out[l * n + j]`.
    pub fn flux(&self, x: &[f64], u: &[f64], du: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&du[..self.n * self.m]);
        if let CoefficientKind::DeGiorgiType { c, d, b } = self.kind {
            let n = self.n;
            let mut bm = [0.0; 16];
            self.b(b, x, u, &mut bm);
            // s = c div u + d b:Du
            let mut s = 0.0;
            for i in 0..n {
                for k in 0..n {
                    let e = if i == k { c } else { 0.0 } + d * bm[i * n + k];
                    s += e * du[k * n + i];
                }
            }
            for j in 0..n {
                for l in 0..n {
                    let e = if j == l { c } else { 0.0 } + d * bm[j * n + l];
                    out[l * n + j] += e * s;
                }
            }
        }
    }

    /// `a(x, u)(ξ, η) = Σ a_ij^kl ξ_i^k η_j^l`.
    pub fn bilinear(&self, x: &[f64], u: &[f64], xi: &[f64], eta: &[f64]) -> f64 {
        let mut f = [0.0; 16];
        let w = self.n * self.m;
        self.flux(x, u, xi, &mut f[..w]);
        f[..w].iter().zip(eta).map(|(a, b)| a * b).sum()
    }

    /// Full tensor at `((i * n + j) * m + k) * m + l`.
    pub fn tensor(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let mut out = vec![0.0; n * n * m * m];
        let mut xi = vec![0.0; n * m];
        let mut f = vec![0.0; n * m];
        for i in 0..n {
            for k in 0..m {
                xi.iter_mut().for_each(|v| *v = 0.0);
                xi[k * n + i] = 1.0;
                self.flux(x, u, &xi, &mut f);
                for j in 0..n {
                    for l in 0..m {
                        out[((i * n + j) * m + k) * m + l] = f[l * n + j];
                    }
                }
            }
        }
        out
    }

    /// Rayleigh sampling over `(x, u)` points with `directions` random ξ in
    /// total, seeded.
    pub fn estimate_constants(&self, points: &[(Vec<f64>, Vec<f64>)], directions: usize, seed: u64) -> StructureConstants {
        let mut rng = seeded_rng(seed);
        let w = self.n * self.m;
        let mut a0 = f64::INFINITY;
        let mut big_m: f64 = 0.0;
        for (x, u) in points {
            big_m = self.tensor(x, u).iter().fold(big_m, |a, v| a.max(v.abs()));
        }
        for s in 0..directions {
            let (x, u) = &points[s % points.len()];
            let xi = random_direction(&mut rng, w);
            a0 = a0.min(self.bilinear(x, u, &xi, &xi));
        }
        StructureConstants { a0, big_m, samples: directions }
    }

    /// Largest `max_entries |a(x,u) − a(x,v)| / |u − v|^β` over the pairs.
    pub fn holder_quotient(&self, pairs: &[(Vec<f64>, Vec<f64>, Vec<f64>)], beta: f64) -> f64 {
        pairs
            .iter()
            .map(|(x, u, v)| {
                let du = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                if du == 0.0 {
                    return 0.0;
                }
                let (a, b) = (self.tensor(x, u), self.tensor(x, v));
                let diff = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                diff / du.powf(beta)
            })
            .fold(0.0, f64::max)
    }
}

/// Coefficients attached to a fixture, with empirical `a₀` and `M` from
/// 1000 random directions over points in the shell `0.1 < |x| < 1`.
pub fn fixture_coefficients(spec: &FixtureSpec, seed: u64) -> Result<CoefficientField> {
    let n = spec.n;
    let mut field = match &spec.kind {
        FixtureKind::DeGiorgi => CoefficientField::de_giorgi_type(n, n as f64 - 2.0, n as f64, BKind::Position),
        FixtureKind::GiustiMiranda => {
            CoefficientField::de_giorgi_type(n, 1.0, 4.0 / (n as f64 - 2.0), BKind::Target)
        }
        FixtureKind::Koshelev => {
            let (c, d) = koshelev_constants(n)?;
            CoefficientField::de_giorgi_type(n, c, d, BKind::Position)
        }
        FixtureKind::MorreyTest { .. } | FixtureKind::Gaussian { .. } => {
            return Err(Error::Parameter(format!("{} has no associated coefficients", spec.name())))
        }
        _ => CoefficientField::identity(n, spec.components()),
    };
    let mut rng = seeded_rng(seed);
    let mut points = Vec::with_capacity(100);
    while points.len() < 100 {
        let dir = random_direction(&mut rng, n);
        let r = rng.random_range(0.1..1.0);
        let x: Vec<f64> = dir.iter().map(|v| v * r).collect();
        let mut u = vec![0.0; spec.components()];
        if spec.eval(&x, &mut u).is_ok() {
            points.push((x, u));
        }
    }
    field.constants = Some(field.estimate_constants(&points, 1000, seed));
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::FixtureArgs;

    fn named(name: &str) -> CoefficientField {
        fixture_coefficients(&FixtureSpec::by_name(name, 3, FixtureArgs::default()).unwrap(), 42).unwrap()
    }

    #[test]
    fn de_giorgi_constants() {
        let a = named("de_giorgi");
        assert_eq!(a.kind, CoefficientKind::DeGiorgiType { c: 1.0, d: 3.0, b: BKind::Position });
        let k = a.constants.unwrap();
        assert!(k.a0 >= 1.0 - 1e-12, "{}", k.a0);
        assert!(k.big_m <= 17.0 + 1e-12, "{}", k.big_m);
    }

    #[test]
    fn identity_constants_are_one() {
        let a = named("harmonic_map_sphere");
        let k = a.constants.unwrap();
        assert!((k.a0 - 1.0).abs() < 1e-12 && (k.big_m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tensor_symmetry() {
        let mut rng = seeded_rng(7);
        for name in ["de_giorgi", "giusti_miranda", "koshelev"] {
            let a = named(name);
            let x = random_direction(&mut rng, 3);
            let u = random_direction(&mut rng, 3);
            let t = a.tensor(&x, &u);
            let idx = |i: usize, j: usize, k: usize, l: usize| ((i * 3 + j) * 3 + k) * 3 + l;
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        for l in 0..3 {
                            assert_eq!(t[idx(i, j, k, l)], t[idx(j, i, l, k)], "{name}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn flux_matches_tensor_contraction() {
        let a = named("giusti_miranda");
        let x = [0.2, -0.4, 0.5];
        let u = [0.3, 0.1, -0.7];
        let du: Vec<f64> = (0..9).map(|v| (v as f64 * 0.37).sin()).collect();
        let t = a.tensor(&x, &u);
        let mut f = [0.0; 9];
        a.flux(&x, &u, &du, &mut f);
        for l in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3)
                    .flat_map(|i| (0..3).map(move |k| (i, k)))
                    .map(|(i, k)| t[((i * 3 + j) * 3 + k) * 3 + l] * du[k * 3 + i])
                    .sum();
                assert!((s - f[l * 3 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn giusti_miranda_is_lipschitz_in_u() {
        let a = named("giusti_miranda");
        let mut rng = seeded_rng(42);
        let pairs: Vec<_> = (0..200)
            .map(|_| {
                let x = random_direction(&mut rng, 3);
                let u = random_direction(&mut rng, 3);
                let eps = 10f64.powf(-rng.random_range(1.0..6.0));
                let v: Vec<f64> = u.iter().zip(random_direction(&mut rng, 3)).map(|(a, b)| a + eps * b).collect();
                (x, u, v)
            })
            .collect();
        let q = a.holder_quotient(&pairs, 1.0);
        // |∂b/∂u| ≤ 1 entrywise and d = 4: a generous analytic bound
        assert!(q.is_finite() && q < 100.0, "{q}");
    }
}
