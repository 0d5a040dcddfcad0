use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fixtures::CoefficientField;
use crate::grid::VectorField;
use crate::numeric::{random_direction, seeded_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub node: usize,
    pub coords: Vec<f64>,
    pub condition: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    /// `min A(ξ)·ξ / |ξ|²` over the battery.
    pub a0_emp: f64,
    /// `max |A(ξ)| / |ξ|` over the battery.
    pub m_emp: f64,
    pub samples: usize,
    /// Samples breaking the claimed constants, if any were claimed.
    pub violations: Vec<Violation>,
}

/// Sample coercivity `A(x,u)ξ·ξ ≥ a₀|ξ|²` and growth `|A(x,u)ξ| ≤ M|ξ|`
/// (the `p = 2` structure conditions) on seeded `(node, ξ)` pairs drawn
/// from masked-in nodes. Sampled evidence only: nothing is certified
/// almost everywhere.
pub fn structure_check(
    a: &CoefficientField,
    u: &VectorField,
    samples: usize,
    seed: u64,
    claimed: Option<(f64, f64)>,
) -> StructureReport {
    let spec = u.spec();
    let n = spec.n();
    let w = n * u.components();
    let nodes: Vec<usize> = (0..u.len()).filter(|&i| u.mask()[i]).collect();
    let mut rng = seeded_rng(seed);
    let mut flux = vec![0.0; w];
    let mut a0 = f64::INFINITY;
    let mut big_m: f64 = 0.0;
    let mut violations = Vec::new();
    for _ in 0..samples {
        let i = nodes[rng.random_range(0..nodes.len())];
        let xi = random_direction(&mut rng, w);
        let x = spec.point(i);
        a.flux(&x[..n], u.node(i), &xi, &mut flux);
        let coercive: f64 = flux.iter().zip(&xi).map(|(p, q)| p * q).sum();
        let growth = flux.iter().map(|v| v * v).sum::<f64>().sqrt();
        a0 = a0.min(coercive);
        big_m = big_m.max(growth);
        if let Some((ca, cm)) = claimed {
            if coercive < ca * (1.0 - 1e-12) {
                violations.push(Violation { node: i, coords: spec.coords(i), condition: "coercivity".into(), value: coercive });
            }
            if growth > cm * (1.0 + 1e-12) {
                violations.push(Violation { node: i, coords: spec.coords(i), condition: "growth".into(), value: growth });
            }
        }
    }
    StructureReport { a0_emp: a0, m_emp: big_m, samples, violations }
}
