use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Ball, GridSpec};

/// `r0·2^(−k)` for `k = 0, 1, …` while the radius stays ≥ `floor`.
pub fn dyadic_radii(r0: f64, floor: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = r0;
    while r >= floor * (1.0 - 1e-12) && out.len() < 64 {
        out.push(r);
        r *= 0.5;
    }
    out
}

/// Finite set of balls standing in for the supremum over all balls in Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallFamily {
    balls: Vec<Ball>,
    radii: Vec<f64>,
    dropped: usize,
}

/// Which points a lattice family may use as centres.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterLattice {
    /// Cell centres.
    Nodes,
    /// Cell corners (the origin is one).
    Corners,
}

impl BallFamily {
    /// Keep the balls that lie in Ω and respect the `2h` resolution floor.
    pub fn from_balls(spec: &GridSpec, balls: impl IntoIterator<Item = Ball>) -> Self {
        let floor = 2.0 * spec.h() * (1.0 - 1e-12);
        let mut kept = Vec::new();
        let mut dropped = 0;
        for b in balls {
            if b.radius >= floor && spec.contains_ball(&b) {
                kept.push(b);
            } else {
                dropped += 1;
            }
        }
        let mut radii: Vec<f64> = kept.iter().map(|b| b.radius).collect();
        radii.sort_by(|a, b| b.total_cmp(a));
        radii.dedup();
        BallFamily { balls: kept, radii, dropped }
    }

    /// Concentric balls about one centre.
    pub fn centered(spec: &GridSpec, center: &[f64], radii: &[f64]) -> Self {
        BallFamily::from_balls(spec, radii.iter().map(|&r| Ball::new(center.to_vec(), r)))
    }

    /// Balls of every radius centred on a lattice of spacing about
    /// `spacing·r` (never finer than one cell).
    pub fn lattice(spec: &GridSpec, radii: &[f64], spacing: f64, kind: CenterLattice) -> Self {
        let n = spec.n();
        let h = spec.h();
        let mut balls = Vec::new();
        for &r in radii {
            let step = ((spacing * r / h).round() as usize).max(1);
            let shift = if kind == CenterLattice::Nodes { 0.5 } else { 0.0 };
            // indices congruent to the origin's corner index, so the origin
            // is a centre of every corner lattice
            let axis: Vec<Vec<f64>> = (0..n)
                .map(|a| {
                    let lo = spec.lower()[a];
                    let up = spec.upper()[a];
                    let origin_k = (-lo / h).round() as i64;
                    (0..=spec.cells() as i64)
                        .filter(|k| (k - origin_k).rem_euclid(step as i64) == 0)
                        .map(|k| lo + (k as f64 + shift) * h)
                        .filter(|x| x - r >= lo - 1e-12 && x + r <= up + 1e-12)
                        .collect()
                })
                .collect();
            let mut idx = vec![0usize; n];
            if axis.iter().any(|p| p.is_empty()) {
                continue;
            }
            'outer: loop {
                balls.push(Ball::new((0..n).map(|a| axis[a][idx[a]]).collect::<Vec<_>>(), r));
                let mut a = n;
                loop {
                    if a == 0 {
                        break 'outer;
                    }
                    a -= 1;
                    idx[a] += 1;
                    if idx[a] < axis[a].len() {
                        break;
                    }
                    idx[a] = 0;
                }
            }
        }
        BallFamily::from_balls(spec, balls)
    }

    /// Union of two families over the same grid.
    pub fn merge(mut self, other: BallFamily) -> Self {
        self.balls.extend(other.balls);
        self.dropped += other.dropped;
        self.radii.extend(other.radii);
        self.radii.sort_by(|a, b| b.total_cmp(a));
        self.radii.dedup();
        self
    }

    /// Keep only balls whose centre satisfies `0 ≤ c₀ ≤ c₁ ≤ … `, one
    /// representative per orbit of the coordinate reflections and
    /// permutations.
    pub fn symmetry_reduced(&self) -> Self {
        let balls = self
            .balls
            .iter()
            .filter(|b| b.center[0] >= -1e-12 && b.center.windows(2).all(|w| w[0] <= w[1] + 1e-12))
            .cloned()
            .collect();
        BallFamily { balls, radii: self.radii.clone(), dropped: self.dropped }
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
    /// Number of requested balls rejected by the containment or resolution rule.
    pub fn dropped(&self) -> usize {
        self.dropped
    }
    pub fn len(&self) -> usize {
        self.balls.len()
    }
    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn require_nonempty(&self) -> Result<()> {
        if self.balls.is_empty() {
            return Err(Error::Config("ball family is empty".into()));
        }
        Ok(())
    }
}
