//! Cell-centred uniform grids on boxes and balls in ℝⁿ, sampled fields,
//! ball averages and finite-difference derivatives.

mod ball;
mod diff;
mod field;

pub use ball::{ball_average, ball_integral, for_each_row, BallSummer};
pub use diff::{derivative, gradient, jet, DerivativeField, Gradient, Jet, JetEntry};
pub use field::{sample_field, sample_vector_field, ScalarField, VectorField};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 4;

/// Fixed-size coordinate buffer; only the first `n` entries are meaningful.
pub type Point = [f64; MAX_DIM];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Box,
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: impl Into<Vec<f64>>, radius: f64) -> Self {
        Ball { center: center.into(), radius }
    }

    pub fn centered(n: usize, radius: f64) -> Self {
        Ball { center: vec![0.0; n], radius }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist2(&self.center, x) < self.radius * self.radius
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Multi-index γ = (γ₁, …, γₙ) for mixed partial derivatives.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn unit(n: usize, axis: usize) -> Self {
        let mut g = vec![0; n];
        g[axis] = 1;
        MultiIndex(g)
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// All multi-indices of exactly order `m` in `n` variables, lexicographically
    /// descending (so `(m,0,…)` comes first).
    pub fn of_order(n: usize, m: u32) -> Vec<MultiIndex> {
        fn rec(n: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if cur.len() + 1 == n {
                cur.push(left);
                out.push(MultiIndex(cur.clone()));
                cur.pop();
                return;
            }
            for k in (0..=left).rev() {
                cur.push(k);
                rec(n, left - k, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        if n == 0 {
            return out;
        }
        rec(n, m, &mut Vec::with_capacity(n), &mut out);
        out
    }

    /// All multi-indices with order at most `m`, by increasing order.
    pub fn up_to(n: usize, m: u32) -> Vec<MultiIndex> {
        (0..=m).flat_map(|k| MultiIndex::of_order(n, k)).collect()
    }

    /// Multinomial coefficient |γ|!/γ!, the number of ordered derivative
    /// sequences represented by γ.
    pub fn multinomial(&self) -> f64 {
        let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
        fact(self.order()) / self.0.iter().map(|&g| fact(g)).product::<f64>()
    }
}

/// Uniform cell-centred grid with cubic cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells: usize,
    h: f64,
    domain: DomainKind,
}

impl GridSpec {
    /// Validating constructor. All axes must share one extent, the origin (if
    /// it lies in the box) must be a cell corner, and ball domains must fit in
    /// the box.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, cells: usize, domain: DomainKind) -> Result<Self> {
        let n = lower.len();
        if !(1..=MAX_DIM).contains(&n) {
            return Err(Error::Grid(format!("dimension {n} outside 1..={MAX_DIM}")));
        }
        if upper.len() != n {
            return Err(Error::Grid("bounds have different lengths".into()));
        }
        if cells < 8 {
            return Err(Error::Grid(format!("cells_per_axis = {cells} < 8")));
        }
        let extent = upper[0] - lower[0];
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::Grid("empty or non-finite extent".into()));
        }
        for a in 0..n {
            let e = upper[a] - lower[a];
            if (e - extent).abs() > 1e-12 * extent {
                return Err(Error::Grid(format!("axis {a} extent {e} differs from {extent}")));
            }
        }
        let h = extent / cells as f64;
        for a in 0..n {
            if lower[a] <= 0.0 && upper[a] >= 0.0 {
                let k = -lower[a] / h;
                if (k - k.round()).abs() > 1e-9 {
                    return Err(Error::Grid(format!(
                        "origin is not a cell corner on axis {a} (offset {k} cells)"
                    )));
                }
            }
        }
        if let DomainKind::Ball { center, radius } = &domain {
            if center.len() != n || !(*radius > 0.0) {
                return Err(Error::Grid("malformed ball domain".into()));
            }
            for a in 0..n {
                if center[a] - radius < lower[a] - 1e-12 || center[a] + radius > upper[a] + 1e-12 {
                    return Err(Error::Grid("ball domain exceeds the grid box".into()));
                }
            }
        }
        Ok(GridSpec { n, lower, upper, cells, h, domain })
    }

    /// The box `[-a, a]ⁿ`.
    pub fn cube(n: usize, half_width: f64, cells: usize) -> Result<Self> {
        GridSpec::new(vec![-half_width; n], vec![half_width; n], cells, DomainKind::Box)
    }

    /// The ball `B_R(0)` discretised on the box `[-R, R]ⁿ`.
    pub fn ball(n: usize, radius: f64, cells: usize) -> Result<Self> {
        GridSpec::new(
            vec![-radius; n],
            vec![radius; n],
            cells,
            DomainKind::Ball { center: vec![0.0; n], radius },
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn cells(&self) -> usize {
        self.cells
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
    pub fn domain(&self) -> &DomainKind {
        &self.domain
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.cells.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element hⁿ.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    /// Row-major stride of `axis` (axis 0 slowest).
    pub fn stride(&self, axis: usize) -> usize {
        self.cells.pow((self.n - 1 - axis) as u32)
    }

    pub fn multi_index(&self, mut index: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for a in (0..self.n).rev() {
            out[a] = index % self.cells;
            index /= self.cells;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi[..self.n].iter().fold(0, |acc, &k| acc * self.cells + k)
    }

    /// Cell-centre coordinate along `axis` of index `k`.
    #[inline]
    pub fn coord(&self, axis: usize, k: usize) -> f64 {
        self.lower[axis] + (k as f64 + 0.5) * self.h
    }

    pub fn point(&self, index: usize) -> Point {
        let m = self.multi_index(index);
        let mut p = [0.0; MAX_DIM];
        for a in 0..self.n {
            p[a] = self.coord(a, m[a]);
        }
        p
    }

    pub fn coords(&self, index: usize) -> Vec<f64> {
        self.point(index)[..self.n].to_vec()
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        let in_box = (0..self.n).all(|a| x[a] >= self.lower[a] && x[a] <= self.upper[a]);
        match &self.domain {
            DomainKind::Box => in_box,
            DomainKind::Ball { center, radius } => in_box && dist2(center, x) < radius * radius,
        }
    }

    /// Domain membership flag of every node.
    pub fn mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.in_domain(&self.point(i)[..self.n])).collect()
    }

    /// Geometric containment `B ⊆ Ω` (closed, with a relative slack of 1e-12).
    pub fn contains_ball(&self, ball: &Ball) -> bool {
        let eps = 1e-12 * (self.upper[0] - self.lower[0]);
        if ball.center.len() != self.n || !(ball.radius > 0.0) {
            return false;
        }
        let in_box = (0..self.n).all(|a| {
            ball.center[a] - ball.radius >= self.lower[a] - eps
                && ball.center[a] + ball.radius <= self.upper[a] + eps
        });
        match &self.domain {
            DomainKind::Box => in_box,
            DomainKind::Ball { center, radius } => {
                in_box && dist2(center, &ball.center).sqrt() + ball.radius <= radius + eps
            }
        }
    }

    /// Radius of the largest ball centred at the domain centre.
    pub fn inradius(&self) -> f64 {
        match &self.domain {
            DomainKind::Box => 0.5 * (self.upper[0] - self.lower[0]),
            DomainKind::Ball { radius, .. } => *radius,
        }
    }

    /// Index of the node whose cell contains `x`, if `x` is inside the box.
    pub fn node_containing(&self, x: &[f64]) -> Option<usize> {
        let mut multi = [0usize; MAX_DIM];
        for a in 0..self.n {
            let k = ((x[a] - self.lower[a]) / self.h).floor();
            if k < 0.0 || k >= self.cells as f64 {
                return None;
            }
            multi[a] = k as usize;
        }
        Some(self.flat_index(&multi))
    }

    /// Distance from node `index` to the nearest face of the box.
    pub fn boundary_distance(&self, index: usize) -> f64 {
        let p = self.point(index);
        (0..self.n)
            .map(|a| (p[a] - self.lower[a]).min(self.upper[a] - p[a]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Short content hash identifying the grid (used in provenance records).
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n as u64).to_le_bytes());
        hasher.update((self.cells as u64).to_le_bytes());
        for v in self.lower.iter().chain(&self.upper) {
            hasher.update(v.to_le_bytes());
        }
        if let DomainKind::Ball { center, radius } = &self.domain {
            for v in center.iter().chain(std::iter::once(radius)) {
                hasher.update(v.to_le_bytes());
            }
        }
        hex::encode(&hasher.finalize()[..8])
    }

    /// Grid with the same box and domain and `cells` cells per axis.
    pub fn with_cells(&self, cells: usize) -> Result<Self> {
        GridSpec::new(self.lower.clone(), self.upper.clone(), cells, self.domain.clone())
    }
}
