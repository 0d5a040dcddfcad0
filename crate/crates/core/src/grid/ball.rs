use super::{Ball, GridSpec, ScalarField, MAX_DIM};
use crate::error::{Error, Result};
use crate::numeric::ball_volume;

/// Index range `[lo, hi)` of cell centres `x_k` on `axis` with
/// `|x_k - c| < s`.
#[inline]
fn axis_range(spec: &GridSpec, axis: usize, c: f64, s: f64) -> (usize, usize) {
    let h = spec.h();
    let low = spec.lower()[axis];
    let lo = ((c - s - low) / h - 0.5).floor() + 1.0;
    let hi = ((c + s - low) / h - 0.5).ceil();
    let clamp = |v: f64| v.max(0.0).min(spec.cells() as f64) as usize;
    (clamp(lo), clamp(hi))
}

/// Refine [`axis_range`] so that membership agrees bit-for-bit with
/// `d2 + (x_k - c)² < r2`, the same expression [`Ball::contains`] evaluates.
fn exact_range(spec: &GridSpec, axis: usize, c: f64, d2: f64, r2: f64) -> (usize, usize) {
    let inside = |k: usize| {
        let x = spec.coord(axis, k) - c;
        d2 + x * x < r2
    };
    let (mut lo, mut hi) = axis_range(spec, axis, c, (r2 - d2).sqrt());
    while lo > 0 && inside(lo - 1) {
        lo -= 1;
    }
    while lo < hi && !inside(lo) {
        lo += 1;
    }
    while hi < spec.cells() && inside(hi) {
        hi += 1;
    }
    while hi > lo && !inside(hi - 1) {
        hi -= 1;
    }
    (lo, hi)
}

/// Visit the nodes strictly inside `B_r(c)` row by row along the last axis.
/// The callback receives the flat index of the row start (last-axis index 0)
/// and the half-open last-axis range inside the ball. Rows are visited in a
/// fixed order.
pub fn for_each_row(spec: &GridSpec, center: &[f64], radius: f64, mut f: impl FnMut(usize, usize, usize)) {
    let n = spec.n();
    let last = n - 1;
    let r2 = radius * radius;
    let mut ranges = [(0usize, 0usize); MAX_DIM];
    for a in 0..last {
        let (lo, hi) = axis_range(spec, a, center[a], radius);
        ranges[a] = (lo.saturating_sub(1), (hi + 1).min(spec.cells()));
        if ranges[a].0 >= ranges[a].1 {
            return;
        }
    }
    let mut idx = [0usize; MAX_DIM];
    for a in 0..last {
        idx[a] = ranges[a].0;
    }
    loop {
        let mut d2 = 0.0;
        let mut base = 0usize;
        for a in 0..last {
            let x = spec.coord(a, idx[a]) - center[a];
            d2 += x * x;
            base = base * spec.cells() + idx[a];
        }
        base *= spec.cells();
        if d2 < r2 {
            let (lo, hi) = exact_range(spec, last, center[last], d2, r2);
            if lo < hi {
                f(base, lo, hi);
            }
        }
        // odometer over the leading axes
        let mut a = last;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < ranges[a].1 {
                break;
            }
            idx[a] = ranges[a].0;
        }
    }
}

fn check_ball(spec: &GridSpec, ball: &Ball) -> Result<()> {
    if ball.radius < 2.0 * spec.h() * (1.0 - 1e-12) {
        return Err(Error::Resolution { what: "ball radius", value: ball.radius, floor: 2.0 * spec.h() });
    }
    if !spec.contains_ball(ball) {
        return Err(Error::NotContained { center: ball.center.clone(), radius: ball.radius });
    }
    Ok(())
}

/// `(1/|B|) Σ_{nodes in B} |f|^p hⁿ` with the exact ball volume.
pub fn ball_average(f: &ScalarField, ball: &Ball, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Parameter(format!("exponent p = {p} < 1")));
    }
    let spec = f.spec();
    check_ball(spec, ball)?;
    let sum = ball_sum(f, ball, |v| v.abs().powf(p));
    Ok(sum * spec.cell_volume() / ball_volume(spec.n(), ball.radius))
}

/// `Σ_{nodes in B} g(f) hⁿ` without containment or resolution checks.
pub fn ball_integral(f: &ScalarField, ball: &Ball, g: impl Fn(f64) -> f64) -> f64 {
    ball_sum(f, ball, g) * f.spec().cell_volume()
}

fn ball_sum(f: &ScalarField, ball: &Ball, g: impl Fn(f64) -> f64) -> f64 {
    let values = f.values();
    let mask = f.mask();
    let mut sum = 0.0;
    for_each_row(f.spec(), &ball.center, ball.radius, |base, lo, hi| {
        for i in base + lo..base + hi {
            if mask[i] {
                sum += g(values[i]);
            }
        }
    });
    sum
}

/// Prefix sums along the last axis, so that a ball sum costs one lookup per
/// row instead of one per node. Masked-out nodes contribute zero.
#[derive(Debug, Clone)]
pub struct BallSummer {
    cells: usize,
    prefix: Vec<f64>,
}

impl BallSummer {
    pub fn new(spec: &GridSpec, weights: &[f64], mask: &[bool]) -> Self {
        let cells = spec.cells();
        let rows = spec.len() / cells;
        let mut prefix = vec![0.0; rows * (cells + 1)];
        for r in 0..rows {
            let out = &mut prefix[r * (cells + 1)..(r + 1) * (cells + 1)];
            let mut acc = 0.0;
            for k in 0..cells {
                let i = r * cells + k;
                if mask[i] {
                    acc += weights[i];
                }
                out[k + 1] = acc;
            }
        }
        BallSummer { cells, prefix }
    }

    /// Summer of `g(f)` for a scalar field.
    pub fn of_field(f: &ScalarField, g: impl Fn(f64) -> f64) -> Self {
        let w: Vec<f64> = f.values().iter().map(|&v| g(v)).collect();
        BallSummer::new(f.spec(), &w, f.mask())
    }

    /// Sum of the weights over nodes strictly inside the ball.
    pub fn sum(&self, spec: &GridSpec, center: &[f64], radius: f64) -> f64 {
        let mut s = 0.0;
        let c1 = self.cells + 1;
        for_each_row(spec, center, radius, |base, lo, hi| {
            let row = base / self.cells;
            s += self.prefix[row * c1 + hi] - self.prefix[row * c1 + lo];
        });
        s
    }
}
