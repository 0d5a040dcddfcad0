use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::least_squares;
use crate::grid::{for_each_row, gradient, Ball, BallSummer, GridSpec, ScalarField, VectorField};

/// Per-probe values over a radius ladder, row-major `probe × radius`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanProfiles {
    pub radii: Vec<f64>,
    pub nodes: Vec<usize>,
    pub values: Vec<f64>,
}

impl ScanProfiles {
    pub fn row(&self, k: usize) -> &[f64] {
        let m = self.radii.len();
        &self.values[k * m..(k + 1) * m]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Least-squares slope of `log value` against `log r` per probe;
    /// `None` where a value is not positive.
    pub fn slopes(&self) -> Vec<Option<f64>> {
        let x: Vec<f64> = self.radii.iter().map(|r| r.ln()).collect();
        (0..self.len())
            .map(|k| {
                let row = self.row(k);
                if row.iter().any(|v| !(*v > 0.0)) {
                    return None;
                }
                let y: Vec<f64> = row.iter().map(|v| v.ln()).collect();
                least_squares(&x, &y, 2).ok().map(|f| f.slope)
            })
            .collect()
    }

    /// Ratio of the log-log slope on the two smallest radii to the slope on
    /// the two largest; near 1 for a power law. `None` with fewer than three
    /// radii, a nonpositive value or a nonnegative outer slope.
    pub fn persistence(&self) -> Vec<Option<f64>> {
        let mut order: Vec<usize> = (0..self.radii.len()).collect();
        order.sort_by(|&a, &b| self.radii[a].total_cmp(&self.radii[b]));
        let m = order.len();
        let local = |row: &[f64], i: usize, j: usize| {
            (row[order[j]].ln() - row[order[i]].ln()) / (self.radii[order[j]].ln() - self.radii[order[i]].ln())
        };
        (0..self.len())
            .map(|k| {
                let row = self.row(k);
                if m < 3 || row.iter().any(|v| !(*v > 0.0)) {
                    return None;
                }
                let outer = local(row, m - 2, m - 1);
                (outer < 0.0).then(|| local(row, 0, 1) / outer)
            })
            .collect()
    }
}

fn check_ladder(spec: &GridSpec, radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::Parameter("empty radius ladder".into()));
    }
    let floor = 2.0 * spec.h() * (1.0 - 1e-12);
    if let Some(r) = radii.iter().find(|&&r| r < floor) {
        return Err(Error::Resolution { what: "scan radius".into(), value: *r, floor: 2.0 * spec.h() });
    }
    Ok(())
}

/// Masked-in nodes whose largest ladder ball lies in `Ω`.
pub fn scannable_nodes(spec: &GridSpec, radii: &[f64]) -> Vec<usize> {
    let rmax = radii.iter().cloned().fold(0.0, f64::max);
    let mask = spec.mask();
    (0..spec.len())
        .filter(|&i| mask[i] && spec.contains_ball(&Ball::new(spec.coords(i), rmax)))
        .collect()
}

/// Node-count mean of every component over `B_r(c)`, with the count.
fn ball_mean(u: &VectorField, center: &[f64], r: f64) -> (Vec<f64>, usize) {
    let spec = u.spec();
    let m = u.components();
    let mask = u.mask();
    let mut s = vec![0.0; m];
    let mut count = 0;
    for_each_row(spec, center, r, |base, lo, hi| {
        for i in base + lo..base + hi {
            if mask[i] {
                let v = u.node(i);
                for k in 0..m {
                    s[k] += v[k];
                }
                count += 1;
            }
        }
    });
    s.iter_mut().for_each(|v| *v /= count.max(1) as f64);
    (s, count)
}

/// `⨍_{B_r(c)} |u − ⨍u|^p̂` for each radius, node-count averages.
pub fn oscillation_profile(u: &VectorField, p_hat: f64, center: &[f64], radii: &[f64]) -> Vec<f64> {
    let spec = u.spec();
    let mask = u.mask();
    let m = u.components();
    radii
        .iter()
        .map(|&r| {
            let (mean, count) = ball_mean(u, center, r);
            let mut s = 0.0;
            for_each_row(spec, center, r, |base, lo, hi| {
                for i in base + lo..base + hi {
                    if mask[i] {
                        let v = u.node(i);
                        let d2: f64 = (0..m).map(|k| (v[k] - mean[k]) * (v[k] - mean[k])).sum();
                        s += d2.powf(p_hat / 2.0);
                    }
                }
            });
            s / count.max(1) as f64
        })
        .collect()
}

/// `|⨍_{B_r(c)} u|` and `⨍_{B_r(c)} |u|` for each radius.
pub fn average_profile(u: &VectorField, center: &[f64], radii: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let spec = u.spec();
    let mask = u.mask();
    radii
        .iter()
        .map(|&r| {
            let (mean, count) = ball_mean(u, center, r);
            let mut s = 0.0;
            for_each_row(spec, center, r, |base, lo, hi| {
                for i in base + lo..base + hi {
                    if mask[i] {
                        s += u.node(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                    }
                }
            });
            (mean.iter().map(|v| v * v).sum::<f64>().sqrt(), s / count.max(1) as f64)
        })
        .unzip()
}

/// Oscillation profiles at every scannable node. `p̂ = 2` runs on prefix
/// sums through `⨍|u|² − |⨍u|²`; other exponents are summed directly.
pub fn oscillation_scan(u: &VectorField, p_hat: f64, radii: &[f64]) -> Result<ScanProfiles> {
    if !(p_hat >= 1.0) {
        return Err(Error::Parameter(format!("oscillation exponent {p_hat} below 1")));
    }
    let spec = u.spec();
    check_ladder(spec, radii)?;
    let nodes = scannable_nodes(spec, radii);
    let values: Vec<f64> = if p_hat == 2.0 {
        let m = u.components();
        let mask = u.mask();
        let ones = vec![1.0; spec.len()];
        let count = BallSummer::new(spec, &ones, mask);
        let sq: Vec<f64> = (0..spec.len()).map(|i| u.node(i).iter().map(|v| v * v).sum()).collect();
        let sq = BallSummer::new(spec, &sq, mask);
        let comps: Vec<BallSummer> = (0..m).map(|k| BallSummer::new(spec, u.component(k).values(), mask)).collect();
        nodes
            .par_iter()
            .flat_map_iter(|&i| {
                let c = spec.coords(i);
                radii
                    .iter()
                    .map(|&r| {
                        let n = count.sum(spec, &c, r);
                        let mean2: f64 = comps.iter().map(|s| (s.sum(spec, &c, r) / n).powi(2)).sum();
                        (sq.sum(spec, &c, r) / n - mean2).max(0.0)
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    } else {
        nodes.par_iter().flat_map_iter(|&i| oscillation_profile(u, p_hat, &spec.coords(i), radii)).collect()
    };
    Ok(ScanProfiles { radii: radii.to_vec(), nodes, values })
}

/// Mean-modulus profiles: `|⨍u|` and `⨍|u|` at every scannable node.
pub fn unbounded_average_scan(u: &VectorField, radii: &[f64]) -> Result<(ScanProfiles, ScanProfiles)> {
    let spec = u.spec();
    check_ladder(spec, radii)?;
    let nodes = scannable_nodes(spec, radii);
    let rows: Vec<(Vec<f64>, Vec<f64>)> =
        nodes.par_iter().map(|&i| average_profile(u, &spec.coords(i), radii)).collect();
    let (a, b): (Vec<Vec<f64>>, Vec<Vec<f64>>) = rows.into_iter().unzip();
    Ok((
        ScanProfiles { radii: radii.to_vec(), nodes: nodes.clone(), values: a.concat() },
        ScanProfiles { radii: radii.to_vec(), nodes, values: b.concat() },
    ))
}

/// `I₁(|Du|)` at the probes on every resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RieszScan {
    pub probes: Vec<Vec<f64>>,
    /// Grid spacing per resolution, coarsest first.
    pub h: Vec<f64>,
    /// Row-major `probe × resolution`.
    pub values: Vec<f64>,
}

impl RieszScan {
    pub fn row(&self, k: usize) -> &[f64] {
        let m = self.h.len();
        &self.values[k * m..(k + 1) * m]
    }

    /// Mean growth of the value per halving of `h`.
    pub fn increment(&self, k: usize) -> f64 {
        let row = self.row(k);
        let halvings = (self.h[0] / self.h[self.h.len() - 1]).log2();
        (row[row.len() - 1] - row[0]) / halvings
    }

    /// Growth per halving of `h` on each consecutive pair of resolutions.
    pub fn increments(&self, k: usize) -> Vec<f64> {
        let row = self.row(k);
        (1..row.len()).map(|j| (row[j] - row[j - 1]) / (self.h[j - 1] / self.h[j]).log2()).collect()
    }

    /// Finest over coarsest pair increment; near 1 for logarithmic growth,
    /// small once the value converges. `None` with only two resolutions or
    /// no initial growth.
    pub fn persistence(&self, k: usize) -> Option<f64> {
        let inc = self.increments(k);
        (inc.len() >= 2 && inc[0] > 0.0).then(|| inc[inc.len() - 1] / inc[0])
    }

    /// Increment relative to the finest value.
    pub fn relative_increment(&self, k: usize) -> f64 {
        let row = self.row(k);
        self.increment(k) / row[row.len() - 1].abs().max(f64::MIN_POSITIVE)
    }
}

/// `|Du|` as a scalar field (Frobenius norm of the central-difference
/// Jacobian).
pub fn jacobian_norm(u: &VectorField) -> Result<ScalarField> {
    let g = gradient(u)?;
    let vals: Vec<f64> = (0..u.len()).map(|i| g.norm_sq(i).sqrt()).collect();
    ScalarField::with_mask(u.spec_arc().clone(), vals, u.mask().to_vec())
}

/// Subdivision of the cellwise Riesz quadrature and its near-field extent
/// (cells per axis).
const SUBDIVISION: usize = 8;

fn near_extent(n: usize) -> usize {
    if n > 3 {
        1
    } else {
        2
    }
}

/// Evaluate `I₁(|Du|)` at shared probe points on each resolution, with
/// `|Du|` piecewise constant on cells.
pub fn riesz_divergence_scan(fields: &[VectorField], probes: &[Vec<f64>]) -> Result<RieszScan> {
    if fields.len() < 2 {
        return Err(Error::Parameter(format!("{} resolutions, at least 2 needed", fields.len())));
    }
    let mut fields: Vec<&VectorField> = fields.iter().collect();
    fields.sort_by(|a, b| b.spec().h().total_cmp(&a.spec().h()));
    let per: Vec<Vec<f64>> = fields
        .iter()
        .map(|u| {
            crate::analysis::riesz_potential_cellwise(&jacobian_norm(u)?, 1.0, probes, near_extent(u.spec().n()), SUBDIVISION)
        })
        .collect::<Result<_>>()?;
    let m = fields.len();
    let values = (0..probes.len()).flat_map(|k| (0..m).map(|j| per[j][k]).collect::<Vec<_>>()).collect();
    Ok(RieszScan { probes: probes.to_vec(), h: fields.iter().map(|u| u.spec().h()).collect(), values })
}
