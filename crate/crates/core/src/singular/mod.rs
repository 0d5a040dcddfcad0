//! Singular-set detectors: oscillation sets `S_p̂`, unbounded-average sets
//! `T`, the Riesz-divergence set `R`, and their dimension report.

mod scan;

pub use scan::{
    average_profile, jacobian_norm, oscillation_profile, oscillation_scan, riesz_divergence_scan, scannable_nodes,
    unbounded_average_scan, RieszScan, ScanProfiles,
};

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::capacity::{box_dimension, box_scales, BoxDimension};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Smallest slope of `log osc` against `log(1/r)` counted as "does not
    /// decay".
    pub osc_slope: f64,
    pub osc_floor: f64,
    /// Slope of the averages against `log r` at or below which they count as
    /// growing.
    pub average_slope: f64,
    /// Smallest ratio of inner to outer average slope counted as sustained
    /// growth (used with three or more radii).
    pub average_persistence: f64,
    /// Smallest growth of `I₁(|Du|)` per halving of `h`, relative to the
    /// finest value, counted as divergent.
    pub riesz_increment: f64,
    /// Smallest ratio of the finest to the coarsest pair increment counted as
    /// sustained growth (used with three or more resolutions).
    pub riesz_persistence: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { osc_slope: -0.3, osc_floor: 1e-3, average_slope: -0.1, average_persistence: 0.5, riesz_increment: 0.05, riesz_persistence: 0.75 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanConfig {
    pub p_hat: f64,
    /// Radius ladder on the finest grid.
    pub radii: Vec<f64>,
    pub thresholds: Thresholds,
    /// Riesz probes: nodes within this many `h` of an `S` or `T` candidate.
    pub probe_dilation: f64,
    /// Extra Riesz probes drawn from the remaining scannable nodes.
    pub far_probes: usize,
    pub seed: u64,
}

impl ScanConfig {
    /// Ladder `2h, 4h, …` with `levels` radii.
    pub fn dyadic(spec: &GridSpec, levels: usize) -> Self {
        let radii = (0..levels).map(|k| 2.0 * spec.h() * 2f64.powi(k as i32)).collect();
        ScanConfig { p_hat: 2.0, radii, thresholds: Thresholds::default(), probe_dilation: 3.0, far_probes: 32, seed: 42 }
    }
}

/// Everything the classifier consumes.
#[derive(Debug, Clone)]
pub struct Profiles {
    pub spec: Arc<GridSpec>,
    pub p_hat: f64,
    pub oscillation: ScanProfiles,
    /// `|⨍u|`.
    pub mean_modulus: ScanProfiles,
    /// `⨍|u|`.
    pub modulus_mean: ScanProfiles,
    pub riesz: Option<RieszScan>,
    /// Finest-grid node of every Riesz probe.
    pub riesz_nodes: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dimension {
    Label(String),
    Box(BoxDimension),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetReport {
    pub nodes: Vec<usize>,
    pub coords: Vec<Vec<f64>>,
    pub dimension: Dimension,
}

impl SetReport {
    fn new(spec: &GridSpec, nodes: Vec<usize>) -> Result<Self> {
        let dimension = if nodes.is_empty() {
            Dimension::Label("empty set".into())
        } else {
            Dimension::Box(box_dimension(spec, &nodes, &box_scales(spec, &nodes))?)
        };
        Ok(SetReport { coords: nodes.iter().map(|&i| spec.coords(i)).collect(), nodes, dimension })
    }

    pub fn dimension_value(&self) -> Option<f64> {
        match &self.dimension {
            Dimension::Box(b) => Some(b.dimension),
            Dimension::Label(_) => None,
        }
    }
}

/// Agreement of `S` and `R` on the Riesz probes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossCheck {
    pub probes: usize,
    pub agree: bool,
    pub s_only: Vec<usize>,
    pub r_only: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RieszRow {
    pub node: usize,
    pub coords: Vec<f64>,
    pub values: Vec<f64>,
    pub increment: f64,
    pub relative_increment: f64,
    pub persistence: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularReport {
    pub n: usize,
    pub cells_per_axis: usize,
    pub h: f64,
    pub p_hat: f64,
    pub radii: Vec<f64>,
    pub thresholds: Thresholds,
    pub scanned_nodes: usize,
    pub s: SetReport,
    pub t: SetReport,
    pub r: Option<SetReport>,
    pub riesz_h: Vec<f64>,
    pub riesz: Vec<RieszRow>,
    pub cross_check: Option<CrossCheck>,
}

fn oscillation_set(p: &ScanProfiles, th: &Thresholds) -> Vec<usize> {
    let smallest = (0..p.radii.len()).min_by(|&a, &b| p.radii[a].total_cmp(&p.radii[b])).unwrap_or(0);
    p.slopes()
        .iter()
        .enumerate()
        .filter(|(k, s)| {
            // decay as r shrinks is a positive slope in log r
            let trend = s.map_or(f64::NEG_INFINITY, |s| -s);
            trend >= th.osc_slope && p.row(*k)[smallest] >= th.osc_floor
        })
        .map(|(k, _)| p.nodes[k])
        .collect()
}

fn average_set(a: &ScanProfiles, b: &ScanProfiles, th: &Thresholds) -> Vec<usize> {
    let sustained = |p: &ScanProfiles| -> Vec<bool> {
        if p.radii.len() < 3 {
            return vec![true; p.len()];
        }
        p.persistence().iter().map(|q| q.is_some_and(|q| q >= th.average_persistence)).collect()
    };
    let (sa, sb) = (sustained(a), sustained(b));
    a.slopes()
        .iter()
        .zip(b.slopes())
        .enumerate()
        .filter(|(k, (x, y))| {
            x.is_some_and(|x| x <= th.average_slope) && y.is_some_and(|y| y <= th.average_slope) && sa[*k] && sb[*k]
        })
        .map(|(k, _)| a.nodes[k])
        .collect()
}

fn riesz_divergent(row: &RieszRow, resolutions: usize, th: &Thresholds) -> bool {
    let grows = row.relative_increment >= th.riesz_increment;
    if resolutions < 3 {
        return grows;
    }
    grows && row.persistence.is_some_and(|q| q >= th.riesz_persistence)
}

/// Threshold the profiles into `S`, `T` and `R` and estimate dimensions.
pub fn classify_and_report(profiles: &Profiles, thresholds: &Thresholds) -> Result<SingularReport> {
    if profiles.oscillation.is_empty() {
        return Err(Error::Parameter("no profiles to classify".into()));
    }
    let spec = &profiles.spec;
    let s = oscillation_set(&profiles.oscillation, thresholds);
    let t = average_set(&profiles.mean_modulus, &profiles.modulus_mean, thresholds);
    let (r, rows, cross) = match &profiles.riesz {
        Some(scan) => {
            let rows: Vec<RieszRow> = profiles
                .riesz_nodes
                .iter()
                .enumerate()
                .map(|(k, &node)| RieszRow {
                    node,
                    coords: scan.probes[k].clone(),
                    values: scan.row(k).to_vec(),
                    increment: scan.increment(k),
                    relative_increment: scan.relative_increment(k),
                    persistence: scan.persistence(k),
                })
                .collect();
            let r: Vec<usize> =
                rows.iter().filter(|r| riesz_divergent(r, scan.h.len(), thresholds)).map(|r| r.node).collect();
            let probed: BTreeSet<usize> = profiles.riesz_nodes.iter().copied().collect();
            let s_set: BTreeSet<usize> = s.iter().copied().filter(|i| probed.contains(i)).collect();
            let r_set: BTreeSet<usize> = r.iter().copied().collect();
            let s_only: Vec<usize> = s_set.difference(&r_set).copied().collect();
            let r_only: Vec<usize> = r_set.difference(&s_set).copied().collect();
            let unprobed = s.len() - s_set.len();
            let cross = CrossCheck {
                probes: probed.len(),
                agree: s_only.is_empty() && r_only.is_empty() && unprobed == 0,
                s_only,
                r_only,
            };
            let mut r_sorted = r;
            r_sorted.sort_unstable();
            (Some(SetReport::new(spec, r_sorted)?), rows, Some(cross))
        }
        None => (None, Vec::new(), None),
    };
    Ok(SingularReport {
        n: spec.n(),
        cells_per_axis: spec.cells(),
        h: spec.h(),
        p_hat: profiles.p_hat,
        radii: profiles.oscillation.radii.clone(),
        thresholds: *thresholds,
        scanned_nodes: profiles.oscillation.len(),
        s: SetReport::new(spec, s)?,
        t: SetReport::new(spec, t)?,
        r,
        riesz_h: profiles.riesz.as_ref().map(|s| s.h.clone()).unwrap_or_default(),
        riesz: rows,
        cross_check: cross,
    })
}

/// Run every scan on the finest field; the Riesz scan uses all fields and
/// probes the neighbourhood of the `S`/`T` candidates plus a seeded sample
/// of the remaining nodes.
pub fn scan_fields(fields: &[VectorField], config: &ScanConfig) -> Result<Profiles> {
    let finest = fields
        .iter()
        .min_by(|a, b| a.spec().h().total_cmp(&b.spec().h()))
        .ok_or_else(|| Error::Parameter("no fields to scan".into()))?;
    let spec = finest.spec_arc().clone();
    let oscillation = oscillation_scan(finest, config.p_hat, &config.radii)?;
    let (mean_modulus, modulus_mean) = unbounded_average_scan(finest, &config.radii)?;
    let mut profiles =
        Profiles { spec: spec.clone(), p_hat: config.p_hat, oscillation, mean_modulus, modulus_mean, riesz: None, riesz_nodes: vec![] };
    if fields.len() < 2 {
        return Ok(profiles);
    }
    let th = &config.thresholds;
    let candidates: Vec<usize> = oscillation_set(&profiles.oscillation, th)
        .into_iter()
        .chain(average_set(&profiles.mean_modulus, &profiles.modulus_mean, th))
        .collect();
    let reach = config.probe_dilation * spec.h();
    let n = spec.n();
    let cpts: Vec<Vec<f64>> = candidates.iter().map(|&i| spec.coords(i)).collect();
    let scanned = &profiles.oscillation.nodes;
    let (near, far): (Vec<usize>, Vec<usize>) = scanned.iter().partition(|&&i| {
        let x = spec.point(i);
        cpts.iter().any(|c| crate::grid::dist2(&x[..n], c) <= reach * reach)
    });
    let mut rng = crate::numeric::seeded_rng(config.seed);
    let mut probes: Vec<usize> = near;
    probes.extend(far.choose_multiple(&mut rng, config.far_probes.min(far.len())).copied());
    probes.sort_unstable();
    probes.dedup();
    let points: Vec<Vec<f64>> = probes.iter().map(|&i| spec.coords(i)).collect();
    profiles.riesz = Some(riesz_divergence_scan(fields, &points)?);
    profiles.riesz_nodes = probes;
    Ok(profiles)
}

/// `scan_fields` followed by `classify_and_report`.
pub fn scan_singular(fields: &[VectorField], config: &ScanConfig) -> Result<SingularReport> {
    classify_and_report(&scan_fields(fields, config)?, &config.thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample_vector_field;
    use std::f64::consts::{LN_2, PI, SQRT_2};

    fn hedgehog(cells: usize) -> VectorField {
        let spec = Arc::new(GridSpec::cube(3, 1.0, cells).unwrap());
        sample_vector_field(spec, 3, |x, out| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            for k in 0..3 {
                out[k] = x[k] / r;
            }
        })
        .unwrap()
    }

    #[test]
    fn affine_field_has_empty_sets() {
        let spec = Arc::new(GridSpec::cube(3, 1.0, 32).unwrap());
        let u = sample_vector_field(spec.clone(), 3, |x, out| {
            out[0] = x[0] + 0.5 * x[1] + 1.0;
            out[1] = x[1] - x[2];
            out[2] = 2.0 * x[2] + 0.25;
        })
        .unwrap();
        let rep = scan_singular(&[u], &ScanConfig::dyadic(&spec, 3)).unwrap();
        assert!(rep.scanned_nodes > 0);
        assert!(rep.s.nodes.is_empty() && rep.t.nodes.is_empty());
        assert!(matches!(&rep.s.dimension, Dimension::Label(l) if l == "empty set"));
        assert!(rep.r.is_none());
    }

    #[test]
    fn hedgehog_oscillation_at_the_corner_is_one() {
        // ⨍u = 0 by symmetry and |u| = 1
        let u = hedgehog(16);
        for v in oscillation_profile(&u, 2.0, &[0.0; 3], &[0.25, 0.5]) {
            assert!((v - 1.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn hedgehog_oscillation_set_is_the_corner_cell() {
        let u = hedgehog(32);
        let spec = u.spec_arc().clone();
        let rep = scan_singular(&[u], &ScanConfig::dyadic(&spec, 3)).unwrap();
        assert_eq!(rep.s.nodes.len(), 8);
        for x in &rep.s.coords {
            assert!(x.iter().all(|v| (v.abs() - spec.h() / 2.0).abs() < 1e-12));
        }
        assert!(rep.s.dimension_value().unwrap().abs() < 0.1);
        assert!(rep.t.nodes.is_empty());
    }

    #[test]
    fn power_singularity_has_unbounded_averages_near_the_origin() {
        let spec = Arc::new(GridSpec::cube(3, 1.0, 32).unwrap());
        let u = sample_vector_field(spec.clone(), 1, |x, out| {
            out[0] = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).powf(-0.25);
        })
        .unwrap();
        let rep = scan_singular(&[u], &ScanConfig::dyadic(&spec, 3)).unwrap();
        assert!(!rep.t.nodes.is_empty());
        for x in &rep.t.coords {
            assert!(x.iter().map(|v| v * v).sum::<f64>().sqrt() < 3.0 * spec.h());
        }
    }

    #[test]
    fn origin_increment_matches_the_log_divergence() {
        let fields: Vec<VectorField> = [16, 32, 64].iter().map(|&c| hedgehog(c)).collect();
        let scan = riesz_divergence_scan(&fields, &[vec![0.0; 3]]).unwrap();
        let expected = SQRT_2 * 4.0 * PI * LN_2;
        for inc in scan.increments(0) {
            assert!((inc / expected - 1.0).abs() < 0.02, "{inc}");
        }
        assert!(scan.persistence(0).unwrap() > 0.95);
    }

    #[test]
    fn single_resolution_is_refused() {
        assert!(matches!(riesz_divergence_scan(&[hedgehog(8)], &[vec![0.0; 3]]), Err(Error::Parameter(_))));
    }

    #[test]
    fn power_law_profiles_persist() {
        let radii = vec![0.1, 0.2, 0.4];
        let values: Vec<f64> = radii.iter().map(|r: &f64| 3.0 * r.powf(-0.7)).collect();
        let p = ScanProfiles { radii: radii.clone(), nodes: vec![0], values };
        assert!((p.slopes()[0].unwrap() + 0.7).abs() < 1e-12);
        assert!((p.persistence()[0].unwrap() - 1.0).abs() < 1e-12);
        // bounded bump: slope dies off as r shrinks
        let bump: Vec<f64> = radii.iter().map(|r| (-r * r).exp()).collect();
        let q = ScanProfiles { radii, nodes: vec![0], values: bump };
        assert!(q.persistence()[0].unwrap() < 0.3);
    }

    #[test]
    fn empty_profiles_are_refused() {
        let spec = Arc::new(GridSpec::cube(3, 1.0, 8).unwrap());
        let empty = ScanProfiles { radii: vec![0.5], nodes: vec![], values: vec![] };
        let p = Profiles {
            spec,
            p_hat: 2.0,
            oscillation: empty.clone(),
            mean_modulus: empty.clone(),
            modulus_mean: empty,
            riesz: None,
            riesz_nodes: vec![],
        };
        assert!(classify_and_report(&p, &Thresholds::default()).is_err());
    }
}
