//! The experiments behind each subcommand.

use std::collections::BTreeSet;
use std::f64::consts::{LN_2, PI, SQRT_2};
use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::{json, Value};

use morrey_core::analysis::{
    dyadic_radii, morrey_norm, morrey_profile, representation_reconstruct, riesz_potential, zorko_distance,
    BallFamily, CenterLattice, MorreyParams,
};
use morrey_core::capacity::{
    ball_capacity_scaling, ball_targets, capacity_family, exact_cover, greedy_cover, isocapacitary_check, Basis,
    CandidatePool, SolverOptions, EXACT_LIMIT,
};
use morrey_core::fit::log_log;
use morrey_core::fixtures::{fixture_coefficients, FixtureArgs, FixtureKind, FixtureSpec};
use morrey_core::grid::{sample_field, Ball, GridSpec, ScalarField, VectorField};
use morrey_core::io::{write_csv, write_scalar, write_vector, Provenance};
use morrey_core::numeric::{seeded_rng, sphere_area};
use morrey_core::singular::{jacobian_norm, riesz_divergence_scan, scan_singular, scannable_nodes, ScanConfig};
use morrey_core::weak::{battery_residuals, caccioppoli_check, monotonicity_check, structure_check, TestFunction};

use crate::config::{Command, ConfigError, ExperimentConfig, FieldKind};
use crate::{Check, Outcome, Result};

pub fn dispatch(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.command {
        Command::VerifyFixture => verify_fixture(cfg),
        Command::MorreyNorm => morrey_norm_cmd(cfg),
        Command::Riesz => riesz(cfg),
        Command::CapacityScaling => capacity_scaling(cfg),
        Command::Hausdorff => hausdorff(cfg),
        Command::IsocapCheck => isocap_check(cfg),
        Command::ScanSingular => scan(cfg),
        Command::Reconstruct => reconstruct(cfg),
        Command::Report => report(cfg),
    }
}

fn grid(cfg: &ExperimentConfig, cells: usize) -> Result<Arc<GridSpec>> {
    Ok(Arc::new(GridSpec::cube(cfg.grid.n, cfg.grid.half_width, cells)?))
}

fn fixture(cfg: &ExperimentConfig) -> Result<FixtureSpec> {
    let args = FixtureArgs {
        lambda: Some(cfg.params.fixture_lambda.unwrap_or(cfg.params.lambda)),
        p: Some(cfg.params.p),
        sigma: Some(cfg.extra.sigma),
    };
    Ok(FixtureSpec::by_name(&cfg.fixture, cfg.grid.n, args)?)
}

fn provenance(cfg: &ExperimentConfig, spec: &GridSpec) -> Result<Provenance> {
    Ok(Provenance::new(cfg.command.name(), serde_json::to_value(cfg)?, spec))
}

fn scalar_of(fx: &FixtureSpec, u: &VectorField, kind: FieldKind) -> Result<ScalarField> {
    Ok(match kind {
        FieldKind::Value if u.components() == 1 => u.component(0),
        FieldKind::Value => u.norm_field(),
        FieldKind::GradientNorm => jacobian_norm(u)?,
        FieldKind::ExactGradientNorm => {
            let mut g = vec![0.0; fx.components() * fx.n];
            let mut values = Vec::with_capacity(u.len());
            for i in 0..u.len() {
                let x = u.spec().coords(i);
                values.push(match fx.gradient(&x, &mut g) {
                    Ok(()) => g.iter().map(|v| v * v).sum::<f64>().sqrt(),
                    Err(_) => f64::NAN,
                });
            }
            ScalarField::with_mask(u.spec_arc().clone(), values, u.mask().to_vec())?
        }
    })
}

/// Degree `s` with `field ~ |x|^(−s)` about the origin, when known.
fn homogeneity(fx: &FixtureSpec, kind: FieldKind) -> Option<f64> {
    match (kind, &fx.kind) {
        (FieldKind::Value, FixtureKind::MorreyTest { lambda, p }) => Some(lambda / p),
        (_, FixtureKind::SplitHarmonicMap { .. }) if kind != FieldKind::Value => Some(1.0),
        (FieldKind::GradientNorm | FieldKind::ExactGradientNorm, _) => fx.gamma,
        (FieldKind::Value, _) => fx.gamma.map(|g| g - 1.0),
    }
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_path(dir.join(name))?)
}

fn f(v: f64) -> String {
    format!("{v:.17e}")
}

fn relative_gap(value: f64, target: f64) -> f64 {
    (value - target).abs() / target.abs()
}

/// Fixtures that solve their associated system weakly.
fn is_weak_solution(fx: &FixtureSpec) -> bool {
    matches!(fx.kind, FixtureKind::DeGiorgi | FixtureKind::GiustiMiranda | FixtureKind::Koshelev | FixtureKind::Affine { .. })
}

/// Exact Caccioppoli ratio of `x/|x|^γ` for `m = 1`; the same on every
/// radius since both sides scale alike.
fn caccioppoli_closed_form(fx: &FixtureSpec, m: u32, p: f64) -> Option<f64> {
    let g = fx.gamma?;
    let n = fx.n as f64;
    let inner = n - g * p;
    if m != 1 || inner <= 0.0 {
        return None;
    }
    let k = (n - 1.0) + (1.0 - g) * (1.0 - g);
    Some(k.powf(p / 2.0) * (n + (1.0 - g) * p) / inner * 2f64.powf(-inner))
}

fn verify_fixture(cfg: &ExperimentConfig) -> Result<Outcome> {
    let fx = fixture(cfg)?;
    let n = cfg.grid.n;
    let a = fixture_coefficients(&fx, cfg.seed)?;
    let fields: Vec<VectorField> =
        cfg.grid.resolutions.iter().map(|&c| Ok(fx.sample(grid(cfg, c)?)?)).collect::<Result<_>>()?;
    let finest = fields.last().ok_or_else(|| ConfigError("[grid] resolutions is empty".into()))?;
    let battery = TestFunction::battery(n, fx.components(), cfg.seed);
    let residuals = battery_residuals(&fields, &a, &battery)?;
    let structure = structure_check(&a, finest, cfg.extra.samples, cfg.seed, None);
    let origin = vec![0.0; n];
    let caccioppoli = caccioppoli_check(finest, cfg.params.m, cfg.params.p, &origin, &cfg.ladders.radii)?;
    let harmonic = matches!(fx.kind, FixtureKind::HarmonicMapSphere | FixtureKind::SplitHarmonicMap { .. });
    let monotonicity = if harmonic {
        Some(monotonicity_check(finest, &a, &origin, cfg.extra.radius, 0.0, 1.0, &cfg.ladders.t)?)
    } else {
        None
    };

    let mut checks = Vec::new();
    if matches!(fx.kind, FixtureKind::Affine { .. }) {
        let worst = residuals.rows.iter().map(|r| r.max_relative).fold(0.0, f64::max);
        checks.push(Check::new(None, "affine residuals vanish", worst <= 1e-10, format!("max relative residual {worst:.3e}")));
    } else if is_weak_solution(&fx) {
        let last = residuals.rows.last().map_or(f64::NAN, |r| r.max_relative);
        checks.push(Check::new(Some(2), "finest residual below 5e-2", last < 5e-2, format!("max relative {last:.3e}")));
        let slope = residuals.slope.unwrap_or(f64::NAN);
        checks.push(Check::new(Some(2), "residual refinement slope at least 1", slope >= 1.0, format!("slope {slope:.3}")));
    }
    checks.push(Check::new(
        None,
        "sampled coercivity",
        structure.a0_emp > 0.0 && structure.m_emp.is_finite(),
        format!("a0 {:.4}, M {:.4} over {} samples", structure.a0_emp, structure.m_emp, structure.samples),
    ));
    let bound = caccioppoli.bound.unwrap_or(f64::NAN);
    checks.push(Check::new(
        None,
        "Caccioppoli ratios bounded",
        bound.is_finite() && caccioppoli.rows.iter().all(|r| r.ratio.is_some()),
        format!("largest ratio {bound:.4}"),
    ));
    if let Some(m) = &monotonicity {
        checks.push(Check::new(Some(10), "monotonicity quantity constant within 2%", m.spread <= 0.02, format!("spread {:.4}", m.spread)));
        checks.push(Check::new(Some(10), "monotonicity quantity never drops by 2%", m.max_drop <= 0.02, format!("max drop {:.4}", m.max_drop)));
    }

    let mut w = csv_writer(&cfg.out, "residuals.csv")?;
    w.write_record(["cells", "h", "function", "residual", "normalization", "relative"])?;
    for row in &residuals.rows {
        for (k, r) in row.reports.iter().enumerate() {
            let rel = r.relative.map(f).unwrap_or_default();
            w.write_record([row.cells.to_string(), f(row.h), k.to_string(), f(r.residual), f(r.normalization), rel])?;
        }
    }
    w.flush()?;
    let mut w = csv_writer(&cfg.out, "caccioppoli.csv")?;
    w.write_record(["radius", "numerator", "denominator", "ratio"])?;
    for r in &caccioppoli.rows {
        w.write_record([f(r.radius), f(r.numerator), f(r.denominator), r.ratio.map(f).unwrap_or_default()])?;
    }
    w.flush()?;
    if let Some(m) = &monotonicity {
        let mut w = csv_writer(&cfg.out, "monotonicity.csv")?;
        w.write_record(["t", "phi"])?;
        for r in &m.rows {
            w.write_record([f(r.t), f(r.phi)])?;
        }
        w.flush()?;
    }
    write_vector(&cfg.out, "u", finest, Some(provenance(cfg, finest.spec())?))?;

    let results = json!({
        "fixture": fx,
        "coefficients": a.constants,
        "residuals": {
            "rows": residuals.rows.iter().map(|r| json!({"cells": r.cells, "h": r.h, "max_relative": r.max_relative, "mean_relative": r.mean_relative})).collect::<Vec<_>>(),
            "slope": residuals.slope,
            "min_function_slope": residuals.min_function_slope,
        },
        "structure": structure,
        "caccioppoli": caccioppoli,
        "caccioppoli_closed_form": caccioppoli_closed_form(&fx, cfg.params.m, cfg.params.p),
        "monotonicity": monotonicity,
    });
    Ok(Outcome { results, checks })
}

fn lattice_family(spec: &GridSpec) -> BallFamily {
    BallFamily::lattice(spec, &dyadic_radii(spec.inradius(), 2.0 * spec.h()), 0.5, CenterLattice::Corners)
}

fn morrey_norm_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let fx = fixture(cfg)?;
    let spec = grid(cfg, cfg.grid.cells)?;
    let field = scalar_of(&fx, &fx.sample(spec.clone())?, cfg.extra.field)?;
    let params = MorreyParams::new(cfg.params.p, cfg.params.lambda)?;
    let origin = vec![0.0; spec.n()];
    let centred = BallFamily::centered(&spec, &origin, &cfg.ladders.radii);
    centred.require_nonempty()?;
    let profile = morrey_profile(&field, params.p, params.lambda, &centred);
    let radii: Vec<f64> = centred.balls().iter().map(|b| b.radius).collect();
    let family = lattice_family(&spec);
    let norm = morrey_norm(&field, &params, &family)?;

    let mut checks = Vec::new();
    let exponent = if radii.len() >= 2 { Some(log_log(&radii, &profile, 2)?.slope) } else { None };
    if let (Some(e), Some(s)) = (exponent, homogeneity(&fx, cfg.extra.field)) {
        let expected = params.lambda - s * params.p;
        checks.push(Check::new(
            Some(3),
            "origin profile exponent",
            (e - expected).abs() <= 0.1,
            format!("exponent {e:.4}, expected {expected:.4}"),
        ));
    }

    let mut w = csv_writer(&cfg.out, "profile.csv")?;
    w.write_record(["radius", "profile"])?;
    for (r, v) in radii.iter().zip(&profile) {
        w.write_record([f(*r), f(*v)])?;
    }
    w.flush()?;

    let mut zorko = Vec::new();
    let mut relaxed_norm = None;
    if !cfg.ladders.eps.is_empty() {
        let mu = cfg.params.mu.ok_or_else(|| ConfigError("[ladders] eps needs [params] mu".into()))?;
        let with_mu = params.with_mu(mu)?;
        let reference = morrey_norm(&field, &with_mu.relaxed()?, &family)?.value;
        relaxed_norm = Some(reference);
        let mut w = csv_writer(&cfg.out, "zorko.csv")?;
        w.write_record(["eps", "distance", "relative"])?;
        for &eps in &cfg.ladders.eps {
            let d = zorko_distance(&field, eps, &with_mu, &family)?.value;
            w.write_record([f(eps), f(d), f(d / reference)])?;
            zorko.push(json!({"eps": eps, "distance": d, "relative": d / reference}));
        }
        w.flush()?;
        let rel: Vec<f64> = zorko.iter().map(|z| z["relative"].as_f64().unwrap_or(f64::NAN)).collect();
        let listing = rel.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(", ");
        if mu > params.lambda {
            let decreasing = rel.windows(2).all(|w| w[1] < w[0]);
            let last = rel.last().copied().unwrap_or(f64::NAN);
            checks.push(Check::new(Some(6), "mollified distance decreases", decreasing, format!("relative distances {listing}")));
            checks.push(Check::new(Some(6), "mollified distance below 10%", last < 0.1, format!("finest relative distance {last:.4}")));
        } else {
            let floor = rel.iter().copied().fold(f64::INFINITY, f64::min);
            checks.push(Check::new(Some(6), "mollified distance keeps a 25% floor", floor >= 0.25, format!("relative distances {listing}")));
        }
    }

    let results = json!({
        "fixture": fx,
        "field": cfg.extra.field,
        "params": params,
        "norm": norm,
        "family_size": family.len(),
        "profile": radii.iter().zip(&profile).map(|(r, v)| json!({"radius": r, "value": v})).collect::<Vec<_>>(),
        "profile_exponent": exponent,
        "relaxed_norm": relaxed_norm,
        "zorko": zorko,
    });
    Ok(Outcome { results, checks })
}

fn riesz(cfg: &ExperimentConfig) -> Result<Outcome> {
    let fx = fixture(cfg)?;
    let spec = grid(cfg, cfg.grid.cells)?;
    let field = scalar_of(&fx, &fx.sample(spec.clone())?, cfg.extra.field)?;
    let potential = riesz_potential(&field, cfg.params.alpha)?;
    let prov = provenance(cfg, &spec)?;
    write_scalar(&cfg.out, "density", &field, Some(prov.clone()))?;
    write_scalar(&cfg.out, "riesz", &potential, Some(prov))?;
    write_csv(File::create(cfg.out.join("riesz.csv"))?, &spec, 1, potential.values(), potential.mask())?;
    let live: Vec<f64> = (0..potential.len()).filter(|&i| potential.mask()[i]).map(|i| potential.get(i)).collect();
    let finite = live.iter().all(|v| v.is_finite());
    let results = json!({
        "fixture": fx,
        "alpha": cfg.params.alpha,
        "nodes": live.len(),
        "max": live.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "min": live.iter().copied().fold(f64::INFINITY, f64::min),
        "integral": potential.integral(),
    });
    Ok(Outcome { results, checks: vec![Check::new(None, "potential is finite", finite, format!("{} nodes", live.len()))] })
}

fn capacity_params(cfg: &ExperimentConfig) -> Result<MorreyParams> {
    Ok(MorreyParams::new(cfg.params.p, cfg.params.lambda)?.with_alpha(cfg.params.alpha)?)
}

fn capacity_scaling(cfg: &ExperimentConfig) -> Result<Outcome> {
    let params = capacity_params(cfg)?;
    let spec = grid(cfg, cfg.grid.cells)?;
    let fit = ball_capacity_scaling(spec, params, &cfg.ladders.radii, &cfg.solver.options())?;
    let mut w = csv_writer(&cfg.out, "capacity.csv")?;
    w.write_record(["radius", "nodes", "capacity", "iterations"])?;
    for r in &fit.rows {
        w.write_record([f(r.radius), r.nodes.to_string(), f(r.capacity), r.iterations.to_string()])?;
    }
    w.flush()?;
    let tol = if fit.logarithmic { 0.4 } else { 0.15 };
    let name = if fit.logarithmic { "log-log slope against -ln r" } else { "log-log capacity slope" };
    let check = Check::new(
        Some(1),
        name,
        (fit.slope - fit.expected).abs() <= tol,
        format!("slope {:.4}, expected {:.4} ± {tol}", fit.slope, fit.expected),
    );
    Ok(Outcome { results: json!({"params": params, "fit": fit}), checks: vec![check] })
}

/// Nodes of the axis segment of length `len` through the cell corner at the
/// origin, on the first row of nodes next to it.
fn segment_nodes(spec: &GridSpec, len: f64) -> Vec<usize> {
    let h = spec.h();
    (0..spec.len())
        .filter(|&i| {
            let x = spec.coords(i);
            x[0].abs() < 0.5 * len && x[1..].iter().all(|v| (v - 0.5 * h).abs() < 1e-9 * h)
        })
        .collect()
}

fn hausdorff(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = grid(cfg, cfg.grid.cells)?;
    let d = cfg.params.d;
    let len = cfg.extra.segment_length;
    let target = segment_nodes(&spec, len);
    let radii = dyadic_radii(spec.inradius(), 2.0 * spec.h());
    let segment = greedy_cover(&CandidatePool::dyadic(&spec, &target, &radii), d)?;
    let expected = 0.5 * len;
    let mut checks = vec![Check::new(
        Some(8),
        "segment content within 20% of L/2",
        relative_gap(segment.content_value, expected) <= 0.2,
        format!("content {:.4}, expected {expected:.4}", segment.content_value),
    )];

    let mut rng = seeded_rng(cfg.seed);
    let h = spec.h();
    let n = spec.n();
    let pool_size = cfg.extra.pool_size.clamp(2, EXACT_LIMIT);
    let mut w = csv_writer(&cfg.out, "covers.csv")?;
    w.write_record(["instance", "targets", "balls", "greedy", "exact", "ratio"])?;
    let mut worst: f64 = 0.0;
    let mut instances = Vec::new();
    for k in 0..cfg.extra.instances {
        let target = random_cluster(&spec, &mut rng);
        let pts: Vec<Vec<f64>> = target.iter().map(|&i| spec.coords(i)).collect();
        let lattice = CandidatePool::dyadic(&spec, &target, &radii);
        let mut balls: Vec<Ball> =
            lattice.balls().choose_multiple(&mut rng, (pool_size - 1).min(lattice.len())).cloned().collect();
        // one ball through every target keeps the instance coverable
        let centroid: Vec<f64> = (0..n).map(|a| pts.iter().map(|p| p[a]).sum::<f64>() / pts.len() as f64).collect();
        let reach = pts
            .iter()
            .map(|p| p.iter().zip(&centroid).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        balls.push(Ball::new(centroid, reach + h));
        let pool = CandidatePool::from_balls(&spec, &target, balls);
        let greedy = greedy_cover(&pool, d)?.content_value;
        let exact = exact_cover(&pool, d)?.content_value;
        let ratio = greedy / exact;
        worst = worst.max(ratio);
        w.write_record([k.to_string(), target.len().to_string(), pool.len().to_string(), f(greedy), f(exact), f(ratio)])?;
        instances.push(json!({"targets": target.len(), "balls": pool.len(), "greedy": greedy, "exact": exact, "ratio": ratio}));
    }
    w.flush()?;
    checks.push(Check::new(
        Some(8),
        "greedy within 1.4 of exact",
        worst <= 1.4,
        format!("worst ratio {worst:.4} over {} instances", instances.len()),
    ));
    let results = json!({
        "d": d,
        "segment": {"length": len, "nodes": target.len(), "content": segment.content_value, "balls": segment.balls.len(), "expected": expected},
        "random_pools": {"instances": instances, "worst_ratio": worst},
    });
    Ok(Outcome { results, checks })
}

/// Three to eight distinct nodes within a few cells of a random node.
fn random_cluster(spec: &GridSpec, rng: &mut impl Rng) -> Vec<usize> {
    let n = spec.n();
    let c = spec.cells();
    let spread = (c / 8).max(2);
    let anchor: Vec<usize> = (0..n).map(|_| rng.random_range(spread..c - spread)).collect();
    let count = rng.random_range(3..=8);
    let mut nodes = BTreeSet::new();
    while nodes.len() < count {
        let m: Vec<usize> = anchor.iter().map(|&a| a + rng.random_range(0..=2 * spread) - spread).collect();
        nodes.insert(spec.flat_index(&m));
    }
    nodes.into_iter().collect()
}

fn isocap_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let params = capacity_params(cfg)?;
    let spec = grid(cfg, cfg.grid.cells)?;
    let radii = &cfg.ladders.radii;
    let sets: Vec<(f64, Vec<usize>)> = radii.iter().copied().zip(ball_targets(&spec, radii)).collect();
    let family = capacity_family(&spec);
    // concentric balls: the radial basis reaches the nodal optimum
    let solver = SolverOptions {
        basis: Basis::RadialShells { center: vec![0.0; spec.n()], width: spec.h() / 2.0 },
        ..cfg.solver.options()
    };
    let report = isocapacitary_check(spec, params, cfg.params.d, cfg.params.q, &sets, &family, &solver, cfg.extra.spread_bound)?;
    let mut w = csv_writer(&cfg.out, "isocap.csv")?;
    w.write_record(["radius", "nodes", "content", "capacity", "capacity_power", "ratio"])?;
    for r in &report.rows {
        w.write_record([f(r.label), r.nodes.to_string(), f(r.content), f(r.capacity), f(r.capacity_power), r.ratio.map(f).unwrap_or_default()])?;
    }
    w.flush()?;
    let detail = match report.ratio_spread {
        Some(s) => format!("ratio max/min {s:.4}, bound {}", cfg.extra.spread_bound),
        None => format!("decreasing {:?}, convex {:?}, vacuous {}", report.decreasing, report.convex, report.vacuous),
    };
    let check = Check::new(Some(7), "isocapacitary ratio bounded", report.passed, detail);
    Ok(Outcome { results: json!({"params": params, "d": cfg.params.d, "q": cfg.params.q, "report": report}), checks: vec![check] })
}

fn scan(cfg: &ExperimentConfig) -> Result<Outcome> {
    let fx = fixture(cfg)?;
    let fields: Vec<VectorField> =
        cfg.grid.resolutions.iter().map(|&c| Ok(fx.sample(grid(cfg, c)?)?)).collect::<Result<_>>()?;
    let finest = fields.last().ok_or_else(|| ConfigError("[grid] resolutions is empty".into()))?;
    let spec = finest.spec_arc().clone();
    let h = spec.h();
    let mut sc = ScanConfig::dyadic(&spec, cfg.ladders.levels);
    sc.p_hat = cfg.params.p;
    sc.seed = cfg.seed;
    let report = scan_singular(&fields, &sc)?;

    let dist = |x: &[f64]| fx.locus_dist2(x).map(f64::sqrt);
    let mut checks = Vec::new();
    let flagged: BTreeSet<usize> = report
        .s
        .nodes
        .iter()
        .chain(&report.t.nodes)
        .chain(report.r.iter().flat_map(|r| &r.nodes))
        .copied()
        .collect();
    let far = |i: &usize| dist(&spec.coords(*i)).is_none_or(|d| d >= 8.0 * h);
    let false_positives = flagged.iter().filter(|i| far(i)).count();
    checks.push(Check::new(Some(4), "no flags 8h away from the locus", false_positives == 0, format!("{false_positives} far flagged nodes")));

    let mut origin_increment = None;
    let mut off_locus_change = None;
    if let Some(locus_dim) = fx.locus_dimension() {
        let expected: Vec<usize> = scannable_nodes(&spec, &report.radii)
            .into_iter()
            .filter(|&i| dist(&spec.coords(i)).is_some_and(|d| d < h))
            .collect();
        checks.push(Check::new(
            Some(4),
            "oscillation set is the locus cells",
            report.s.nodes == expected,
            format!("{} flagged, {} locus cells", report.s.nodes.len(), expected.len()),
        ));
        let dim = report.s.dimension_value();
        let passed = match (dim, locus_dim) {
            (Some(v), 0) => v <= 0.1,
            (Some(v), k) => (v - k as f64).abs() <= 0.2,
            (None, _) => false,
        };
        checks.push(Check::new(Some(4), "box dimension of the oscillation set", passed, format!("dimension {dim:?}, locus {locus_dim}")));
        if let Some(cc) = &report.cross_check {
            checks.push(Check::new(
                Some(5),
                "Riesz divergence agrees with oscillation",
                cc.agree,
                format!("{} probes, {} only in S, {} only in R", cc.probes, cc.s_only.len(), cc.r_only.len()),
            ));
        }
        if matches!(fx.kind, FixtureKind::HarmonicMapSphere) && spec.n() == 3 && fields.len() >= 2 {
            let probe = riesz_divergence_scan(&fields, &[vec![0.0; 3]])?;
            let inc = probe.increment(0);
            let target = SQRT_2 * 4.0 * PI * LN_2;
            origin_increment = Some(json!({"values": probe.row(0), "increments": probe.increments(0), "increment": inc, "expected": target}));
            checks.push(Check::new(
                Some(5),
                "origin increment per halving",
                relative_gap(inc, target) <= 0.15,
                format!("increment {inc:.4}, expected {target:.4}"),
            ));
        }
        let changes: Vec<f64> = report
            .riesz
            .iter()
            .filter(|r| dist(&r.coords).is_some_and(|d| d >= 8.0 * h) && r.values.len() >= 2)
            .map(|r| {
                let v = &r.values;
                relative_gap(v[v.len() - 2], v[v.len() - 1])
            })
            .collect();
        if !changes.is_empty() {
            let worst = changes.iter().copied().fold(0.0, f64::max);
            off_locus_change = Some(worst);
            checks.push(Check::new(
                Some(5),
                "off-locus potentials stable within 1%",
                worst <= 0.01,
                format!("worst finest-pair change {worst:.4} over {} probes", changes.len()),
            ));
        }
    } else {
        let total = report.s.nodes.len() + report.t.nodes.len() + report.r.as_ref().map_or(0, |r| r.nodes.len());
        checks.push(Check::new(Some(4), "smooth fixture has empty sets", total == 0, format!("{total} flagged nodes")));
    }

    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(cfg.out.join("singular_report.json"), text)?;
    let axes = ["x", "y", "z", "w"];
    let n = spec.n();
    let mut w = csv_writer(&cfg.out, "sets.csv")?;
    let mut header = vec!["set".to_string(), "node".to_string()];
    header.extend(axes[..n].iter().map(|a| a.to_string()));
    w.write_record(&header)?;
    let sets = [("S", Some(&report.s)), ("T", Some(&report.t)), ("R", report.r.as_ref())];
    for (name, set) in sets {
        for (node, x) in set.iter().flat_map(|s| s.nodes.iter().zip(&s.coords)) {
            let mut rec = vec![name.to_string(), node.to_string()];
            rec.extend(x.iter().map(|v| f(*v)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    let r_nodes: BTreeSet<usize> = report.r.iter().flat_map(|r| r.nodes.iter().copied()).collect();
    let mut w = csv_writer(&cfg.out, "riesz_probes.csv")?;
    let mut header = vec!["node".to_string()];
    header.extend(axes[..n].iter().map(|a| a.to_string()));
    header.extend(report.riesz_h.iter().map(|h| format!("h={h}")));
    header.extend(["increment", "relative_increment", "persistence", "divergent"].map(String::from));
    w.write_record(&header)?;
    for r in &report.riesz {
        let mut rec = vec![r.node.to_string()];
        rec.extend(r.coords.iter().map(|v| f(*v)));
        rec.extend(r.values.iter().map(|v| f(*v)));
        rec.extend([f(r.increment), f(r.relative_increment), r.persistence.map(f).unwrap_or_default()]);
        rec.push(r_nodes.contains(&r.node).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;

    let results = json!({
        "fixture": fx,
        "locus": fx.locus(),
        "resolutions": cfg.grid.resolutions,
        "h": h,
        "radii": report.radii,
        "scanned_nodes": report.scanned_nodes,
        "s": {"nodes": report.s.nodes.len(), "dimension": report.s.dimension_value()},
        "t": {"nodes": report.t.nodes.len(), "dimension": report.t.dimension_value()},
        "r": report.r.as_ref().map(|r| json!({"nodes": r.nodes.len(), "dimension": r.dimension_value()})),
        "cross_check": report.cross_check,
        "origin_probe": origin_increment,
        "off_locus_change": off_locus_change,
    });
    Ok(Outcome { results, checks })
}

/// Gaussian of width `sigma` times the smooth cutoff `exp(1 − 1/(1 − |x|²/R²))`.
fn cut_gaussian(spec: Arc<GridSpec>, sigma: f64, cutoff: f64) -> Result<ScalarField> {
    Ok(sample_field(spec, move |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let t2 = r2 / (cutoff * cutoff);
        if t2 >= 1.0 {
            0.0
        } else {
            (-r2 / (2.0 * sigma * sigma)).exp() * (1.0 - 1.0 / (1.0 - t2)).exp()
        }
    })?)
}

fn reconstruct(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = grid(cfg, cfg.grid.cells)?;
    let n = spec.n();
    let h = cut_gaussian(spec.clone(), cfg.extra.sigma, cfg.extra.cutoff)?;
    let rec = representation_reconstruct(&h, cfg.extra.order)?;
    let expected = match cfg.extra.order {
        2 => 1.0 / ((n as f64 - 2.0) * sphere_area(n)),
        _ => 1.0 / sphere_area(n),
    };
    let s = &rec.summary;
    let constant = s.constant.unwrap_or(f64::NAN);
    let error = s.relative_l2_error.unwrap_or(f64::NAN);
    let checks = vec![
        Check::new(
            Some(9),
            "reconstruction constant within 3%",
            relative_gap(constant, expected) <= 0.03,
            format!("constant {constant:.6}, expected {expected:.6}"),
        ),
        Check::new(Some(9), "reconstruction L2 error at most 2%", error <= 0.02, format!("relative L2 error {error:.4}")),
    ];
    let prov = provenance(cfg, &spec)?;
    write_scalar(&cfg.out, "h", &h, Some(prov.clone()))?;
    write_scalar(&cfg.out, "reconstruction", &rec.field, Some(prov))?;
    let mut w = csv_writer(&cfg.out, "axis_profile.csv")?;
    w.write_record(["x", "h", "reconstruction"])?;
    for i in segment_nodes(&spec, f64::INFINITY) {
        w.write_record([f(spec.coords(i)[0]), f(h.get(i)), f(rec.field.get(i))])?;
    }
    w.flush()?;
    let results = json!({"sigma": cfg.extra.sigma, "cutoff": cfg.extra.cutoff, "summary": rec.summary, "expected_constant": expected});
    Ok(Outcome { results, checks })
}

fn report(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut dirs: Vec<_> = std::fs::read_dir(&cfg.out)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.join("summary.json").is_file())
        .collect();
    dirs.sort();
    let mut runs = Vec::new();
    let mut checks = Vec::new();
    for dir in dirs {
        let label = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json"))?)?;
        let passed = summary["passed"].as_bool().unwrap_or(false);
        let failed: Vec<String> = summary["checks"]
            .as_array()
            .into_iter()
            .flatten()
            .filter(|c| c["passed"] == Value::Bool(false))
            .filter_map(|c| c["name"].as_str().map(String::from))
            .collect();
        checks.push(Check::new(None, format!("{label}: all checks pass"), passed, failed.join("; ")));
        runs.push(json!({"run": label, "command": summary["command"], "passed": passed, "checks": summary["checks"]}));
    }
    let all = checks.iter().all(|c| c.passed);
    let mut text = serde_json::to_string_pretty(&json!({"runs": runs, "passed": all}))?;
    text.push('\n');
    std::fs::write(cfg.out.join("report.json"), text)?;
    Ok(Outcome { results: json!({"runs": runs.len()}), checks })
}
