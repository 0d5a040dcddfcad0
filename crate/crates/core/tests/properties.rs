use std::sync::Arc;

use proptest::prelude::*;

use morrey_core::analysis::{
    dyadic_radii, maximal_function, mollify, morrey_norm, riesz_potential, BallFamily, CenterLattice, MorreyParams,
};
use morrey_core::capacity::{exact_cover, morrey_capacity, nodes_in_ball, CandidatePool, CapacityProblem, SolverOptions};
use morrey_core::grid::{ball_average, sample_field, sample_vector_field, Ball};
use morrey_core::singular::oscillation_scan;
use morrey_core::{GridSpec, ScalarField};

fn cube(n: usize, cells: usize) -> Arc<GridSpec> {
    Arc::new(GridSpec::cube(n, 1.0, cells).unwrap())
}

fn wavy(spec: Arc<GridSpec>, k: f64) -> ScalarField {
    sample_field(spec, move |x| (k * x[0]).sin() + x[1] * x[1] - 0.5 * x[0] * x[1] + 0.3).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn ball_average_is_homogeneous(s in -4.0f64..4.0, p in 1.0f64..3.0, cx in -0.3f64..0.3, r in 0.3f64..0.6) {
        let f = wavy(cube(3, 16), 2.0);
        let ball = Ball::new(vec![cx, 0.1, -0.1], r);
        let base = ball_average(&f, &ball, p).unwrap();
        let scaled = ball_average(&f.scale(s), &ball, p).unwrap();
        prop_assert!(close(scaled, s.abs().powf(p) * base, 1e-12));
    }

    #[test]
    fn riesz_potential_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, alpha in 0.5f64..2.5) {
        let spec = cube(3, 8);
        let f = wavy(spec.clone(), 3.0);
        let g = sample_field(spec, |x| (x[2] - x[0]).exp()).unwrap();
        let combo = f.zip_with(&g, |u, v| a * u + b * v).unwrap();
        let lhs = riesz_potential(&combo, alpha).unwrap();
        let (pf, pg) = (riesz_potential(&f, alpha).unwrap(), riesz_potential(&g, alpha).unwrap());
        let scale = pf.max_abs() + pg.max_abs();
        for i in 0..lhs.len() {
            let rhs = a * pf.get(i) + b * pg.get(i);
            prop_assert!((lhs.get(i) - rhs).abs() <= 1e-12 * scale * (a.abs() + b.abs() + 1.0));
        }
    }

    #[test]
    fn mollification_respects_the_max_norm(k in 1.0f64..8.0, eps in 0.2f64..0.6) {
        let f = wavy(cube(2, 32), k);
        let fe = mollify(&f, eps).unwrap();
        prop_assert!(fe.max_abs() <= f.max_abs() * (1.0 + 1e-12));
    }

    #[test]
    fn morrey_norm_decreases_in_lambda(l1 in 0.1f64..2.9, gap in 0.0f64..1.0, p in 1.1f64..3.0) {
        let spec = cube(3, 16);
        let f = sample_field(spec.clone(), |x| 1.0 / (0.05 + x.iter().map(|v| v * v).sum::<f64>())).unwrap();
        let family = BallFamily::lattice(&spec, &dyadic_radii(spec.inradius(), 2.0 * spec.h()), 0.5, CenterLattice::Corners);
        let l2 = (l1 + gap).min(3.0);
        let n1 = morrey_norm(&f, &MorreyParams::new(p, l1).unwrap(), &family).unwrap().value;
        let n2 = morrey_norm(&f, &MorreyParams::new(p, l2).unwrap(), &family).unwrap().value;
        prop_assert!(n1 >= n2 * (1.0 - 1e-12));
    }

    #[test]
    fn content_is_monotone_and_subadditive(
        picks in proptest::collection::vec(0usize..64, 2..8),
        split in 1usize..7,
        d in 0.5f64..2.0,
    ) {
        let spec = cube(2, 8);
        let mut all: Vec<usize> = picks.clone();
        all.sort_unstable();
        all.dedup();
        let split = split.min(all.len().saturating_sub(1)).max(1);
        let (e1, e2) = all.split_at(split);
        let balls: Vec<Ball> = (0..11)
            .map(|k| Ball::new(spec.coords((k * 37) % 64), 0.3 + 0.1 * (k % 4) as f64))
            .chain([Ball::centered(2, 1.5)])
            .collect();
        let content = |t: &[usize]| exact_cover(&CandidatePool::from_balls(&spec, t, balls.clone()), d).unwrap().content_value;
        let (c1, c2, c12) = (content(e1), content(e2), content(&all));
        prop_assert!(c1 <= c12 * (1.0 + 1e-12) && c2 <= c12 * (1.0 + 1e-12));
        prop_assert!(c12 <= (c1 + c2) * (1.0 + 1e-12));
    }

    #[test]
    fn oscillation_ignores_constant_offsets(c0 in -5.0f64..5.0, c1 in -5.0f64..5.0, c2 in -5.0f64..5.0) {
        let spec = cube(3, 16);
        let u = sample_vector_field(spec.clone(), 3, |x, out| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            for k in 0..3 {
                out[k] = x[k] / r;
            }
        })
        .unwrap();
        let radii = [2.0 * spec.h(), 4.0 * spec.h()];
        let a = oscillation_scan(&u, 2.0, &radii).unwrap();
        let b = oscillation_scan(&u.offset(&[c0, c1, c2]), 2.0, &radii).unwrap();
        prop_assert_eq!(&a.nodes, &b.nodes);
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + c0.abs() + c1.abs() + c2.abs()).powi(2));
        }
    }
}

#[test]
fn capacity_grows_with_the_set() {
    let spec = cube(3, 12);
    let family = BallFamily::lattice(&spec, &dyadic_radii(spec.inradius(), 2.0 * spec.h()), 0.5, CenterLattice::Corners);
    let params = MorreyParams::new(2.0, 2.5).unwrap().with_alpha(1.0).unwrap();
    let solver = SolverOptions { max_iterations: 3000, ..SolverOptions::default() };
    let cap = |r: f64| {
        morrey_capacity(&CapacityProblem {
            spec: spec.clone(),
            target: nodes_in_ball(&spec, &[0.0; 3], r),
            params,
            family: family.clone(),
            solver: solver.clone(),
        })
        .unwrap()
        .value
    };
    let values: Vec<f64> = [0.2, 0.35, 0.5].into_iter().map(cap).collect();
    for w in values.windows(2) {
        assert!(w[0] <= w[1] * 1.05, "{values:?}");
    }
}

#[test]
fn maximal_riesz_domination_has_one_constant() {
    // M(I₁|f|) ≤ C·I₁(M|f|) nodewise; C from the first fixture bounds the rest
    let ratio = |f: &ScalarField| {
        let spec = f.spec();
        let radii = dyadic_radii(0.5, 2.0 * spec.h());
        let lhs = maximal_function(&riesz_potential(&f.map(f64::abs), 1.0).unwrap(), &radii).unwrap();
        let rhs = riesz_potential(&maximal_function(&f.map(f64::abs), &radii).unwrap(), 1.0).unwrap();
        (0..f.len()).filter(|&i| rhs.get(i) > 0.0).map(|i| lhs.get(i) / rhs.get(i)).fold(0.0, f64::max)
    };
    let indicator = |cells| sample_field(cube(3, cells), |x| if x.iter().map(|v| v * v).sum::<f64>() < 0.09 { 1.0 } else { 0.0 }).unwrap();
    let c = ratio(&indicator(12));
    assert!(c.is_finite() && c > 0.0);
    let others = [
        indicator(16),
        sample_field(cube(3, 16), |x| 1.0 / x.iter().map(|v| v * v).sum::<f64>().sqrt()).unwrap(),
        sample_field(cube(3, 16), |x| (-8.0 * x.iter().map(|v| v * v).sum::<f64>()).exp()).unwrap(),
        wavy(cube(3, 16), 4.0),
    ];
    for f in &others {
        let r = ratio(f);
        assert!(r <= c * 1.25, "ratio {r} against calibrated {c}");
    }
}

#[test]
fn oscillation_scan_is_translation_equivariant() {
    let spec = cube(3, 16);
    let h = spec.h();
    let shift = [2.0 * h, -h, 0.0];
    let hedgehog = |c: [f64; 3]| {
        sample_vector_field(spec.clone(), 3, move |x, out| {
            let y = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
            let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            for k in 0..3 {
                out[k] = y[k] / r;
            }
        })
        .unwrap()
    };
    let radii = [2.0 * h, 4.0 * h];
    let a = oscillation_scan(&hedgehog([0.0; 3]), 2.0, &radii).unwrap();
    let b = oscillation_scan(&hedgehog(shift), 2.0, &radii).unwrap();
    let offset: Vec<i64> = shift.iter().map(|s| (s / h).round() as i64).collect();
    let mut matched = 0;
    for (k, &i) in a.nodes.iter().enumerate() {
        let m = spec.multi_index(i);
        let moved: Vec<i64> = (0..3).map(|ax| m[ax] as i64 + offset[ax]).collect();
        if moved.iter().any(|&v| v < 0 || v >= 16) {
            continue;
        }
        let j = spec.flat_index(&moved.iter().map(|&v| v as usize).collect::<Vec<_>>());
        if let Ok(pos) = b.nodes.binary_search(&j) {
            for (x, y) in a.row(k).iter().zip(b.row(pos)) {
                assert!((x - y).abs() <= 1e-12, "node {i}");
            }
            matched += 1;
        }
    }
    assert!(matched > a.nodes.len() / 4, "{matched} of {}", a.nodes.len());
}
