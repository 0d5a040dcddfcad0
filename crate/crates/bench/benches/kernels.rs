use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use morrey_bench::{cube, hedgehog, inverse_distance};
use morrey_core::analysis::{dyadic_radii, mollify, morrey_norm, riesz_potential, riesz_potential_cellwise, CenterLattice};
use morrey_core::capacity::{exact_cover, greedy_cover, nodes_in_ball, CandidatePool};
use morrey_core::singular::{jacobian_norm, oscillation_scan};
use morrey_core::{BallFamily, MorreyParams};

fn riesz(c: &mut Criterion) {
    let mut g = c.benchmark_group("riesz_potential");
    g.sample_size(10);
    for cells in [12, 16, 24] {
        let f = inverse_distance(cube(3, cells));
        g.bench_with_input(BenchmarkId::from_parameter(cells), &f, |b, f| b.iter(|| riesz_potential(f, 1.0).unwrap()));
    }
    let du = jacobian_norm(&hedgehog(cube(3, 32))).unwrap();
    let probes: Vec<Vec<f64>> = (0..8).map(|k| vec![0.1 * k as f64, 0.05, -0.2]).collect();
    g.bench_function("cellwise_8_probes_32", |b| {
        b.iter(|| riesz_potential_cellwise(&du, 1.0, black_box(&probes), 2, 8).unwrap())
    });
    g.finish();
}

fn morrey(c: &mut Criterion) {
    let spec = cube(3, 32);
    let f = inverse_distance(spec.clone());
    let family = BallFamily::lattice(&spec, &dyadic_radii(spec.inradius(), 2.0 * spec.h()), 0.5, CenterLattice::Corners);
    let params = MorreyParams::new(2.0, 2.0).unwrap();
    let mut g = c.benchmark_group("morrey");
    g.sample_size(10);
    g.bench_function("norm_lattice_32", |b| b.iter(|| morrey_norm(&f, &params, &family).unwrap()));
    g.bench_function("mollify_32_eps_0.25", |b| b.iter(|| mollify(&f, 0.25).unwrap()));
    let u = hedgehog(spec.clone());
    let radii = [2.0 * spec.h(), 4.0 * spec.h(), 8.0 * spec.h()];
    g.bench_function("oscillation_scan_32", |b| b.iter(|| oscillation_scan(&u, 2.0, &radii).unwrap()));
    g.finish();
}

fn covers(c: &mut Criterion) {
    let spec = cube(3, 32);
    let target = nodes_in_ball(&spec, &[0.0; 3], 0.3);
    let pool = CandidatePool::dyadic(&spec, &target, &dyadic_radii(spec.inradius(), 2.0 * spec.h()));
    let small_target: Vec<usize> = target.iter().copied().step_by(target.len() / 6).collect();
    let small = CandidatePool::from_balls(&spec, &small_target, pool.balls().iter().step_by(pool.len() / 11).take(11).cloned().chain([morrey_core::Ball::centered(3, 0.35)]).collect());
    let mut g = c.benchmark_group("cover");
    g.bench_function("greedy_ball_0.3", |b| b.iter(|| greedy_cover(&pool, 1.0).unwrap()));
    g.bench_function("exact_12_balls", |b| b.iter(|| exact_cover(&small, 1.0).unwrap()));
    g.finish();
}

criterion_group!(benches, riesz, morrey, covers);
criterion_main!(benches);
