//! Small numerical helpers shared across modules.

use rayon::prelude::*;

/// Block length for deterministic parallel reductions.
const BLOCK: usize = 4096;

/// Sum with a fixed reduction tree: sequential sums over fixed-size blocks,
/// then a pairwise tree over the block sums. The result depends only on the
/// input, never on the number of worker threads.
pub fn det_sum(values: &[f64]) -> f64 {
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let partial: Vec<f64> = values.par_chunks(BLOCK).map(|c| c.iter().sum()).collect();
    pairwise(&partial)
}

/// Deterministic sum of `f(i)` over `0..len`.
pub fn det_sum_by<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let blocks = len.div_ceil(BLOCK);
    let partial: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(len);
            (lo..hi).map(&f).sum()
        })
        .collect();
    pairwise(&partial)
}

fn pairwise(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        len => {
            let mid = len / 2;
            pairwise(&v[..mid]) + pairwise(&v[mid..])
        }
    }
}

/// Seeded generator used for every random battery, so results depend only
/// on the seed.
pub fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform random direction in ℝᵈ.
pub fn random_direction<R: rand::Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Γ(k/2) for positive integers k, by the half-integer recurrence.
pub fn gamma_half(k: usize) -> f64 {
    assert!(k > 0, "gamma_half requires k >= 1");
    let (mut value, mut x) = if k % 2 == 0 {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    let target = k as f64 / 2.0;
    while x + 0.5 < target {
        value *= x;
        x += 1.0;
    }
    value
}

/// Surface area ω_{n-1} = 2π^{n/2}/Γ(n/2) of the unit sphere in ℝⁿ.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / gamma_half(n)
}

/// Volume of the unit ball in ℝⁿ.
pub fn unit_ball_volume(n: usize) -> f64 {
    sphere_area(n) / n as f64
}

/// Volume of a ball of radius `r` in ℝⁿ.
pub fn ball_volume(n: usize, r: f64) -> f64 {
    unit_ball_volume(n) * r.powi(n as i32)
}

/// `r2^(e/2)`, i.e. `|x|^e` given `|x|²`, with fast paths for integer `e`.
#[inline]
pub fn pow_from_sq(r2: f64, e: f64) -> f64 {
    let ei = e.round();
    if (e - ei).abs() < 1e-12 {
        let ei = ei as i32;
        if ei % 2 == 0 {
            r2.powi(ei / 2)
        } else {
            r2.sqrt().powi(ei)
        }
    } else {
        r2.powf(0.5 * e)
    }
}

/// The standard smooth bump `exp(-1/(1-t²))` on `|t| < 1`, zero outside.
#[inline]
pub fn bump(t2: f64) -> f64 {
    if t2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t2)).exp()
    }
}

/// Derivative of `bump` with respect to `t`, given `t`.
#[inline]
pub fn bump_dt(t: f64) -> f64 {
    let t2 = t * t;
    if t2 >= 1.0 {
        0.0
    } else {
        let s = 1.0 - t2;
        -2.0 * t / (s * s) * (-1.0 / s).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-13);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn det_sum_matches_naive_and_is_stable() {
        let v: Vec<f64> = (0..100_000).map(|i| ((i * 7919) % 1000) as f64 * 1e-3).collect();
        let naive: f64 = v.iter().sum();
        let d = det_sum(&v);
        assert!((d - naive).abs() < 1e-8 * naive.abs());
        let d2 = det_sum_by(v.len(), |i| v[i]);
        assert_eq!(d.to_bits(), d2.to_bits());
    }

    #[test]
    fn fast_powers_agree_with_powf() {
        for &e in &[-3.0, -2.0, -1.0, 1.0, 2.0, -1.5, 0.5] {
            let r2: f64 = 0.37;
            assert!((pow_from_sq(r2, e) - r2.powf(e / 2.0)).abs() < 1e-12);
        }
    }
}
