use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{for_each_row, Ball, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMethod {
    Greedy,
    Exact,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverSolution {
    pub balls: Vec<Ball>,
    /// `Σ r_j^d`.
    pub content_value: f64,
    pub method: CoverMethod,
}

/// Candidate balls together with the target nodes each one contains.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    balls: Vec<Ball>,
    /// Positions into `target` covered by each ball.
    covers: Vec<Vec<usize>>,
    target: Vec<usize>,
}

impl CandidatePool {
    pub fn from_balls(spec: &GridSpec, target: &[usize], balls: Vec<Ball>) -> Self {
        let mut slot = vec![usize::MAX; spec.len()];
        for (k, &i) in target.iter().enumerate() {
            slot[i] = k;
        }
        let covers = balls
            .iter()
            .map(|b| {
                let mut c = Vec::new();
                for_each_row(spec, &b.center, b.radius, |base, lo, hi| {
                    c.extend(slot[base + lo..base + hi].iter().copied().filter(|&k| k != usize::MAX));
                });
                c.sort_unstable();
                c
            })
            .collect();
        CandidatePool { balls, covers, target: target.to_vec() }
    }

    /// Balls of the given radii centred at grid nodes, node stride
    /// `max(1, round(r/(2h)))` per axis, keeping only balls that meet the
    /// target.
    pub fn dyadic(spec: &GridSpec, target: &[usize], radii: &[f64]) -> Self {
        let n = spec.n();
        let c = spec.cells();
        let h = spec.h();
        let mut balls = Vec::new();
        if !target.is_empty() {
            let mut lo = [usize::MAX; 4];
            let mut hi = [0usize; 4];
            for &i in target {
                let m = spec.multi_index(i);
                for a in 0..n {
                    lo[a] = lo[a].min(m[a]);
                    hi[a] = hi[a].max(m[a]);
                }
            }
            for &r in radii {
                let stride = ((r / (2.0 * h)).round() as usize).max(1);
                let reach = (r / h).ceil() as usize;
                let ranges: Vec<(usize, usize)> =
                    (0..n).map(|a| (lo[a].saturating_sub(reach), (hi[a] + reach).min(c - 1))).collect();
                // lattice anchored at index 0 so pools for nested targets nest
                let axis: Vec<Vec<usize>> = ranges
                    .iter()
                    .map(|&(a, b)| (a.div_ceil(stride) * stride..=b).step_by(stride).collect())
                    .collect();
                let mut idx = vec![0usize; n];
                'outer: loop {
                    let multi: Vec<usize> = (0..n).map(|a| axis[a][idx[a]]).collect();
                    balls.push(Ball::new(spec.coords(spec.flat_index(&multi)), r));
                    for a in (0..n).rev() {
                        idx[a] += 1;
                        if idx[a] < axis[a].len() {
                            continue 'outer;
                        }
                        idx[a] = 0;
                    }
                    break;
                }
            }
        }
        let mut pool = Self::from_balls(spec, target, balls);
        pool.retain_useful();
        pool
    }

    fn retain_useful(&mut self) {
        let keep: Vec<bool> = self.covers.iter().map(|c| !c.is_empty()).collect();
        let mut k = keep.iter();
        self.balls.retain(|_| *k.next().unwrap());
        self.covers.retain(|c| !c.is_empty());
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn target(&self) -> &[usize] {
        &self.target
    }

    /// Target nodes no candidate contains.
    pub fn uncovered(&self) -> usize {
        let mut hit = vec![false; self.target.len()];
        for c in &self.covers {
            for &k in c {
                hit[k] = true;
            }
        }
        hit.iter().filter(|v| !**v).count()
    }

    fn cost(&self, j: usize, d: f64) -> f64 {
        self.balls[j].radius.powf(d)
    }

    fn solution(&self, chosen: &[usize], d: f64, method: CoverMethod) -> CoverSolution {
        let mut chosen = chosen.to_vec();
        chosen.sort_unstable();
        CoverSolution {
            balls: chosen.iter().map(|&j| self.balls[j].clone()).collect(),
            content_value: chosen.iter().map(|&j| self.cost(j, d)).sum(),
            method,
        }
    }
}

struct Entry {
    ratio: f64,
    index: usize,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    // larger ratio first, then lower index
    fn cmp(&self, o: &Self) -> Ordering {
        self.ratio.total_cmp(&o.ratio).then(o.index.cmp(&self.index))
    }
}

fn check_coverable(pool: &CandidatePool) -> Result<()> {
    match pool.uncovered() {
        0 => Ok(()),
        k => Err(Error::Uncoverable(k)),
    }
}

/// Lazy greedy weighted set cover on newly covered nodes per `r^d`, then
/// removal of redundant balls, most expensive first.
pub fn greedy_cover(pool: &CandidatePool, d: f64) -> Result<CoverSolution> {
    check_coverable(pool)?;
    let mut covered = vec![false; pool.target.len()];
    let mut left = pool.target.len();
    let mut heap: BinaryHeap<Entry> = (0..pool.len())
        .map(|j| Entry { ratio: pool.covers[j].len() as f64 / pool.cost(j, d), index: j })
        .collect();
    let mut chosen = Vec::new();
    while left > 0 {
        let Some(top) = heap.pop() else { break };
        let gain = pool.covers[top.index].iter().filter(|&&k| !covered[k]).count();
        if gain == 0 {
            continue;
        }
        let ratio = gain as f64 / pool.cost(top.index, d);
        if heap.peek().is_some_and(|next| Entry { ratio, index: top.index } < *next) {
            heap.push(Entry { ratio, index: top.index });
            continue;
        }
        for &k in &pool.covers[top.index] {
            if !covered[k] {
                covered[k] = true;
                left -= 1;
            }
        }
        chosen.push(top.index);
    }
    // prune
    let mut mult = vec![0usize; pool.target.len()];
    for &j in &chosen {
        for &k in &pool.covers[j] {
            mult[k] += 1;
        }
    }
    let mut order = chosen.clone();
    order.sort_by(|&a, &b| pool.cost(b, d).total_cmp(&pool.cost(a, d)).then(a.cmp(&b)));
    let mut keep: Vec<usize> = Vec::new();
    for j in order {
        if pool.covers[j].iter().all(|&k| mult[k] > 1) {
            for &k in &pool.covers[j] {
                mult[k] -= 1;
            }
        } else {
            keep.push(j);
        }
    }
    Ok(pool.solution(&keep, d, CoverMethod::Greedy))
}

/// Largest pool `exact_cover` accepts.
pub const EXACT_LIMIT: usize = 12;

/// Minimum-cost cover by depth-first branch-and-bound: branch on the balls
/// containing the first uncovered node, prune on accumulated cost.
pub fn exact_cover(pool: &CandidatePool, d: f64) -> Result<CoverSolution> {
    if pool.len() > EXACT_LIMIT {
        return Err(Error::Parameter(format!("exact cover limited to {EXACT_LIMIT} balls, pool has {}", pool.len())));
    }
    check_coverable(pool)?;
    let t = pool.target.len();
    let containing: Vec<Vec<usize>> = {
        let mut v = vec![Vec::new(); t];
        for (j, c) in pool.covers.iter().enumerate() {
            for &k in c {
                v[k].push(j);
            }
        }
        v
    };
    struct Search<'a> {
        pool: &'a CandidatePool,
        containing: &'a [Vec<usize>],
        d: f64,
        best: f64,
        best_set: Vec<usize>,
    }
    impl Search<'_> {
        fn go(&mut self, count: &mut [usize], chosen: &mut Vec<usize>, cost: f64) {
            if cost >= self.best {
                return;
            }
            let Some(k) = count.iter().position(|&c| c == 0) else {
                self.best = cost;
                self.best_set = chosen.clone();
                return;
            };
            for &j in &self.containing[k] {
                if chosen.contains(&j) {
                    continue;
                }
                for &m in &self.pool.covers[j] {
                    count[m] += 1;
                }
                chosen.push(j);
                self.go(count, chosen, cost + self.pool.cost(j, self.d));
                chosen.pop();
                for &m in &self.pool.covers[j] {
                    count[m] -= 1;
                }
            }
        }
    }
    let mut s = Search { pool, containing: &containing, d, best: f64::INFINITY, best_set: Vec::new() };
    s.go(&mut vec![0; t], &mut Vec::new(), 0.0);
    if t == 0 {
        s.best_set.clear();
    }
    Ok(pool.solution(&s.best_set, d, CoverMethod::Exact))
}

/// `Λ_d^(∞)` of the pool's target: greedy, plus the exact optimum when the
/// pool is small enough; the cheaper cover is returned.
pub fn hausdorff_content(pool: &CandidatePool, d: f64) -> Result<CoverSolution> {
    if !(d > 0.0) {
        return Err(Error::Parameter(format!("content dimension {d} must be positive")));
    }
    if pool.target.is_empty() {
        return Ok(CoverSolution { balls: Vec::new(), content_value: 0.0, method: CoverMethod::Greedy });
    }
    let greedy = greedy_cover(pool, d)?;
    if pool.len() <= EXACT_LIMIT {
        let exact = exact_cover(pool, d)?;
        if exact.content_value <= greedy.content_value {
            return Ok(exact);
        }
    }
    Ok(greedy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::dyadic_radii;

    fn segment(spec: &GridSpec, len: f64) -> Vec<usize> {
        (0..spec.len())
            .filter(|&i| {
                let x = spec.point(i);
                x[0].abs() < len / 2.0 && x[1] == spec.coord(1, spec.cells() / 2) && x[2] == spec.coord(2, spec.cells() / 2)
            })
            .collect()
    }

    #[test]
    fn every_solution_covers_the_target() {
        let spec = GridSpec::cube(3, 1.0, 16).unwrap();
        let target = segment(&spec, 1.0);
        let pool = CandidatePool::dyadic(&spec, &target, &dyadic_radii(0.5, 2.0 * spec.h()));
        let sol = greedy_cover(&pool, 1.0).unwrap();
        for &i in &target {
            assert!(sol.balls.iter().any(|b| b.contains(&spec.coords(i))));
        }
    }

    #[test]
    fn single_node_costs_one_small_ball() {
        let spec = GridSpec::cube(3, 1.0, 16).unwrap();
        let target = vec![spec.node_containing(&[0.01, 0.01, 0.01]).unwrap()];
        let pool = CandidatePool::dyadic(&spec, &target, &[2.0 * spec.h(), 0.5]);
        let sol = hausdorff_content(&pool, 1.0).unwrap();
        assert!(sol.content_value <= 2.0 * spec.h() + 1e-12);
    }

    #[test]
    fn uncoverable_and_empty() {
        let spec = GridSpec::cube(2, 1.0, 8).unwrap();
        let pool = CandidatePool::from_balls(&spec, &[0, 63], vec![Ball::new(spec.coords(0), 0.3)]);
        assert!(matches!(hausdorff_content(&pool, 1.0), Err(Error::Uncoverable(1))));
        let empty = CandidatePool::from_balls(&spec, &[], vec![]);
        assert_eq!(hausdorff_content(&empty, 1.0).unwrap().content_value, 0.0);
    }

    #[test]
    fn exact_matches_enumeration() {
        let spec = GridSpec::cube(2, 1.0, 8).unwrap();
        let target: Vec<usize> = (0..spec.len()).filter(|i| i % 3 == 0).collect();
        let balls: Vec<Ball> = (0..10)
            .map(|k| Ball::new(vec![-0.8 + 0.18 * k as f64, 0.7 - 0.15 * k as f64], 0.3 + 0.12 * (k % 4) as f64))
            .chain([Ball::new(vec![0.0, 0.0], 1.5)])
            .collect();
        let pool = CandidatePool::from_balls(&spec, &target, balls);
        let d = 1.5;
        let exact = exact_cover(&pool, d).unwrap();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << pool.len()) {
            let chosen: Vec<usize> = (0..pool.len()).filter(|j| mask >> j & 1 == 1).collect();
            let mut hit = vec![false; target.len()];
            for &j in &chosen {
                for &k in &pool.covers[j] {
                    hit[k] = true;
                }
            }
            if hit.iter().all(|v| *v) {
                best = best.min(chosen.iter().map(|&j| pool.cost(j, d)).sum());
            }
        }
        assert!((exact.content_value - best).abs() < 1e-12);
        assert!(greedy_cover(&pool, d).unwrap().content_value >= best - 1e-12);
    }
}
