//! Morrey capacity by projected subgradient descent, Hausdorff content by
//! covering optimisation, box-counting dimension and the isocapacitary
//! checks.

mod boxdim;
mod cover;
mod isocap;
mod scaling;
mod solver;

pub use boxdim::{box_dimension, box_scales, BoxDimension};
pub use cover::{exact_cover, greedy_cover, hausdorff_content, CandidatePool, CoverMethod, CoverSolution, EXACT_LIMIT};
pub use isocap::{isocapacitary_check, IsocapCase, IsocapReport, IsocapRow};
pub use scaling::{ball_capacity_scaling, ball_targets, capacity_family, ScalingFit, ScalingRow};
pub use solver::{morrey_capacity, Basis, CapacityProblem, CapacityResult, SolverOptions};

use crate::grid::GridSpec;

/// Nodes strictly inside `B_r(c)`, in index order.
pub fn nodes_in_ball(spec: &GridSpec, center: &[f64], radius: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mask = spec.mask();
    crate::grid::for_each_row(spec, center, radius, |base, lo, hi| {
        out.extend((base + lo..base + hi).filter(|&i| mask[i]));
    });
    out
}
