//! Numerical potential theory on uniform grids: Morrey norms, Riesz
//! potentials, Morrey and Hausdorff capacities, closed-form singular
//! solutions of elliptic systems, and singular-set detectors.
//!
//! Every operation works on cell-centred grids whose origin is a cell
//! corner, so fixtures singular at the origin (or along coordinate
//! subspaces through it) can be sampled without clipping.

pub mod analysis;
pub mod capacity;
pub mod error;
pub mod fit;
pub mod fixtures;
pub mod grid;
pub mod io;
pub mod numeric;
pub mod singular;
pub mod weak;

pub use analysis::{BallFamily, MorreyParams};
pub use capacity::{CapacityProblem, CapacityResult, CoverSolution};
pub use error::{Error, Result};
pub use fixtures::{CoefficientField, FixtureKind, FixtureSpec};
pub use grid::{Ball, DomainKind, GridSpec, MultiIndex, ScalarField, VectorField};
pub use singular::SingularReport;
