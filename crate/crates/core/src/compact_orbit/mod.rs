//! Lattices with compact diagonal orbits coming from orders in totally real
//! fields, their unit stabilizers, torsion points on the fiber torus and the
//! finite-index subgroups that fix them.

mod approx;
mod density;
mod diophantine;
mod field;
mod torsion;
mod units;

pub use approx::{approximate_in_subgroup, brute_force_cvp, covering_radius_bound, SubgroupApprox};
pub use density::{fiber_density_probe, orbit_points, DensityProbe};
pub(crate) use density::exponents_below;
pub use diophantine::{diophantine_test, DiophantineCase, DiophantineVerdict};
pub use field::{FieldElement, TotallyRealField};
pub use torsion::{q_rational_points, stab_subgroup, SubgroupB1};
pub use units::{build_compact_point, find_units, CompactOrbit, UnitStabilizer, DEFAULT_UNIT_BOUND};

use thiserror::Error;

use crate::grid::GridError;
use crate::scalar::ScalarError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OrbitError {
    #[error("polynomial is not irreducible and totally real")]
    NotTotallyReal,
    #[error("bad order basis: {0}")]
    Basis(String),
    #[error("unit search up to coordinate bound {bound} reached rank {found}, need {needed}")]
    UnitRank { found: usize, needed: usize, bound: i64 },
    #[error("shift is not {q}-rational")]
    NotRational { q: u64 },
    #[error("exponent box of {estimated} elements exceeds cap {cap}")]
    Cap { estimated: f64, cap: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error(transparent)]
    Grid(#[from] GridError),
}
