//! Certified search for Littlewood-type witnesses: small nonzero norm products
//! on unimodular grids, driven by diagonal orbits.

pub mod linalg;
pub mod scalar;
pub mod grid;
pub mod matrix;
pub mod root_action;
pub mod compact_orbit;
pub mod baker;
pub mod recurrence;
pub mod search;
