//! Witness searches: direct scans of the Cassels family, certification by
//! a mesh over the diagonal group, and the orbit-guided pipeline.

mod certify;
mod extreme;
mod guided;
mod phi;
mod rate;
mod scan;

use thiserror::Error;

use crate::baker::BakerError;
use crate::compact_orbit::OrbitError;
use crate::grid::GridError;
use crate::recurrence::RecurrenceError;
use crate::root_action::{RootError, RootIndex};

pub use certify::{certify_wr, verify_level, CertifiedWitness, CertifyParams, LevelCertificate};
pub use extreme::{extreme_point_functional, verify_extreme, ExtremePoint};
pub use guided::{guided_witness, CaseTag, GuidedParams, GuidedWitness, TraceStep};
pub use phi::{phi_split, PhiSplit};
pub use rate::{iterated_log, iterated_log_f64, RateFunction};
pub use scan::{direct_scan, ScanRecord, ScanResult};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("bad rate function: {0}")]
    Rate(String),
    #[error("element is not regular: root {0} has value 1")]
    NonRegular(RootIndex),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("no witness found ({stage})")]
    NoFind { stage: String, trace: Box<Vec<TraceStep>> },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Root(#[from] RootError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Baker(#[from] BakerError),
    #[error(transparent)]
    Recurrence(#[from] RecurrenceError),
}
