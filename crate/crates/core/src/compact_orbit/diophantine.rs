use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::OrbitError;
use crate::grid::Lattice;
use crate::linalg::sup_norm_cvp;
use crate::matrix::{vec_sub, vec_sup_norm, RVector};
use crate::scalar::RealScalar;

/// Which regime a shift falls in, by its first small approximation `|q w - z| < c q^(1-k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiophantineCase {
    /// No violation for `2 <= q <= q_max`.
    Diophantine,
    /// First violation at `q <= l`.
    NearSmallTorsion,
    /// First violation at `q > l`.
    NearLargeTorsion,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiophantineVerdict {
    pub case: DiophantineCase,
    /// `(q, lattice coordinates of z, |q w - z|_inf)` for the first violation.
    pub violation: Option<(u64, Vec<i64>, f64)>,
    /// Values of `q` where the comparison was undecided and counted as a violation.
    pub undecided: Vec<u64>,
}

/// Scan `2 <= q <= q_max` for `|q w - z| < c q^(1-k)` with `z` the sup-norm
/// nearest lattice point of `q w`.
pub fn diophantine_test(
    lattice: &Lattice,
    w: &[RealScalar],
    k: f64,
    c: f64,
    q_max: u64,
    l: u64,
) -> Result<DiophantineVerdict, OrbitError> {
    if q_max < 2 {
        return Err(OrbitError::Argument("q_max must be at least 2".into()));
    }
    let d = lattice.dim();
    let p = lattice.prec();
    let b = lattice.basis().to_f64();
    let wf: Vec<f64> = w.iter().map(|x| x.to_f64()).collect();
    let mut undecided = Vec::new();
    for q in 2..=q_max {
        let x = DVector::from_iterator(d, wf.iter().map(|v| v * q as f64));
        let cvp = sup_norm_cvp(&b, &x, 1_000_000).ok_or(OrbitError::Cap {
            estimated: f64::INFINITY,
            cap: 1_000_000,
        })?;
        let qw: RVector = w.iter().map(|v| v.mul_int(q as i64)).collect();
        let dist = vec_sup_norm(&vec_sub(&qw, &lattice.point(&cvp.coeffs)));
        let thr = &RealScalar::from_f64(c, p) * &RealScalar::from_int(q as i64, p).powf(&RealScalar::from_f64(1.0 - k, p));
        let violated = if dist.definitely_lt(&thr) {
            true
        } else if dist.definitely_ge(&thr) {
            false
        } else {
            undecided.push(q);
            true
        };
        if violated {
            let case = if q <= l {
                DiophantineCase::NearSmallTorsion
            } else {
                DiophantineCase::NearLargeTorsion
            };
            return Ok(DiophantineVerdict {
                case,
                violation: Some((q, cvp.coeffs, dist.to_f64())),
                undecided,
            });
        }
    }
    Ok(DiophantineVerdict {
        case: DiophantineCase::Diophantine,
        violation: None,
        undecided,
    })
}
