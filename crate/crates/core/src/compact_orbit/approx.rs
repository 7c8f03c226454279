use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::torsion::SubgroupB1;
use super::units::CompactOrbit;
use super::OrbitError;
use crate::linalg::{lll_columns, sup_norm_cvp};
use crate::root_action::DiagElement;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubgroupApprox {
    /// Coefficients in the basis of the subgroup's exponent lattice.
    pub coeffs: Vec<i64>,
    /// Exponents in the stabilizer generators.
    pub b_exponents: Vec<i64>,
    pub b: DiagElement,
    /// `|log a - log b|_inf`.
    pub log_dist: f64,
    /// Covering-radius bound of the log lattice of the subgroup.
    pub rho_bound: f64,
    /// `log |a b^-1|` in the max-entry norm.
    pub log_norm_ratio: f64,
}

fn columns(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows[0].len(), rows.len(), |i, j| rows[j][i])
}

/// Covering-radius bound in the sup norm: half the sum of the reduced basis norms.
pub fn covering_radius_bound(log_rows: &[Vec<f64>]) -> f64 {
    let (red, _) = lll_columns(&columns(log_rows));
    0.5 * red.column_iter().map(|c| c.amax()).sum::<f64>()
}

/// The element of the subgroup closest to `a` in log sup-norm.
pub fn approximate_in_subgroup(
    orbit: &CompactOrbit,
    a: &DiagElement,
    b1: &SubgroupB1,
    cap: usize,
) -> Result<SubgroupApprox, OrbitError> {
    let rows = b1.log_basis(orbit);
    let x = DVector::from_vec(a.log_f64());
    let cvp = sup_norm_cvp(&columns(&rows), &x, cap).ok_or(OrbitError::Cap {
        estimated: f64::INFINITY,
        cap,
    })?;
    let rho_bound = covering_radius_bound(&rows);
    let b_exponents = b1.to_b_exponents(&cvp.coeffs);
    let b = orbit.stabilizer.diag_of(&orbit.field, &b_exponents, a.prec());
    let lb = orbit.stabilizer.log_of(&b_exponents);
    let log_norm_ratio = x.iter().zip(&lb).map(|(p, q)| p - q).fold(f64::NEG_INFINITY, f64::max);
    assert!(
        cvp.dist <= rho_bound * (1.0 + 1e-12),
        "closest vector at distance {} beyond covering bound {}",
        cvp.dist,
        rho_bound
    );
    Ok(SubgroupApprox {
        coeffs: cvp.coeffs,
        b_exponents,
        b,
        log_dist: cvp.dist,
        rho_bound,
        log_norm_ratio,
    })
}

/// Exhaustive sup-norm closest vector over `|c_i| <= bound`; ties go to the
/// lexicographically smallest coefficients.
pub fn brute_force_cvp(log_rows: &[Vec<f64>], target: &[f64], bound: i64) -> (Vec<i64>, f64) {
    let n = log_rows.len();
    let d = target.len();
    let mut best: Option<(f64, Vec<i64>)> = None;
    let mut c = vec![-bound; n];
    loop {
        let mut dist = 0.0f64;
        for i in 0..d {
            let v: f64 = target[i] - (0..n).map(|j| c[j] as f64 * log_rows[j][i]).sum::<f64>();
            dist = dist.max(v.abs());
        }
        let better = match &best {
            None => true,
            Some((bd, bc)) => {
                let tol = 1e-12 * bd.max(1e-300);
                dist < bd - tol || ((dist - bd).abs() <= tol && c < *bc)
            }
        };
        if better {
            best = Some((dist, c.clone()));
        }
        let mut k = n;
        loop {
            if k == 0 {
                let (dist, c) = best.unwrap();
                return (c, dist);
            }
            k -= 1;
            if c[k] < bound {
                c[k] += 1;
                break;
            }
            c[k] = -bound;
        }
    }
}
