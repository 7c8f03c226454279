use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::units::CompactOrbit;
use super::OrbitError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityProbe {
    pub q: f64,
    pub mesh: usize,
    pub orbit_size: usize,
    /// Max over the mesh of the torus distance to the orbit set.
    pub covering_estimate: f64,
}

/// Exponent vectors `e` with `|prod g_j^{e_j}| < q` in the max-entry norm.
pub(crate) fn exponents_below(orbit: &CompactOrbit, q: f64, cap: usize) -> Result<Vec<Vec<i64>>, OrbitError> {
    let stab = &orbit.stabilizer;
    let r = stab.rank();
    let d = orbit.field.degree();
    let l = q.ln();
    if l <= 0.0 {
        return Ok(vec![vec![0; r]]);
    }
    let m = DMatrix::from_fn(d, r, |i, j| stab.log_basis[j][i]);
    let pinv = m.pseudo_inverse(1e-12).map_err(|e| OrbitError::Argument(e.to_string()))?;
    // a zero-sum vector with max entry below l has sup norm below (d - 1) l
    let bound = (d - 1) as f64 * l;
    let widths: Vec<i64> = (0..r)
        .map(|j| (pinv.row(j).iter().map(|v| v.abs()).sum::<f64>() * bound).ceil() as i64)
        .collect();
    let total: f64 = widths.iter().map(|w| (2 * w + 1) as f64).product();
    if total > cap as f64 {
        return Err(OrbitError::Cap { estimated: total, cap });
    }
    let mut out = Vec::new();
    let mut e: Vec<i64> = widths.iter().map(|w| -w).collect();
    loop {
        let lg = stab.log_of(&e);
        if lg.iter().cloned().fold(f64::NEG_INFINITY, f64::max) < l {
            out.push(e.clone());
        }
        let mut k = r;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            if e[k] < widths[k] {
                e[k] += 1;
                break;
            }
            e[k] = -widths[k];
        }
    }
}

fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// `{b y mod 1}` in lattice coordinates for the stabilizer elements below `q`.
pub fn orbit_points(orbit: &CompactOrbit, y: &[f64], q: f64, cap: usize) -> Result<Vec<Vec<f64>>, OrbitError> {
    let exps = exponents_below(orbit, q, cap)?;
    Ok(exps
        .iter()
        .map(|e| {
            let m = orbit.stabilizer.action_of(&orbit.field, e);
            m.iter()
                .map(|row| {
                    // reduce integer entries mod 1 contributions exactly before mixing with floats
                    let s: f64 = row.iter().zip(y).map(|(a, b)| frac(a.to_f64() * b)).sum();
                    frac(s)
                })
                .collect()
        })
        .collect())
}

fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = (x - y).abs();
            t.min(1.0 - t)
        })
        .fold(0.0, f64::max)
}

/// Covering-radius estimate of the orbit of the shift `y` (lattice
/// coordinates) under the stabilizer elements of norm below `q`, measured on a
/// `mesh^d` grid of the coordinate torus with the wrap-around sup norm.
pub fn fiber_density_probe(orbit: &CompactOrbit, y: &[f64], q: f64, mesh: usize, cap: usize) -> Result<DensityProbe, OrbitError> {
    if q < 1.0 || mesh == 0 {
        return Err(OrbitError::Argument("need q >= 1 and mesh >= 1".into()));
    }
    let pts = orbit_points(orbit, y, q, cap)?;
    let d = y.len();
    let n = mesh.pow(d as u32);
    let est = (0..n)
        .into_par_iter()
        .map(|mut idx| {
            let mut m = vec![0.0; d];
            for c in m.iter_mut() {
                *c = (idx % mesh) as f64 / mesh as f64;
                idx /= mesh;
            }
            pts.iter().map(|p| torus_dist(&m, p)).fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max);
    Ok(DensityProbe {
        q,
        mesh,
        orbit_size: pts.len(),
        covering_estimate: est,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compact_orbit::{build_compact_point, TotallyRealField, DEFAULT_UNIT_BOUND};

    #[test]
    fn single_point_radius() {
        let orbit = build_compact_point(&TotallyRealField::conductor7(), 128, DEFAULT_UNIT_BOUND).unwrap();
        let p = fiber_density_probe(&orbit, &[0.0, 0.0, 0.0], 100.0, 10, 1_000_000).unwrap();
        assert_eq!(p.covering_estimate, 0.5);
        let p = fiber_density_probe(&orbit, &[0.3, 0.1, 0.7], 1.0, 10, 1_000_000).unwrap();
        assert_eq!(p.orbit_size, 1);
    }
}
