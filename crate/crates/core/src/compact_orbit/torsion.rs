use std::collections::HashMap;

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use super::units::CompactOrbit;
use super::OrbitError;
use crate::linalg::{det_integer, row_hnf, solve_rational, IntMatrix};

/// All `q^d` points `k / q` with `k in {0..q-1}^d`, in lattice coordinates,
/// lexicographic in `k`.
pub fn q_rational_points(d: usize, q: u64) -> Vec<Vec<Rational>> {
    let n = (q as usize).pow(d as u32);
    (0..n)
        .map(|mut idx| {
            let mut k = vec![0u64; d];
            for i in (0..d).rev() {
                k[i] = (idx as u64) % q;
                idx /= q as usize;
            }
            k.iter().map(|&x| Rational::from((x, q))).collect()
        })
        .collect()
}

/// `k -> M k mod q` on numerators of q-rational coordinates.
pub(crate) fn act_mod(m: &[Vec<i64>], k: &[i64], q: i64) -> Vec<i64> {
    m.iter()
        .map(|row| {
            let s: i128 = row.iter().zip(k).map(|(&a, &b)| a as i128 * b as i128).sum();
            s.rem_euclid(q as i128) as i64
        })
        .collect()
}

/// Exponent sublattice of the stabilizer generators that fix a q-rational shift.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubgroupB1 {
    /// Rows form a basis (HNF) in generator-exponent coordinates.
    pub exponent_lattice: Vec<Vec<i64>>,
    pub index: u64,
    pub q: u64,
    /// Smallest `n` with `n Z^{d-1}` inside the exponent lattice.
    pub exponent: u64,
    /// Numerators of the shift: `y = k / q`.
    pub shift_numerators: Vec<i64>,
    pub orbit_size: usize,
}

impl SubgroupB1 {
    pub fn rank(&self) -> usize {
        self.exponent_lattice.len()
    }

    /// B-exponents of `sum_i c_i row_i`.
    pub fn to_b_exponents(&self, c: &[i64]) -> Vec<i64> {
        let n = self.exponent_lattice[0].len();
        (0..n)
            .map(|j| c.iter().zip(&self.exponent_lattice).map(|(ci, r)| ci * r[j]).sum())
            .collect()
    }

    pub fn contains(&self, e: &[i64]) -> bool {
        let n = self.rank();
        let m: Vec<Vec<Rational>> = (0..n)
            .map(|j| (0..n).map(|i| Rational::from(self.exponent_lattice[i][j])).collect())
            .collect();
        let rhs: Vec<Rational> = e.iter().map(|&x| Rational::from(x)).collect();
        solve_rational(&m, &rhs).is_some_and(|c| c.iter().all(|x| *x.denom() == 1))
    }

    /// Log vectors of the basis rows.
    pub fn log_basis(&self, orbit: &CompactOrbit) -> Vec<Vec<f64>> {
        self.exponent_lattice.iter().map(|r| orbit.stabilizer.log_of(r)).collect()
    }

    pub fn full(rank: usize) -> Self {
        SubgroupB1 {
            exponent_lattice: (0..rank).map(|i| (0..rank).map(|j| (i == j) as i64).collect()).collect(),
            index: 1,
            q: 1,
            exponent: 1,
            shift_numerators: Vec::new(),
            orbit_size: 1,
        }
    }
}

/// Stabilizer of the q-rational shift `y` (lattice coordinates) inside the
/// unit stabilizer, found by walking the finite orbit of `y` and collecting
/// Schreier vectors; the index equals the orbit size.
pub fn stab_subgroup(orbit: &CompactOrbit, y: &[Rational], q: u64) -> Result<SubgroupB1, OrbitError> {
    if q == 0 {
        return Err(OrbitError::Argument("q must be positive".into()));
    }
    let d = orbit.field.degree();
    if y.len() != d {
        return Err(OrbitError::Argument(format!("shift has {} coordinates, need {d}", y.len())));
    }
    let qi = q as i64;
    let mut k0 = Vec::with_capacity(d);
    for c in y {
        let t = Rational::from(c * q);
        if *t.denom() != 1 {
            return Err(OrbitError::NotRational { q });
        }
        let n = t
            .numer()
            .to_i64()
            .ok_or_else(|| OrbitError::Argument("shift numerator out of range".into()))?;
        k0.push(n.rem_euclid(qi));
    }
    let stab = &orbit.stabilizer;
    let r = stab.rank();
    let mut seen: HashMap<Vec<i64>, Vec<i64>> = HashMap::new();
    seen.insert(k0.clone(), vec![0; r]);
    let mut queue = vec![k0.clone()];
    let mut schreier: Vec<Vec<Integer>> = Vec::new();
    let mut head = 0;
    while head < queue.len() {
        let p = queue[head].clone();
        head += 1;
        let ep = seen[&p].clone();
        for (i, m) in stab.actions.iter().enumerate() {
            let p2 = act_mod(m, &p, qi);
            let mut e = ep.clone();
            e[i] += 1;
            match seen.get(&p2) {
                Some(e2) => {
                    let v: Vec<Integer> = e.iter().zip(e2).map(|(a, b)| Integer::from(a - b)).collect();
                    if v.iter().any(|x| *x != 0) {
                        schreier.push(v);
                    }
                }
                None => {
                    seen.insert(p2.clone(), e);
                    queue.push(p2);
                }
            }
        }
    }
    let (h, _) = row_hnf(&schreier);
    let basis: IntMatrix = h.into_iter().filter(|row| row.iter().any(|x| *x != 0)).collect();
    if basis.len() != r {
        return Err(OrbitError::Basis("stabilizer lattice is not of full rank".into()));
    }
    let index = det_integer(&basis).abs();
    let orbit_size = queue.len();
    if index != orbit_size as u64 {
        return Err(OrbitError::Basis(format!(
            "index {index} disagrees with orbit size {orbit_size}"
        )));
    }
    let exponent_lattice: Vec<Vec<i64>> = basis
        .iter()
        .map(|row| row.iter().map(|x| x.to_i64().unwrap()).collect())
        .collect();
    let mut b1 = SubgroupB1 {
        exponent_lattice,
        index: orbit_size as u64,
        q,
        exponent: 0,
        shift_numerators: k0,
        orbit_size,
    };
    b1.exponent = (1..=b1.index)
        .find(|&n| {
            (0..r).all(|i| {
                let e: Vec<i64> = (0..r).map(|j| if i == j { n as i64 } else { 0 }).collect();
                b1.contains(&e)
            })
        })
        .unwrap_or(b1.index);
    Ok(b1)
}
