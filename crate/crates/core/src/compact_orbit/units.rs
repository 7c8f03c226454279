use nalgebra::DMatrix;
use rug::Integer;
use serde::{Deserialize, Serialize};

use super::field::{FieldElement, TotallyRealField};
use super::OrbitError;
use crate::grid::Lattice;
use crate::linalg::{det_integer, int_mat_to_i64, lll_columns, row_hnf, IntMatrix};
use crate::matrix::{RMatrix, RVector};
use crate::root_action::DiagElement;
use crate::scalar::RealScalar;

/// Coordinate bound for the unit search in the order basis.
pub const DEFAULT_UNIT_BOUND: i64 = 6;

/// Totally positive units generating the stabilizer of the lattice in A.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnitStabilizer {
    /// Units generating the full unit group modulo sign, up to the search bound.
    pub fundamental: Vec<FieldElement>,
    /// Basis of the totally positive units.
    pub generators: Vec<FieldElement>,
    /// Action of each generator on order coordinates (integer, determinant one).
    pub actions: Vec<Vec<Vec<i64>>>,
    /// Row j holds `log sigma_i(g_j)` for i = 1..d.
    pub log_basis: Vec<Vec<f64>>,
    pub search_bound: i64,
    pub regulator: f64,
}

impl UnitStabilizer {
    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn generator_diag(&self, field: &TotallyRealField, j: usize, prec: u32) -> DiagElement {
        DiagElement::from_entries_unchecked(field.embed_all(&self.generators[j], prec))
    }

    /// Diagonal image of `prod g_j^{e_j}`.
    pub fn diag_of(&self, field: &TotallyRealField, e: &[i64], prec: u32) -> DiagElement {
        let d = field.degree();
        let mut entries = vec![RealScalar::one(prec); d];
        for (j, &ej) in e.iter().enumerate() {
            if ej == 0 {
                continue;
            }
            let g = field.embed_all(&self.generators[j], prec + 32);
            for i in 0..d {
                entries[i] = &entries[i] * &g[i].powi(ej);
            }
        }
        DiagElement::from_entries_unchecked(entries.into_iter().map(|x| x.with_prec(prec)).collect())
    }

    pub fn element_of(&self, field: &TotallyRealField, e: &[i64]) -> FieldElement {
        let mut acc = FieldElement::from_int(1, field.degree());
        for (j, &ej) in e.iter().enumerate() {
            if ej != 0 {
                let p = field.pow(&self.generators[j], ej).expect("units are invertible");
                acc = field.mul(&acc, &p);
            }
        }
        acc
    }

    /// Integer action of `prod g_j^{e_j}` on order coordinates.
    pub fn action_of(&self, field: &TotallyRealField, e: &[i64]) -> IntMatrix {
        field
            .order_action(&self.element_of(field, e))
            .expect("units preserve the order")
    }

    pub fn log_of(&self, e: &[i64]) -> Vec<f64> {
        let d = self.log_basis.first().map_or(0, |r| r.len());
        let mut out = vec![0.0; d];
        for (j, &ej) in e.iter().enumerate() {
            for i in 0..d {
                out[i] += ej as f64 * self.log_basis[j][i];
            }
        }
        out
    }

    /// Exact check that every generator maps the order onto itself.
    pub fn verify_exact(&self, field: &TotallyRealField) -> bool {
        self.generators.iter().all(|g| {
            field.norm(g) == 1
                && field.signs(g).iter().all(|&s| s > 0)
                && field.order_action(g).is_some_and(|m| det_integer(&m) == 1)
        })
    }
}

fn log_vector(field: &TotallyRealField, u: &FieldElement) -> Vec<f64> {
    field
        .embed_all(u, 128)
        .iter()
        .map(|x| x.abs().ln().to_f64())
        .collect()
}

fn rank_f64(rows: &[Vec<f64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    m.svd(false, false).singular_values.iter().filter(|s| **s > 1e-8).count()
}

fn product(field: &TotallyRealField, units: &[FieldElement], e: &[Integer]) -> Option<FieldElement> {
    let mut acc = FieldElement::from_int(1, field.degree());
    for (u, k) in units.iter().zip(e) {
        if *k != 0 {
            acc = field.mul(&acc, &field.pow(u, k.to_i64()?)?);
        }
    }
    Some(acc)
}

/// LLL-reduce a unit basis through its log vectors.
fn reduce_basis(field: &TotallyRealField, units: Vec<FieldElement>) -> Vec<FieldElement> {
    let logs: Vec<Vec<f64>> = units.iter().map(|u| log_vector(field, u)).collect();
    let d = field.degree();
    let m = DMatrix::from_fn(d, units.len(), |i, j| logs[j][i]);
    let (_, t) = lll_columns(&m);
    (0..units.len())
        .map(|c| {
            let e: Vec<Integer> = (0..units.len()).map(|r| Integer::from(t[r][c])).collect();
            product(field, &units, &e).expect("small exponents")
        })
        .collect()
}

/// Search for units with order coordinates bounded by `bound` and return a
/// basis of the unit group modulo sign they generate.
pub fn find_units(field: &TotallyRealField, bound: i64) -> Result<Vec<FieldElement>, OrbitError> {
    let d = field.degree();
    let need = d - 1;
    let mut found: Vec<(f64, FieldElement)> = Vec::new();
    let width = (2 * bound + 1) as usize;
    let total = width.pow(d as u32);
    for idx in 0..total {
        let mut r = idx;
        let c: Vec<Integer> = (0..d)
            .map(|_| {
                let v = (r % width) as i64 - bound;
                r /= width;
                Integer::from(v)
            })
            .collect();
        // one representative per sign class
        match c.iter().find(|x| **x != 0) {
            Some(x) if *x > 0 => {}
            _ => continue,
        }
        let u = field.from_order_coords(&c);
        if u.is_rational() {
            continue;
        }
        let n = field.norm(&u);
        if n == 1 || n == -1 {
            let h = log_vector(field, &u).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            found.push((h, u));
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut basis: Vec<FieldElement> = Vec::new();
    for (_, u) in found {
        let lu = log_vector(field, &u);
        if basis.len() < need {
            let mut rows: Vec<Vec<f64>> = basis.iter().map(|b| log_vector(field, b)).collect();
            rows.push(lu);
            if rank_f64(&rows) == rows.len() {
                basis.push(u);
            }
            continue;
        }
        // coordinates of u in the current basis, on the first d-1 log coordinates
        let bl: Vec<Vec<f64>> = basis.iter().map(|b| log_vector(field, b)).collect();
        let a = DMatrix::from_fn(need, need, |i, j| bl[j][i]);
        let rhs = nalgebra::DVector::from_iterator(need, lu[..need].iter().copied());
        let Some(c) = a.lu().solve(&rhs) else { continue };
        if c.iter().all(|x| (x - x.round()).abs() < 1e-7) {
            continue;
        }
        let Some(den) = (2..=256i64).find(|&q| c.iter().all(|x| (x * q as f64 - (x * q as f64).round()).abs() < 1e-6)) else {
            continue;
        };
        let mut m: Vec<Vec<Integer>> = (0..need)
            .map(|i| (0..need).map(|j| Integer::from(if i == j { den } else { 0 })).collect())
            .collect();
        m.push(c.iter().map(|x| Integer::from((x * den as f64).round() as i64)).collect());
        let (h, t) = row_hnf(&m);
        let mut gens = basis.clone();
        gens.push(u.clone());
        let mut new_basis = Vec::with_capacity(need);
        for k in 0..need {
            let Some(v) = product(field, &gens, &t[k]) else { break };
            // confirm the logs of the combined unit match the predicted lattice point
            let lv = log_vector(field, &v);
            let predicted: Vec<f64> = (0..d)
                .map(|i| (0..need).map(|j| h[k][j].to_f64() / den as f64 * bl[j][i]).sum())
                .collect();
            if lv.iter().zip(&predicted).any(|(x, y)| (x - y).abs() > 1e-6) {
                break;
            }
            new_basis.push(v);
        }
        if new_basis.len() == need {
            basis = reduce_basis(field, new_basis);
        }
    }
    if basis.len() < need {
        return Err(OrbitError::UnitRank {
            found: basis.len(),
            needed: need,
            bound,
        });
    }
    Ok(reduce_basis(field, basis))
}

/// Basis of the totally positive units inside the group generated by `-1` and `units`.
fn totally_positive(field: &TotallyRealField, units: &[FieldElement]) -> Vec<FieldElement> {
    let n = units.len();
    let signs: Vec<Vec<i32>> = units.iter().map(|u| field.signs(u)).collect();
    let mut gens: Vec<Vec<Integer>> = Vec::new();
    for mask in 0u32..(1 << n) {
        let mut s = vec![1i32; field.degree()];
        for j in 0..n {
            if mask & (1 << j) != 0 {
                for (si, sj) in s.iter_mut().zip(&signs[j]) {
                    *si *= sj;
                }
            }
        }
        if s.iter().all(|&x| x == s[0]) {
            gens.push((0..n).map(|j| Integer::from((mask >> j) & 1)).collect());
        }
    }
    for j in 0..n {
        gens.push((0..n).map(|k| Integer::from(if k == j { 2 } else { 0 })).collect());
    }
    let (h, _) = row_hnf(&gens);
    let basis: Vec<FieldElement> = h
        .iter()
        .filter(|r| r.iter().any(|x| *x != 0))
        .map(|e| {
            let u = product(field, units, e).expect("small exponents");
            if field.signs(&u)[0] < 0 {
                u.neg()
            } else {
                u
            }
        })
        .collect();
    reduce_basis(field, basis)
}

/// A unimodular lattice with compact A-orbit, built from an order, together
/// with its stabilizer.
#[derive(Clone, Debug)]
pub struct CompactOrbit {
    pub field: TotallyRealField,
    pub lattice: Lattice,
    pub stabilizer: UnitStabilizer,
}

impl CompactOrbit {
    pub fn prec(&self) -> u32 {
        self.lattice.prec()
    }

    /// The point `B y` of the lattice span for lattice coordinates `y`.
    pub fn point_rational(&self, y: &[rug::Rational]) -> RVector {
        let p = self.prec();
        let v: RVector = y.iter().map(|c| RealScalar::from_rational(c, p)).collect();
        self.lattice.basis().mul_vec(&v)
    }
}

/// Lattice spanned by the scaled embedding vectors of the order basis, and the
/// totally positive units as its stabilizer in A.
pub fn build_compact_point(field: &TotallyRealField, prec: u32, unit_bound: i64) -> Result<CompactOrbit, OrbitError> {
    let mut field = field.clone();
    let d = field.degree();
    let disc = field.order_discriminant().abs();
    let scale = (-RealScalar::from_integer(&disc, prec + 32).ln().div_int(2 * d as i64)).exp();
    let make = |field: &TotallyRealField| {
        RMatrix::from_fn(d, d, |i, j| &field.embed(&field.integral_basis()[j], i, prec + 32) * &scale)
    };
    let mut basis = make(&field);
    if basis.det().is_positive() == Some(false) {
        field.negate_basis_element(0);
        basis = make(&field);
    }
    let lattice = Lattice::new(basis.with_prec(prec))?;

    let fundamental = find_units(&field, unit_bound)?;
    let generators = totally_positive(&field, &fundamental);
    let actions: Vec<Vec<Vec<i64>>> = generators
        .iter()
        .map(|g| {
            field
                .order_action(g)
                .and_then(|m| int_mat_to_i64(&m))
                .ok_or_else(|| OrbitError::Basis("unit outside the order".into()))
        })
        .collect::<Result<_, _>>()?;
    let log_basis: Vec<Vec<f64>> = generators.iter().map(|g| log_vector(&field, g)).collect();
    let fl: Vec<Vec<f64>> = fundamental.iter().map(|u| log_vector(&field, u)).collect();
    let n = d - 1;
    let regulator = DMatrix::from_fn(n, n, |i, j| fl[j][i]).determinant().abs();
    let stabilizer = UnitStabilizer {
        fundamental,
        generators,
        actions,
        log_basis,
        search_bound: unit_bound,
        regulator,
    };
    if !stabilizer.verify_exact(&field) {
        return Err(OrbitError::Basis("stabilizer check failed".into()));
    }
    Ok(CompactOrbit {
        field,
        lattice,
        stabilizer,
    })
}
