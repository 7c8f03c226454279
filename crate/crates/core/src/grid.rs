//! Unimodular lattices and affine grids in R^d, the coordinate product N,
//! box enumeration and witnesses for the target windows.

use std::cmp::Ordering;

use rug::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::lll_columns;
use crate::matrix::{vec_add, vec_product, vec_sub, vec_sup_norm, RMatrix, RVector};
use crate::scalar::{parse_rational, ExactReal, RealScalar};

pub const DEFAULT_CAP: usize = 2_000_000;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GridError {
    #[error("basis is not unimodular (|det| = {det})")]
    NotUnimodular { det: f64 },
    #[error("basis is singular or too ill-conditioned at this precision")]
    Singular,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("enumeration would visit about {estimated} points, above the cap {cap}")]
    CapExceeded { estimated: f64, cap: usize },
    #[error("vector is not a grid point at this precision")]
    NotAGridPoint,
    #[error("bad grid description: {0}")]
    Parse(String),
}

/// A lattice of covolume one; basis vectors are the columns of `basis`.
#[derive(Clone, Debug)]
pub struct Lattice {
    basis: RMatrix,
    inverse: RMatrix,
}

impl Lattice {
    pub fn new(basis: RMatrix) -> Result<Self, GridError> {
        let d = basis.rows();
        if basis.cols() != d {
            return Err(GridError::Dimension {
                expected: d,
                got: basis.cols(),
            });
        }
        if d < 2 {
            return Err(GridError::Dimension { expected: 2, got: d });
        }
        let det = basis.det().abs();
        let tol_bits = (basis.prec() / 2).min(200) as i32;
        let tol = RealScalar::from_float(Float::with_val(basis.prec(), Float::i_exp(1, -tol_bits)));
        let dev = (&det - &RealScalar::one(basis.prec())).abs();
        if !dev.definitely_lt(&tol) {
            return Err(GridError::NotUnimodular { det: det.to_f64() });
        }
        let inverse = basis.inverse().ok_or(GridError::Singular)?;
        Ok(Lattice { basis, inverse })
    }

    pub fn standard(d: usize, prec: u32) -> Self {
        Lattice::new(RMatrix::identity(d, prec)).expect("identity is unimodular")
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn basis(&self) -> &RMatrix {
        &self.basis
    }

    pub fn inverse(&self) -> &RMatrix {
        &self.inverse
    }

    pub fn prec(&self) -> u32 {
        self.basis.prec()
    }

    pub fn point(&self, coords: &[i64]) -> RVector {
        self.basis.mul_int_vec(coords)
    }

    /// Image under a linear map `m` (the lattice `m * Delta`).
    pub fn transform(&self, m: &RMatrix) -> Result<Lattice, GridError> {
        Lattice::new(m.mul(&self.basis))
    }

    /// Same lattice with the basis multiplied on the right by an integer unimodular matrix.
    pub fn change_basis(&self, u: &[Vec<i64>]) -> Result<Lattice, GridError> {
        Lattice::new(self.basis.mul_int_mat(u))
    }
}

/// An affine grid `Delta + w`, with `w` reduced into the fundamental
/// parallelepiped of the basis (coordinates in `[0, 1)`).
#[derive(Clone, Debug)]
pub struct Grid {
    lattice: Lattice,
    shift: RVector,
}

impl Grid {
    pub fn new(lattice: Lattice, shift: RVector) -> Result<Self, GridError> {
        if shift.len() != lattice.dim() {
            return Err(GridError::Dimension {
                expected: lattice.dim(),
                got: shift.len(),
            });
        }
        let coords = lattice.inverse.mul_vec(&shift);
        let n: Vec<i64> = coords
            .iter()
            .map(|c| c.value().floor().to_f64() as i64)
            .collect();
        let shift = if n.iter().any(|&x| x != 0) {
            vec_sub(&shift, &lattice.point(&n))
        } else {
            shift
        };
        Ok(Grid { lattice, shift })
    }

    pub fn lattice_only(lattice: Lattice) -> Self {
        let p = lattice.prec();
        let d = lattice.dim();
        Grid {
            lattice,
            shift: vec![RealScalar::zero(p); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn shift(&self) -> &RVector {
        &self.shift
    }

    pub fn prec(&self) -> u32 {
        self.lattice.prec()
    }

    pub fn point(&self, coords: &[i64]) -> RVector {
        vec_add(&self.lattice.point(coords), &self.shift)
    }

    /// Shift coordinates with respect to the basis.
    pub fn shift_coords(&self) -> RVector {
        self.lattice.inverse.mul_vec(&self.shift)
    }

    /// Integer coordinates of a grid point, when they are decided.
    pub fn coords_of(&self, v: &[RealScalar]) -> Result<Vec<i64>, GridError> {
        let c = self.lattice.inverse.mul_vec(&vec_sub(v, &self.shift));
        c.iter()
            .map(|ci| {
                let n = ci.round_value();
                let dist = (ci - &RealScalar::from_integer(&n, ci.prec())).abs();
                if dist.definitely_lt(&RealScalar::from_f64(0.25, ci.prec())) {
                    n.to_i64().ok_or(GridError::NotAGridPoint)
                } else {
                    Err(GridError::NotAGridPoint)
                }
            })
            .collect()
    }

    /// The grid `g * (Delta + w)`; the shift stays reduced since its coordinates are unchanged.
    pub fn transform(&self, m: &RMatrix) -> Result<Grid, GridError> {
        let lattice = self.lattice.transform(m)?;
        let shift = m.mul_vec(&self.shift);
        Ok(Grid { lattice, shift })
    }

    pub fn apply_diag(&self, entries: &[RealScalar]) -> Result<Grid, GridError> {
        self.transform(&RMatrix::diagonal(entries))
    }

    pub fn translate(&self, w: &[RealScalar]) -> Result<Grid, GridError> {
        Grid::new(self.lattice.clone(), vec_add(&self.shift, w))
    }

    /// Same grid described with basis `B * u` for an integer unimodular `u`.
    pub fn change_basis(&self, u: &[Vec<i64>]) -> Result<Grid, GridError> {
        Grid::new(self.lattice.change_basis(u)?, self.shift.clone())
    }

    pub fn to_json(&self) -> GridJson {
        let d = self.dim();
        let basis = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| decimal_string(self.lattice.basis.get(i, j)))
            .collect();
        GridJson {
            dim: d,
            basis,
            shift: self.shift.iter().map(decimal_string).collect(),
        }
    }

    pub fn from_json(j: &GridJson, prec: u32) -> Result<Grid, GridError> {
        let d = j.dim;
        if j.basis.len() != d * d || j.shift.len() != d {
            return Err(GridError::Parse("basis must have dim^2 entries and shift dim entries".into()));
        }
        let parse = |s: &str| -> Result<RealScalar, GridError> {
            let q = parse_rational(s).map_err(|e| GridError::Parse(e.to_string()))?;
            Ok(RealScalar::from_rational(&q, prec))
        };
        let mut rows = Vec::with_capacity(d);
        for i in 0..d {
            rows.push(
                (0..d)
                    .map(|k| parse(&j.basis[i * d + k]))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        let shift = j.shift.iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()?;
        Grid::new(Lattice::new(RMatrix::from_rows(rows))?, shift)
    }
}

/// Decimal text of the midpoint with enough digits to reproduce the working precision.
pub fn decimal_string(x: &RealScalar) -> String {
    let digits = (x.prec() as f64 * std::f64::consts::LOG10_2).ceil() as usize + 2;
    let v = x.value();
    if v.is_zero() {
        return "0".into();
    }
    v.to_string_radix(10, Some(digits))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridJson {
    pub dim: usize,
    pub basis: Vec<String>,
    pub shift: Vec<String>,
}

/// The grid of vectors `(x, x u - y - alpha, x v - z - beta)` for integers `x, y, z`.
pub fn cassels_grid(u: &RealScalar, v: &RealScalar, alpha: &RealScalar, beta: &RealScalar) -> Grid {
    let p = u.prec().max(v.prec()).max(alpha.prec()).max(beta.prec());
    let z = || RealScalar::zero(p);
    let basis = RMatrix::from_rows(vec![
        vec![RealScalar::one(p), z(), z()],
        vec![u.clone(), RealScalar::from_int(-1, p), z()],
        vec![v.clone(), z(), RealScalar::from_int(-1, p)],
    ]);
    let lattice = Lattice::new(basis).expect("triangular basis with unit diagonal");
    Grid::new(lattice, vec![z(), -alpha, -beta]).expect("dimension 3")
}

pub fn cassels_grid_exact(u: &ExactReal, v: &ExactReal, alpha: &ExactReal, beta: &ExactReal, prec: u32) -> Grid {
    cassels_grid(&u.approx(prec), &v.approx(prec), &alpha.approx(prec), &beta.approx(prec))
}

pub fn norm_product(v: &[RealScalar]) -> RealScalar {
    vec_product(v)
}

/// Whether a candidate lies strictly inside the box or only possibly so.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    Inside,
    Ambiguous,
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub coords: Vec<i64>,
    pub vector: RVector,
    pub sup_norm: RealScalar,
    pub membership: Membership,
}

/// Certificate that a grid point lies in a target window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Witness {
    pub vector: RVector,
    pub sup_norm: RealScalar,
    pub abs_product: RealScalar,
    pub integer_coords: Vec<i64>,
    pub producer: Option<Vec<RealScalar>>,
}

impl Witness {
    pub fn from_coords(g: &Grid, coords: &[i64], producer: Option<Vec<RealScalar>>) -> Witness {
        let vector = g.point(coords);
        let sup_norm = vec_sup_norm(&vector);
        let abs_product = norm_product(&vector).abs();
        Witness {
            vector,
            sup_norm,
            abs_product,
            integer_coords: coords.to_vec(),
            producer,
        }
    }

    /// Recompute the witness from its integer coordinates and check that every
    /// stored enclosure agrees with the recomputation and that `|N| > 0`.
    pub fn verify(&self, g: &Grid) -> bool {
        let w = Witness::from_coords(g, &self.integer_coords, None);
        let overlaps = |a: &RealScalar, b: &RealScalar| !(a.definitely_lt(b) || a.definitely_gt(b));
        w.vector.iter().zip(&self.vector).all(|(a, b)| overlaps(a, b))
            && overlaps(&w.sup_norm, &self.sup_norm)
            && overlaps(&w.abs_product, &self.abs_product)
            && w.abs_product.is_positive() == Some(true)
    }
}

/// Integer coordinate ranges for the lower-triangular fast path and the general path.
fn coord_range(lo: &RealScalar, hi: &RealScalar) -> (i64, i64) {
    let a = lo.lo().to_f64().floor();
    let b = hi.hi().to_f64().ceil();
    (a.max(-9e15) as i64, b.min(9e15) as i64)
}

/// All grid points with `|v|_inf < bound`, plus boundary-ambiguous points (flagged).
pub fn enumerate_box(g: &Grid, bound: &RealScalar, cap: usize) -> Result<Vec<Candidate>, GridError> {
    let mut out = Vec::new();
    let d = g.dim();
    let basis = g.lattice.basis();
    let p = g.prec();
    if basis.is_lower_triangular() {
        let mut coords = vec![0i64; d];
        let mut partial = vec![RealScalar::zero(p); d];
        let est = estimate_triangular(g, bound);
        if est > cap as f64 {
            return Err(GridError::CapExceeded { estimated: est, cap });
        }
        triangular_rec(g, bound, 0, &mut coords, &mut partial, &mut out);
        return Ok(out);
    }
    // reduce with LLL on midpoints, then bound coordinates with the interval inverse
    let (_, u) = lll_columns(&basis.to_f64());
    let reduced = g.change_basis(&u)?;
    // the new basis may reduce the shift by a lattice vector
    let offset = g.coords_of(reduced.shift())?;
    let inv = reduced.lattice.inverse();
    let sc = inv.mul_vec(reduced.shift());
    let mut ranges = Vec::with_capacity(d);
    let mut est = 1.0f64;
    for j in 0..d {
        let mut row_sum = RealScalar::zero(p);
        for i in 0..d {
            row_sum = &row_sum + &inv.get(j, i).abs();
        }
        let r = &row_sum * bound;
        let (a, b) = coord_range(&(-&sc[j] - &r), &(&r - &sc[j]));
        est *= (b - a + 1) as f64;
        ranges.push((a, b));
    }
    if est > cap as f64 {
        return Err(GridError::CapExceeded { estimated: est, cap });
    }
    let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        let v = reduced.point(&cur);
        if let Some(c) = classify(&v, bound) {
            let orig: Vec<i64> = crate::linalg::mat_vec_i64(&u, &cur)
                .iter()
                .zip(&offset)
                .map(|(a, b)| a + b)
                .collect();
            out.push(Candidate {
                coords: orig,
                sup_norm: vec_sup_norm(&v),
                vector: v,
                membership: c,
            });
        }
        let mut k = 0;
        loop {
            if k == d {
                out.sort_by(|a, b| a.coords.cmp(&b.coords));
                return Ok(out);
            }
            if cur[k] < ranges[k].1 {
                cur[k] += 1;
                break;
            }
            cur[k] = ranges[k].0;
            k += 1;
        }
    }
}

fn classify(v: &[RealScalar], bound: &RealScalar) -> Option<Membership> {
    let n = vec_sup_norm(v);
    if n.definitely_lt(bound) {
        Some(Membership::Inside)
    } else if n.definitely_ge(bound) {
        None
    } else {
        Some(Membership::Ambiguous)
    }
}

fn estimate_triangular(g: &Grid, bound: &RealScalar) -> f64 {
    let d = g.dim();
    let b = g.lattice.basis();
    let mut est = 1.0;
    for i in 0..d {
        let diag = b.get(i, i).to_f64().abs();
        est *= 2.0 * bound.to_f64() / diag + 1.0;
    }
    est
}

fn triangular_rec(
    g: &Grid,
    bound: &RealScalar,
    i: usize,
    coords: &mut Vec<i64>,
    partial: &mut Vec<RealScalar>,
    out: &mut Vec<Candidate>,
) {
    let d = g.dim();
    let b = g.lattice.basis();
    if i == d {
        let v = g.point(coords);
        if let Some(c) = classify(&v, bound) {
            out.push(Candidate {
                coords: coords.clone(),
                sup_norm: vec_sup_norm(&v),
                vector: v,
                membership: c,
            });
        }
        return;
    }
    // row i: v_i = sum_{k<i} b_ik c_k + b_ii c_i + s_i
    let mut fixed = g.shift[i].clone();
    for k in 0..i {
        if coords[k] != 0 {
            fixed = &fixed + &b.get(i, k).mul_int(coords[k]);
        }
    }
    partial[i] = fixed.clone();
    let diag = b.get(i, i);
    let lo_v = &(-bound) - &fixed;
    let hi_v = bound - &fixed;
    let (a, c) = if diag.is_positive() == Some(true) {
        let (x, y) = (&lo_v / diag, &hi_v / diag);
        coord_range(&x, &y)
    } else {
        let (x, y) = (&hi_v / diag, &lo_v / diag);
        coord_range(&x, &y)
    };
    for ci in a..=c {
        coords[i] = ci;
        let vi = &fixed + &diag.mul_int(ci);
        if vi.abs().definitely_ge(bound) {
            continue;
        }
        triangular_rec(g, bound, i + 1, coords, partial, out);
    }
    coords[i] = 0;
}

/// Outcome of a window search: the best decided witness (if any) and how many
/// candidates could not be classified at this precision.
#[derive(Clone, Debug)]
pub struct WindowSearch {
    pub witness: Option<Witness>,
    pub undecided: bool,
    pub ambiguous: usize,
    pub examined: usize,
}

/// Search for `v` in the grid with `|v| < theta` and `eps1 < |N(v)| < eps2`.
pub fn w_witness(
    g: &Grid,
    theta: &RealScalar,
    eps1: &RealScalar,
    eps2: &RealScalar,
    cap: usize,
) -> Result<WindowSearch, GridError> {
    let cands = enumerate_box(g, theta, cap)?;
    let mut best: Option<(Float, Witness)> = None;
    let mut ambiguous = 0;
    let examined = cands.len();
    for c in cands {
        let n = norm_product(&c.vector).abs();
        let above = if n.definitely_gt(eps1) {
            Some(true)
        } else if n.definitely_le(eps1) {
            Some(false)
        } else {
            None
        };
        let below = if n.definitely_lt(eps2) {
            Some(true)
        } else if n.definitely_ge(eps2) {
            Some(false)
        } else {
            None
        };
        let nonzero = n.is_positive();
        if above == Some(false) || below == Some(false) || nonzero == Some(false) {
            continue;
        }
        if c.membership == Membership::Ambiguous || above.is_none() || below.is_none() || nonzero.is_none() {
            ambiguous += 1;
            continue;
        }
        let key = n.value();
        let better = match &best {
            None => true,
            Some((bk, bw)) => match key.partial_cmp(bk) {
                Some(Ordering::Less) => true,
                Some(Ordering::Equal) => c.coords < bw.integer_coords,
                _ => false,
            },
        };
        if better {
            let w = Witness {
                sup_norm: c.sup_norm,
                abs_product: n,
                integer_coords: c.coords,
                vector: c.vector,
                producer: None,
            };
            best = Some((key, w));
        }
    }
    let undecided = best.is_none() && ambiguous > 0;
    Ok(WindowSearch {
        witness: best.map(|b| b.1),
        undecided,
        ambiguous,
        examined,
    })
}

/// Parse `"cassels:u,v,alpha,beta"` (numbers in any `ExactReal` syntax except
/// that algebraic forms must be bracketed as `[alg:...]`).
pub fn parse_cassels_spec(s: &str) -> Result<[ExactReal; 4], GridError> {
    let body = s
        .strip_prefix("cassels:")
        .ok_or_else(|| GridError::Parse(format!("expected cassels:u,v,alpha,beta, got {s:?}")))?;
    let parts = split_top_level(body);
    if parts.len() != 4 {
        return Err(GridError::Parse(format!("expected 4 numbers, got {}", parts.len())));
    }
    let parse = |t: &str| -> Result<ExactReal, GridError> {
        let t = t.trim();
        let t = t.strip_prefix('[').and_then(|x| x.strip_suffix(']')).unwrap_or(t);
        ExactReal::parse(t).map_err(|e| GridError::Parse(e.to_string()))
    };
    Ok([parse(&parts[0])?, parse(&parts[1])?, parse(&parts[2])?, parse(&parts[3])?])
}

fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    out.push(cur);
    out
}
