//! The diagonal group A, root subgroups, near-identity charts and the
//! root-displacement construction that pushes a grid into a target window.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rug::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{enumerate_box, Grid, GridError, Lattice, Witness};
use crate::matrix::{vec_product, vec_sup_norm, RMatrix, RVector};
use crate::scalar::RealScalar;

/// Radius of the neighbourhood of the identity where the product chart is inverted.
pub const CHART_RADIUS: f64 = 0.1;

/// Measured inclusion constant: every element of the chart box of size `eps`
/// lies within `C0_D3 * eps` of the identity in the max-entry norm (d = 3,
/// 0 < eps < 1). The ratio approaches 7 as eps tends to 1 at the box corners.
pub const C0_D3: f64 = 7.0;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RootError {
    #[error("diagonal entries must be positive")]
    NonPositive,
    #[error("element is outside the chart radius {radius}")]
    OutsideChart { radius: f64 },
    #[error("chart inversion did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("index out of range for dimension {0}")]
    BadIndex(usize),
    #[error("bad root name {0:?}")]
    Parse(String),
    #[error("no lattice vector with the required sign pattern below radius {0}")]
    NoSignVector(f64),
    #[error("undecided at the working precision: {0}")]
    Undecided(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Positive diagonal matrix of determinant one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagElement {
    entries: RVector,
}

impl DiagElement {
    /// Builds the element, dividing by the geometric mean so the product is one.
    pub fn new(entries: RVector) -> Result<Self, RootError> {
        if entries.iter().any(|e| e.is_positive() != Some(true)) {
            return Err(RootError::NonPositive);
        }
        let logs: RVector = entries.iter().map(|e| e.ln()).collect();
        Ok(Self::from_log(&logs))
    }

    /// `diag(exp(x_i - mean(x)))`.
    pub fn from_log(logs: &[RealScalar]) -> Self {
        let d = logs.len();
        let p = logs.iter().map(|x| x.prec()).max().unwrap_or(64);
        let mut mean = RealScalar::zero(p);
        for x in logs {
            mean = &mean + x;
        }
        let mean = mean.div_int(d as i64);
        DiagElement {
            entries: logs.iter().map(|x| (x - &mean).exp()).collect(),
        }
    }

    pub fn from_log_f64(logs: &[f64], prec: u32) -> Self {
        let v: RVector = logs.iter().map(|&x| RealScalar::from_f64(x, prec)).collect();
        Self::from_log(&v)
    }

    /// Entries taken as given; the caller guarantees positivity and unit product.
    pub fn from_entries_unchecked(entries: RVector) -> Self {
        DiagElement { entries }
    }

    pub fn identity(d: usize, prec: u32) -> Self {
        DiagElement {
            entries: vec![RealScalar::one(prec); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[RealScalar] {
        &self.entries
    }

    pub fn prec(&self) -> u32 {
        self.entries.iter().map(|x| x.prec()).max().unwrap_or(64)
    }

    /// Max-entry norm, which for a diagonal matrix is the largest entry.
    pub fn norm(&self) -> RealScalar {
        vec_sup_norm(&self.entries)
    }

    /// `max_i |a_i - 1|`.
    pub fn dist_to_identity(&self) -> RealScalar {
        let one = RealScalar::one(self.prec());
        let diffs: RVector = self.entries.iter().map(|a| a - &one).collect();
        vec_sup_norm(&diffs)
    }

    pub fn log(&self) -> RVector {
        self.entries.iter().map(|a| a.ln()).collect()
    }

    pub fn log_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|a| a.ln().to_f64()).collect()
    }

    pub fn inverse(&self) -> Self {
        let one = RealScalar::one(self.prec());
        DiagElement {
            entries: self.entries.iter().map(|a| &one / a).collect(),
        }
    }

    pub fn mul(&self, other: &DiagElement) -> Self {
        DiagElement {
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn pow(&self, n: i64) -> Self {
        DiagElement {
            entries: self.entries.iter().map(|a| a.powi(n)).collect(),
        }
    }

    pub fn matrix(&self) -> RMatrix {
        RMatrix::diagonal(&self.entries)
    }

    pub fn product(&self) -> RealScalar {
        vec_product(&self.entries)
    }

    /// Value of the character `alpha` at this element.
    pub fn root_value(&self, alpha: RootIndex) -> RealScalar {
        match alpha {
            RootIndex::G0 { i, j } => &self.entries[i] / &self.entries[j],
            RootIndex::V { i } => self.entries[i].clone(),
        }
    }

    pub fn apply_grid(&self, g: &Grid) -> Result<Grid, GridError> {
        g.apply_diag(&self.entries)
    }

    pub fn apply_vec(&self, v: &[RealScalar]) -> RVector {
        self.entries.iter().zip(v).map(|(a, x)| a * x).collect()
    }
}

/// A root of G: `G0 { i, j }` for the shear `x -> x + t x_j e_i` (i != j), or
/// `V { i }` for the translation `x -> x + t e_i`. Indices are 0-based; the
/// text form is 1-based, `a_ij` and `b_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RootIndex {
    V { i: usize },
    G0 { i: usize, j: usize },
}

impl RootIndex {
    pub fn check(&self, d: usize) -> Result<(), RootError> {
        match *self {
            RootIndex::V { i } if i < d => Ok(()),
            RootIndex::G0 { i, j } if i < d && j < d && i != j => Ok(()),
            _ => Err(RootError::BadIndex(d)),
        }
    }

    pub fn is_translation(&self) -> bool {
        matches!(self, RootIndex::V { .. })
    }

    /// Shear roots in lexicographic order of `(i, j)`.
    pub fn g0_roots(d: usize) -> Vec<RootIndex> {
        let mut out = Vec::with_capacity(d * (d - 1));
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    out.push(RootIndex::G0 { i, j });
                }
            }
        }
        out
    }

    pub fn v_roots(d: usize) -> Vec<RootIndex> {
        (0..d).map(|i| RootIndex::V { i }).collect()
    }

    /// All roots: translations ascending, then shears lexicographically.
    pub fn all(d: usize) -> Vec<RootIndex> {
        let mut v = Self::v_roots(d);
        v.extend(Self::g0_roots(d));
        v
    }

    /// The log-linear functional of the character on log coordinates of A.
    pub fn log_functional(&self, d: usize) -> Vec<f64> {
        let mut f = vec![0.0; d];
        match *self {
            RootIndex::G0 { i, j } => {
                f[i] = 1.0;
                f[j] = -1.0;
            }
            RootIndex::V { i } => f[i] = 1.0,
        }
        f
    }
}

impl fmt::Display for RootIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RootIndex::G0 { i, j } => write!(f, "a_{}{}", i + 1, j + 1),
            RootIndex::V { i } => write!(f, "b_{}", i + 1),
        }
    }
}

impl FromStr for RootIndex {
    type Err = RootError;
    fn from_str(s: &str) -> Result<Self, RootError> {
        let bad = || RootError::Parse(s.to_string());
        let digit = |c: char| c.to_digit(10).filter(|&x| x >= 1).map(|x| x as usize - 1).ok_or_else(bad);
        if let Some(rest) = s.strip_prefix("a_") {
            let cs: Vec<char> = rest.chars().collect();
            if cs.len() != 2 {
                return Err(bad());
            }
            let (i, j) = (digit(cs[0])?, digit(cs[1])?);
            if i == j {
                return Err(bad());
            }
            return Ok(RootIndex::G0 { i, j });
        }
        if let Some(rest) = s.strip_prefix("b_") {
            let cs: Vec<char> = rest.chars().collect();
            if cs.len() != 1 {
                return Err(bad());
            }
            return Ok(RootIndex::V { i: digit(cs[0])? });
        }
        Err(bad())
    }
}

/// Element `x -> L x + tau` of `V x| SL(d)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AffineElement {
    pub linear: RMatrix,
    pub translation: RVector,
}

impl AffineElement {
    pub fn new(linear: RMatrix, translation: RVector) -> Result<Self, RootError> {
        let d = linear.rows();
        if linear.cols() != d || translation.len() != d {
            return Err(RootError::BadIndex(d));
        }
        let det = linear.det();
        let dev = (&det - &RealScalar::one(linear.prec())).abs();
        let tol = RealScalar::from_f64(1e-12, linear.prec());
        if !dev.definitely_lt(&tol) {
            return Err(RootError::Grid(GridError::NotUnimodular { det: det.to_f64() }));
        }
        Ok(AffineElement { linear, translation })
    }

    pub fn linear_only(linear: RMatrix) -> Result<Self, RootError> {
        let d = linear.rows();
        let p = linear.prec();
        Self::new(linear, vec![RealScalar::zero(p); d])
    }

    pub fn identity(d: usize, prec: u32) -> Self {
        AffineElement {
            linear: RMatrix::identity(d, prec),
            translation: vec![RealScalar::zero(prec); d],
        }
    }

    pub fn root(alpha: RootIndex, t: &RealScalar, d: usize) -> Self {
        let p = t.prec();
        let mut e = Self::identity(d, p);
        match alpha {
            RootIndex::G0 { i, j } => e.linear.set(i, j, t.clone()),
            RootIndex::V { i } => e.translation[i] = t.clone(),
        }
        e
    }

    pub fn diag(a: &DiagElement) -> Self {
        let d = a.dim();
        AffineElement {
            linear: a.matrix(),
            translation: vec![RealScalar::zero(a.prec()); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.rows()
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &AffineElement) -> AffineElement {
        let linear = self.linear.mul(&other.linear);
        let moved = self.linear.mul_vec(&other.translation);
        let translation = moved.iter().zip(&self.translation).map(|(a, b)| a + b).collect();
        AffineElement { linear, translation }
    }

    pub fn inverse(&self) -> Option<AffineElement> {
        let inv = self.linear.inverse()?;
        let t = inv.mul_vec(&self.translation);
        Some(AffineElement {
            linear: inv,
            translation: t.into_iter().map(|x| -x).collect(),
        })
    }

    pub fn apply_vec(&self, v: &[RealScalar]) -> RVector {
        let w = self.linear.mul_vec(v);
        w.iter().zip(&self.translation).map(|(a, b)| a + b).collect()
    }

    pub fn apply_grid(&self, g: &Grid) -> Result<Grid, GridError> {
        let moved = g.transform(&self.linear)?;
        if self.translation.iter().all(|t| t.sign() == Some(Ordering::Equal)) {
            Ok(moved)
        } else {
            moved.translate(&self.translation)
        }
    }

    pub fn apply_lattice(&self, l: &Lattice) -> Result<Lattice, GridError> {
        l.transform(&self.linear)
    }

    /// `max(|L - I|_max, |tau|_inf)`.
    pub fn dist_to_identity(&self) -> RealScalar {
        let d = self.dim();
        let lin = self.linear.sub(&RMatrix::identity(d, self.linear.prec())).max_abs();
        lin.max(&vec_sup_norm(&self.translation))
    }
}

pub fn apply_root(alpha: RootIndex, t: &RealScalar, g: &Grid) -> Result<Grid, RootError> {
    alpha.check(g.dim())?;
    Ok(AffineElement::root(alpha, t, g.dim()).apply_grid(g)?)
}

/// Chart coordinates: `g = prod_{V, ascending} u(t) * a * prod_{G0, lex} u(t)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChartCoords {
    pub a: DiagElement,
    pub t: Vec<(RootIndex, RealScalar)>,
}

impl ChartCoords {
    /// `max(|a - e|, max |t_alpha|)`: the smallest `eps` with the element in the chart box.
    pub fn box_size(&self) -> RealScalar {
        let mut m = self.a.dist_to_identity();
        for (_, t) in &self.t {
            m = m.max(&t.abs());
        }
        m
    }

    pub fn shear_size(&self) -> RealScalar {
        let mut m = RealScalar::zero(self.a.prec());
        for (alpha, t) in &self.t {
            if !alpha.is_translation() {
                m = m.max(&t.abs());
            }
        }
        m
    }

    pub fn get(&self, alpha: RootIndex) -> Option<&RealScalar> {
        self.t.iter().find(|(a, _)| *a == alpha).map(|(_, t)| t)
    }

    /// Multiply the chart product back out.
    pub fn compose(&self) -> AffineElement {
        let d = self.a.dim();
        let p = self.a.prec();
        let mut lin = self.a.matrix();
        for alpha in RootIndex::g0_roots(d) {
            if let Some(t) = self.get(alpha) {
                lin = lin.mul(&AffineElement::root(alpha, t, d).linear);
            }
        }
        let mut translation = vec![RealScalar::zero(p); d];
        for i in 0..d {
            if let Some(t) = self.get(RootIndex::V { i }) {
                translation[i] = t.clone();
            }
        }
        AffineElement {
            linear: lin,
            translation,
        }
    }
}

fn product_f64(x: &[f64], d: usize) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let roots = RootIndex::g0_roots(d);
    let h_sum: f64 = x[..d - 1].iter().sum();
    let mut a = DMatrix::<f64>::zeros(d, d);
    for k in 0..d - 1 {
        a[(k, k)] = x[k].exp();
    }
    a[(d - 1, d - 1)] = (-h_sum).exp();
    let shears: Vec<DMatrix<f64>> = roots
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut m = DMatrix::<f64>::identity(d, d);
            if let RootIndex::G0 { i, j } = *r {
                m[(i, j)] = x[d - 1 + k];
            }
            m
        })
        .collect();
    let mut p = a.clone();
    for s in &shears {
        p *= s;
    }
    let mut factors = vec![a];
    factors.extend(shears);
    (p, factors)
}

fn jacobian_f64(x: &[f64], d: usize) -> DMatrix<f64> {
    let n = d * d - 1;
    let (_, factors) = product_f64(x, d);
    let roots = RootIndex::g0_roots(d);
    let mut n_prod = DMatrix::<f64>::identity(d, d);
    for s in &factors[1..] {
        n_prod *= s;
    }
    let mut j = DMatrix::<f64>::zeros(d * d, n);
    let a = &factors[0];
    for k in 0..d - 1 {
        let mut da = DMatrix::<f64>::zeros(d, d);
        da[(k, k)] = a[(k, k)];
        da[(d - 1, d - 1)] = -a[(d - 1, d - 1)];
        let col = da * &n_prod;
        for (r, v) in col.iter().enumerate() {
            j[(r, k)] = *v;
        }
    }
    for (k, r) in roots.iter().enumerate() {
        let mut left = a.clone();
        for s in &factors[1..1 + k] {
            left *= s;
        }
        let mut e = DMatrix::<f64>::zeros(d, d);
        if let RootIndex::G0 { i, j: jj } = *r {
            e[(i, jj)] = 1.0;
        }
        let mut m = left * e;
        for s in &factors[2 + k..] {
            m *= s;
        }
        for (row, v) in m.iter().enumerate() {
            j[(row, d - 1 + k)] = *v;
        }
    }
    j
}

/// Newton solve in double precision for the chart coordinates of `l`.
fn decompose_f64(l: &DMatrix<f64>) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let d = l.nrows();
    let n = d * d - 1;
    let mut x = vec![0.0; n];
    for k in 0..d - 1 {
        x[k] = l[(k, k)].abs().max(1e-300).ln();
    }
    for _ in 0..60 {
        let (p, _) = product_f64(&x, d);
        let f = DVector::from_iterator(d * d, (p - l).iter().copied());
        if f.amax() < 1e-15 {
            break;
        }
        let j = jacobian_f64(&x, d);
        let step = j.clone().svd(true, true).solve(&f, 1e-14).ok()?;
        for (xi, si) in x.iter_mut().zip(step.iter()) {
            *xi -= si;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    let j = jacobian_f64(&x, d);
    let pinv = j.pseudo_inverse(1e-14).ok()?;
    Some((x, pinv))
}

fn chart_from_params(x: &[Float], d: usize, prec: u32) -> ChartCoords {
    let mut logs: RVector = x[..d - 1].iter().map(|h| RealScalar::from_float(h.clone())).collect();
    let mut s = RealScalar::zero(prec);
    for h in &logs {
        s = &s + h;
    }
    logs.push(-s);
    let a = DiagElement {
        entries: logs.iter().map(|h| h.exp()).collect(),
    };
    let t = RootIndex::g0_roots(d)
        .into_iter()
        .enumerate()
        .map(|(k, r)| (r, RealScalar::from_float(x[d - 1 + k].clone())))
        .collect();
    ChartCoords { a, t }
}

/// Chart box size of a linear element in double precision (screening only).
pub fn chart_size_f64(h: &DMatrix<f64>, radius: f64) -> Option<f64> {
    let d = h.nrows();
    let dev = (h - DMatrix::<f64>::identity(d, d)).amax();
    if !(dev < radius) {
        return None;
    }
    let (x, _) = decompose_f64(h)?;
    let (p, _) = product_f64(&x, d);
    if (p - h).amax() > 1e-9 {
        return None;
    }
    let hs: f64 = x[..d - 1].iter().sum();
    let mut size = (-hs).exp_m1().abs();
    for v in &x[..d - 1] {
        size = size.max(v.exp_m1().abs());
    }
    for v in &x[d - 1..] {
        size = size.max(v.abs());
    }
    Some(size)
}

/// Chart coordinates of an element near the identity, reproducing it within
/// `2^-(prec/2)`; the translation part is read off exactly.
pub fn decompose_near_identity(g: &AffineElement, radius: f64) -> Result<ChartCoords, RootError> {
    let d = g.dim();
    let prec = g.linear.prec();
    let dist = g.dist_to_identity();
    if !dist.definitely_lt(&RealScalar::from_f64(radius, prec)) {
        return Err(RootError::OutsideChart { radius });
    }
    let lf = g.linear.to_f64();
    let (x0, pinv) = decompose_f64(&lf).ok_or(RootError::NoConvergence { residual: f64::NAN })?;
    let mut x: Vec<Float> = x0.iter().map(|&v| Float::with_val(prec, v)).collect();
    let tol = RealScalar::from_float(Float::with_val(prec, Float::i_exp(1, -((prec / 2) as i32))));
    let mut last = f64::INFINITY;
    let mut chart = chart_from_params(&x, d, prec);
    for _ in 0..64 {
        chart = chart_from_params(&x, d, prec);
        let rec = chart.compose().linear;
        let resid = rec.sub(&g.linear);
        let r = resid.max_abs();
        let rv = r.hi().to_f64();
        if r.definitely_lt(&tol) && (rv == 0.0 || rv >= last * 0.5) {
            break;
        }
        last = rv;
        let fv: Vec<Float> = (0..d * d).map(|k| resid.get(k % d, k / d).value()).collect();
        // nalgebra stores column-major: entry k of the flattened residual is (k % d, k / d)
        for (i, xi) in x.iter_mut().enumerate() {
            let mut s = Float::with_val(prec, 0);
            for (k, fk) in fv.iter().enumerate() {
                let c = pinv[(i, k)];
                if c != 0.0 {
                    s += Float::with_val(prec, fk * c);
                }
            }
            *xi -= s;
        }
    }
    let rec = chart.compose().linear;
    let r = rec.sub(&g.linear).max_abs();
    if !r.definitely_lt(&tol) {
        return Err(RootError::NoConvergence { residual: r.to_f64() });
    }
    for i in 0..d {
        chart.t.push((RootIndex::V { i }, g.translation[i].clone()));
    }
    chart.t.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(chart)
}

/// Chart box size of a linear element (`None` outside the chart or when undecided).
pub fn chart_size(g0: &RMatrix, radius: f64) -> Option<RealScalar> {
    let g = AffineElement::linear_only(g0.clone()).ok()?;
    decompose_near_identity(&g, radius).ok().map(|c| c.box_size())
}

/// Whether `g0` lies in the chart box of size `eps` (true only when decided).
pub fn membership_u(g0: &RMatrix, eps: &RealScalar, radius: f64) -> bool {
    chart_size(g0, radius).is_some_and(|s| s.definitely_lt(eps))
}

/// Whether `|g - e| < eps` in the max-entry norm (true only when decided).
pub fn membership_o(g: &AffineElement, eps: &RealScalar) -> bool {
    g.dist_to_identity().definitely_lt(eps)
}

/// Sign of the requested displacement parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Displacement {
    pub t: RealScalar,
    pub theta: RealScalar,
    /// Witness in the displaced grid `u_alpha(t) g`.
    pub witness: Witness,
    /// The grid vector `z = w + l s` before displacement.
    pub z: RVector,
    pub ell: i64,
    pub s_coords: Vec<i64>,
}

/// Required strict signs of `z` (+1 / -1) for the constrained coordinates.
fn constraints(alpha: RootIndex, sign: Sign) -> Vec<(usize, i32)> {
    match (alpha, sign) {
        (RootIndex::V { i }, Sign::Plus) => vec![(i, -1)],
        (RootIndex::V { i }, Sign::Minus) => vec![(i, 1)],
        (RootIndex::G0 { i, j }, Sign::Plus) => vec![(i, 1), (j, -1)],
        (RootIndex::G0 { i, j }, Sign::Minus) => vec![(i, 1), (j, 1)],
    }
}

/// Sign patterns for all coordinates, constrained ones fixed; free coordinates
/// start with the sign of the first constrained coordinate.
fn patterns(d: usize, cons: &[(usize, i32)]) -> Vec<Vec<i32>> {
    let free: Vec<usize> = (0..d).filter(|k| !cons.iter().any(|c| c.0 == *k)).collect();
    let first = cons[0].1;
    let mut out = Vec::new();
    for mask in 0u32..(1 << free.len()) {
        let mut p = vec![0i32; d];
        for &(k, s) in cons {
            p[k] = s;
        }
        for (b, &k) in free.iter().enumerate() {
            p[k] = if mask & (1 << b) == 0 { first } else { -first };
        }
        out.push(p);
    }
    out
}

/// Explicit displacement: a parameter `t` of the requested sign and a radius
/// `theta` such that `u_alpha(t) g` has a vector with norm below `theta` and
/// `eps1 < |N| < eps2`. The vector is `z = w + l s` with the sign pattern
/// the construction needs, `l` minimal, and `t` the midpoint of the interval of
/// admissible parameters.
pub fn root_displacement(
    g: &Grid,
    alpha: RootIndex,
    eps1: &RealScalar,
    eps2: &RealScalar,
    sign: Sign,
    cap: usize,
) -> Result<Displacement, RootError> {
    let d = g.dim();
    alpha.check(d)?;
    let p = g.prec();
    let cons = constraints(alpha, sign);
    let pats = patterns(d, &cons);
    let w = g.shift();
    let one = RealScalar::one(p);
    let mut radius = 1.5f64;
    let lattice_grid = Grid::lattice_only(g.lattice().clone());
    loop {
        let cands = enumerate_box(&lattice_grid, &RealScalar::from_f64(radius, p), cap)?;
        // best: (theta upper bound, pattern index, distance to pattern, coords)
        let mut best: Option<(f64, usize, f64, Vec<i64>, i64, RVector)> = None;
        for c in &cands {
            let signs: Vec<Option<Ordering>> = c.vector.iter().map(|x| x.sign()).collect();
            if signs.iter().any(|s| !matches!(s, Some(Ordering::Less) | Some(Ordering::Greater))) {
                continue;
            }
            let sv: Vec<i32> = signs
                .iter()
                .map(|s| if *s == Some(Ordering::Greater) { 1 } else { -1 })
                .collect();
            let Some(pi) = pats.iter().position(|pt| *pt == sv) else {
                continue;
            };
            // minimal l >= 0 with sigma_k (w_k + l s_k) >= 1 for every k
            let mut ell = 0i64;
            for k in 0..d {
                let sk = c.vector[k].abs();
                let wk = if sv[k] > 0 { w[k].clone() } else { -&w[k] };
                let need = &(&one - &wk) / &sk;
                let up = need.hi().to_f64().ceil();
                ell = ell.max(up.max(0.0) as i64);
            }
            let z: RVector = (0..d).map(|k| &w[k] + &c.vector[k].mul_int(ell)).collect();
            let ok = (0..d).all(|k| {
                let v = if sv[k] > 0 { z[k].clone() } else { -&z[k] };
                v.definitely_ge(&one)
            });
            if !ok {
                continue;
            }
            let (t, image) = displaced(&z, alpha, sign, eps1, eps2);
            let theta = vec_sup_norm(&image).hi().to_f64();
            let _ = t;
            let dpat: f64 = (0..d)
                .map(|k| (c.vector[k].to_f64() - sv[k] as f64).abs())
                .fold(0.0, f64::max);
            let key = (theta, pi, dpat, c.coords.clone());
            let better = match &best {
                None => true,
                Some(b) => {
                    (key.0, key.1, key.2, &key.3).partial_cmp(&(b.0, b.1, b.2, &b.3)) == Some(Ordering::Less)
                }
            };
            if better {
                best = Some((key.0, key.1, key.2, key.3, ell, z));
            }
        }
        if let Some((_, _, _, s_coords, ell, z)) = best {
            let (t, image) = displaced(&z, alpha, sign, eps1, eps2);
            let t = RealScalar::from_float(t.value());
            let moved = apply_root(alpha, &t, g)?;
            let image_pt = {
                let e = AffineElement::root(alpha, &t, d);
                let _ = image;
                e.apply_vec(&z)
            };
            let coords = moved.coords_of(&image_pt)?;
            let witness = Witness::from_coords(&moved, &coords, None);
            let n = &witness.abs_product;
            if !(n.definitely_gt(eps1) && n.definitely_lt(eps2)) {
                return Err(RootError::Undecided(format!(
                    "|N| = {} not decided inside the window",
                    n.to_string_digits(12)
                )));
            }
            let theta_f = witness.sup_norm.hi().clone() * Float::with_val(p, 1.0 + 1.0 / (1u64 << 40) as f64);
            let theta = RealScalar::from_float(Float::with_val_round(p, theta_f, rug::float::Round::Up).0);
            return Ok(Displacement {
                t,
                theta,
                witness,
                z,
                ell,
                s_coords,
            });
        }
        radius *= 2.0;
        if radius > 1e6 {
            return Err(RootError::NoSignVector(radius));
        }
    }
}

/// The admissible-interval midpoint `t` for `z` and the displaced vector.
fn displaced(z: &[RealScalar], alpha: RootIndex, sign: Sign, eps1: &RealScalar, eps2: &RealScalar) -> (RealScalar, RVector) {
    let d = z.len();
    let mid_eps = (eps1 + eps2).div_int(2);
    let (i, others) = match alpha {
        RootIndex::V { i } => (i, (0..d).filter(|&k| k != i).collect::<Vec<_>>()),
        RootIndex::G0 { i, .. } => (i, (0..d).filter(|&k| k != i).collect::<Vec<_>>()),
    };
    let ni: RVector = others.iter().map(|&k| z[k].clone()).collect();
    let ni_abs = vec_product(&ni).abs();
    let s = RealScalar::from_int(sign.as_f64() as i64, z[0].prec());
    let t = match alpha {
        RootIndex::V { .. } => &(&s * &(&mid_eps / &ni_abs)) - &z[i],
        RootIndex::G0 { j, .. } => {
            let zj_abs = z[j].abs();
            &(&s * &(&mid_eps / &(&ni_abs * &zj_abs))) - &(&z[i] / &z[j])
        }
    };
    let mut image = z.to_vec();
    match alpha {
        RootIndex::V { i } => image[i] = &image[i] + &t,
        RootIndex::G0 { i, j } => image[i] = &image[i] + &(&t * &z[j]),
    }
    (t, image)
}

/// Constants of the perturbation estimate for window membership.
///
/// If `|z| < theta` and `h = (v, g)` has `|v| < eps`, `|g - e| < eps`, and
/// `|a| <= eps^(-1/(2d))`, then `w = (a h a^-1) z` satisfies
/// `|w - z| < delta = sqrt(eps) (d theta + 1)` and
/// `|N(w) - N(z)| <= C sqrt(eps)` with `C = d (d theta + 1) (2 theta)^(d-1)`
/// (valid while `delta <= theta`). Hence `c1 = 1 - C sqrt(eps) / eps1` and
/// `c2 = 1 + C sqrt(eps) / eps2`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerturbationConstants {
    pub delta: f64,
    pub c_theta: f64,
    pub c1: f64,
    pub c2: f64,
}

pub fn perturbation_constants(d: usize, theta: f64, eps: f64, eps1: f64, eps2: f64) -> PerturbationConstants {
    let df = d as f64;
    let se = eps.sqrt();
    let delta = se * (df * theta + 1.0);
    let c_theta = df * (df * theta + 1.0) * (2.0 * theta).powi(d as i32 - 1);
    PerturbationConstants {
        delta,
        c_theta,
        c1: (1.0 - c_theta * se / eps1).max(0.0),
        c2: 1.0 + c_theta * se / eps2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::Rational;

    fn r(x: f64) -> RealScalar {
        RealScalar::from_f64(x, 256)
    }

    #[test]
    fn root_names_round_trip() {
        for alpha in RootIndex::all(3) {
            let s = alpha.to_string();
            assert_eq!(s.parse::<RootIndex>().unwrap(), alpha);
        }
        assert_eq!(RootIndex::G0 { i: 1, j: 0 }.to_string(), "a_21");
        assert!("a_11".parse::<RootIndex>().is_err());
    }

    #[test]
    fn shear_acts_on_points() {
        let e = AffineElement::root(RootIndex::G0 { i: 1, j: 0 }, &r(0.5), 3);
        let v = e.apply_vec(&[r(2.0), r(1.0), r(3.0)]);
        assert_eq!(v[1].to_f64(), 2.0);
        let g = Grid::lattice_only(Lattice::standard(3, 256));
        let moved = apply_root(RootIndex::V { i: 0 }, &r(0.3), &g).unwrap();
        assert!((moved.shift()[0].to_f64() - 0.3).abs() < 1e-30);
    }

    #[test]
    fn diag_renormalizes() {
        let a = DiagElement::new(vec![r(2.0), r(3.0), r(4.0)]).unwrap();
        assert!(a.product().contains_rational(&Rational::from(1)) || (a.product().to_f64() - 1.0).abs() < 1e-60);
        assert!(DiagElement::new(vec![r(-1.0), r(1.0), r(1.0)]).is_err());
    }

    #[test]
    fn identity_and_diagonal_decompose_trivially() {
        let e = AffineElement::identity(3, 256);
        let c = decompose_near_identity(&e, CHART_RADIUS).unwrap();
        assert!(c.box_size().to_f64() < 1e-60);
        let a = DiagElement::new(vec![r(1.01), r(0.995), r(1.0)]).unwrap();
        let c = decompose_near_identity(&AffineElement::diag(&a), CHART_RADIUS).unwrap();
        assert!(c.shear_size().to_f64() < 1e-60);
        for (x, y) in c.a.entries().iter().zip(a.entries()) {
            assert!((x.to_f64() - y.to_f64()).abs() < 1e-30);
        }
    }

    #[test]
    fn membership_examples() {
        let eps = r(0.01);
        let id = RMatrix::identity(3, 256);
        assert!(membership_u(&id, &eps, CHART_RADIUS));
        let a = DiagElement::from_entries_unchecked(vec![r(1.005), &RealScalar::one(256) / &r(1.005), r(1.0)]);
        assert!(membership_u(&a.matrix(), &eps, CHART_RADIUS));
        let u = AffineElement::root(RootIndex::G0 { i: 1, j: 0 }, &r(0.02), 3);
        assert!(!membership_u(&u.linear, &eps, CHART_RADIUS));
    }

    #[test]
    fn displacement_on_half_shifted_cube() {
        let g = Grid::new(Lattice::standard(3, 256), vec![r(0.5), r(0.5), r(0.5)]).unwrap();
        let d = root_displacement(&g, RootIndex::V { i: 0 }, &r(0.1), &r(0.2), Sign::Plus, 1_000_000).unwrap();
        assert_eq!(d.ell, 2);
        for zk in &d.z {
            assert_eq!(zk.to_f64(), -1.5);
        }
        let lo = 0.1 / 2.25 + 1.5;
        let hi = 0.2 / 2.25 + 1.5;
        assert!((d.t.to_f64() - (lo + hi) / 2.0).abs() < 1e-15);
        let dm = root_displacement(&g, RootIndex::V { i: 0 }, &r(0.1), &r(0.2), Sign::Minus, 1_000_000).unwrap();
        assert!(dm.t.to_f64() < 0.0);
        assert!(dm.witness.abs_product.to_f64() > 0.1 && dm.witness.abs_product.to_f64() < 0.2);
    }

    fn sample_chart(eps: f64, seed: u64) -> ChartCoords {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let logs: Vec<f64> = loop {
            let h: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0) * (1.0 + eps).ln()).collect();
            let l = vec![h[0], h[1], -h[0] - h[1]];
            if l.iter().all(|x| (x.exp() - 1.0).abs() < eps) {
                break l;
            }
        };
        let a = DiagElement::from_log_f64(&logs, 256);
        let t = RootIndex::g0_roots(3)
            .into_iter()
            .map(|r| {
                let corner = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                (r, r_(corner * eps * rng.random_range(0.9..1.0)))
            })
            .collect();
        ChartCoords { a, t }
    }

    fn r_(x: f64) -> RealScalar {
        RealScalar::from_f64(x, 256)
    }

    #[test]
    fn chart_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            // random g with |g - e| = 0.05 and det one
            let mut m = RMatrix::identity(3, 256);
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        m.set(i, j, r(rng.random_range(-0.05..0.05)));
                    }
                }
            }
            m.set(0, 1, r(0.05));
            m.set(0, 0, r(1.0 + rng.random_range(-0.05..0.05)));
            m.set(1, 1, r(1.0 + rng.random_range(-0.05..0.05)));
            // det is affine in m22; solve for det = 1
            let minor = &(m.get(0, 0) * m.get(1, 1)) - &(m.get(0, 1) * m.get(1, 0));
            m.set(2, 2, r(1.0));
            let rest = &m.det() - &minor;
            let m22 = &(&RealScalar::one(256) - &rest) / &minor;
            m.set(2, 2, m22);
            let g = AffineElement::linear_only(m.clone()).unwrap();
            let c = decompose_near_identity(&g, CHART_RADIUS).unwrap();
            let back = c.compose().linear;
            assert!(back.sub(&m).max_abs().to_f64() < 1e-20);
        }
    }

    #[test]
    fn chart_box_inside_max_norm_ball() {
        let mut worst = 0.0f64;
        for (k, eps) in [0.01, 0.05, 0.1, 0.3, 0.6, 0.99].iter().enumerate() {
            for s in 0..200 {
                let c = sample_chart(*eps, (k * 1000 + s) as u64);
                let d = c.compose().dist_to_identity().to_f64();
                worst = worst.max(d / eps);
            }
        }
        assert!(worst < C0_D3, "measured ratio {worst}");
    }

    #[test]
    fn perturbation_constants_shape() {
        let c = perturbation_constants(3, 1.0, 1e-6, 0.1, 0.2);
        assert!((c.c_theta - 3.0 * 4.0 * 4.0).abs() < 1e-12);
        assert!((c.c1 - (1.0 - 48.0e-3 / 0.1)).abs() < 1e-12);
        assert!(c.c2 > 1.0);
    }
}
