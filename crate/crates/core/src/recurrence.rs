//! Diagonal flow orbits on the space of unimodular lattices: neighborhood
//! certificates around a base lattice, first hitting times of shrinking
//! neighborhoods, and a Monte-Carlo probe of orbit averages.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compact_orbit::{build_compact_point, TotallyRealField, DEFAULT_UNIT_BOUND};
use crate::grid::{GridError, Lattice};
use crate::linalg::{int_mat_from_i64, int_mat_mul, lll_columns, solve_rational, IntMatrix};
use crate::matrix::RMatrix;
use crate::root_action::{chart_size_f64, decompose_near_identity, AffineElement, RootIndex};
use crate::scalar::RealScalar;

/// Lattice vectors kept per target basis vector in the certificate search.
pub const DEFAULT_SHORT_VECTORS: usize = 12;
/// Domain of the chart inversion used for neighborhood membership.
pub const NEIGHBORHOOD_RADIUS: f64 = 0.5;

#[derive(Debug, Error)]
pub enum RecurrenceError {
    #[error("flow direction must be nonzero with zero sum")]
    BadDirection,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("base lattice: {0}")]
    Base(String),
}

/// The one-parameter group `a_t = diag(exp(c t))` with `sum c = 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowSpec {
    pub direction: Vec<f64>,
    pub t_max: f64,
    /// Fraction of the Lipschitz-safe step actually taken.
    pub safety: f64,
}

impl FlowSpec {
    pub fn new(direction: Vec<f64>, t_max: f64) -> Result<Self, RecurrenceError> {
        let s: f64 = direction.iter().sum();
        let m = direction.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if direction.len() < 2 || m == 0.0 || s.abs() > 1e-12 * m {
            return Err(RecurrenceError::BadDirection);
        }
        if !(t_max >= 0.0) {
            return Err(RecurrenceError::Argument("t_max must be nonnegative".into()));
        }
        Ok(FlowSpec {
            direction,
            t_max,
            safety: 0.5,
        })
    }

    /// `diag(e^{-(d-1)t}, e^t, ..., e^t)`.
    pub fn horospherical(d: usize, t_max: f64) -> Self {
        let mut c = vec![1.0; d];
        c[0] = -((d - 1) as f64);
        FlowSpec::new(c, t_max).expect("valid direction")
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    /// `max c - min c`: the fastest rate of any root under the flow.
    pub fn spread(&self) -> f64 {
        let hi = self.direction.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.direction.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    }

    /// Step such that the chart box size moves by at most `safety * eps / 2`.
    pub fn step(&self, eps: f64) -> f64 {
        self.safety * (eps / 2.0) / (self.spread() * (1.0 + eps))
    }

    /// Working precision that survives the growth of basis entries up to `t_max`.
    pub fn required_prec(&self) -> u32 {
        128 + (2.0 * self.spread() * self.t_max / std::f64::consts::LN_2).ceil() as u32
    }

    pub fn matrix(&self, t: f64, prec: u32) -> RMatrix {
        let tt = RealScalar::from_f64(t, prec);
        let e: Vec<RealScalar> = self
            .direction
            .iter()
            .map(|&c| (&RealScalar::from_f64(c, prec) * &tt).exp())
            .collect();
        RMatrix::diagonal(&e)
    }

    fn matrix_f64(&self, t: f64) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| if i == j { (self.direction[i] * t).exp() } else { 0.0 })
    }
}

/// Base lattice with an LLL-reduced basis cached in both precisions.
#[derive(Clone, Debug)]
pub struct Target {
    pub lattice: Lattice,
    reduced: DMatrix<f64>,
    reduced_inv: DMatrix<f64>,
    reduced_hp_inv: RMatrix,
    /// `reduced = basis * v`; stored as `v^-1` to report certificates in the given basis.
    v_inv: IntMatrix,
}

impl Target {
    pub fn new(lattice: Lattice) -> Result<Self, RecurrenceError> {
        let (reduced, v) = lll_columns(&lattice.basis().to_f64());
        let reduced_inv = reduced
            .clone()
            .try_inverse()
            .ok_or_else(|| RecurrenceError::Base("singular basis".into()))?;
        let hp = lattice.basis().mul_int_mat(&v);
        let reduced_hp_inv = hp.inverse().ok_or_else(|| RecurrenceError::Base("singular basis".into()))?;
        let v_inv = unimodular_inverse(&v).ok_or_else(|| RecurrenceError::Base("reduction not unimodular".into()))?;
        Ok(Target {
            lattice,
            reduced,
            reduced_inv,
            reduced_hp_inv,
            v_inv,
        })
    }

    /// The compact-orbit lattice of the conductor-7 cubic order.
    pub fn cubic(prec: u32) -> Result<Self, RecurrenceError> {
        let orbit = build_compact_point(&TotallyRealField::conductor7(), prec, DEFAULT_UNIT_BOUND)
            .map_err(|e| RecurrenceError::Base(e.to_string()))?;
        Target::new(orbit.lattice)
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn prec(&self) -> u32 {
        self.lattice.prec()
    }
}

fn unimodular_inverse(m: &[Vec<i64>]) -> Option<IntMatrix> {
    let n = m.len();
    let a: Vec<Vec<Rational>> = m.iter().map(|r| r.iter().map(|&x| Rational::from(x)).collect()).collect();
    let mut inv = vec![vec![Integer::new(); n]; n];
    for j in 0..n {
        let e: Vec<Rational> = (0..n).map(|i| Rational::from((i == j) as i64)).collect();
        let col = solve_rational(&a, &e)?;
        for (i, c) in col.into_iter().enumerate() {
            if *c.denom() != 1 {
                return None;
            }
            inv[i][j] = c.numer().clone();
        }
    }
    Some(inv)
}

/// Candidate certificate found by the double-precision screen: `gamma` acts on
/// the columns of the screened basis.
#[derive(Clone, Debug)]
struct Screened {
    gamma: Vec<Vec<i64>>,
    size: f64,
}

/// Short-vector matching: for each reduced target vector `c_j`, lattice vectors
/// of `b` near `c_j` (Babai point and its unit box, the `n_s` closest within
/// the chart domain), combined into bases `B gamma` and scored by the chart
/// box size of `B gamma C^-1`. Sorted by size.
fn screen(b: &DMatrix<f64>, target: &Target, n_s: usize, radius: f64) -> Vec<Screened> {
    let d = b.nrows();
    let Some(b_inv) = b.clone().try_inverse() else {
        return Vec::new();
    };
    let det_b = b.determinant();
    let mut lists: Vec<Vec<(Vec<i64>, nalgebra::DVector<f64>)>> = Vec::with_capacity(d);
    let offsets = 3usize.pow(d as u32);
    for j in 0..d {
        let c = target.reduced.column(j).into_owned();
        let bound = d as f64 * radius * c.amax();
        let k0: Vec<i64> = (&b_inv * &c).iter().map(|x| x.round() as i64).collect();
        let mut found: Vec<(f64, Vec<i64>, nalgebra::DVector<f64>)> = Vec::new();
        for mut idx in 0..offsets {
            let mut k = k0.clone();
            for kk in k.iter_mut() {
                *kk += (idx % 3) as i64 - 1;
                idx /= 3;
            }
            let v = b * nalgebra::DVector::from_iterator(d, k.iter().map(|&x| x as f64));
            let dist = (&v - &c).amax();
            if dist <= bound {
                found.push((dist, k, v));
            }
        }
        found.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.cmp(&y.1)));
        found.truncate(n_s);
        if found.is_empty() {
            return Vec::new();
        }
        lists.push(found.into_iter().map(|(_, k, v)| (k, v)).collect());
    }
    let mut out = Vec::new();
    let mut choice = vec![0usize; d];
    let ident = DMatrix::<f64>::identity(d, d);
    'outer: loop {
        let vb = DMatrix::from_fn(d, d, |i, j| lists[j][choice[j]].1[i]);
        let h = &vb * &target.reduced_inv;
        if (&h - &ident).amax() < radius {
            let gamma: Vec<Vec<i64>> = (0..d).map(|i| (0..d).map(|j| lists[j][choice[j]].0[i]).collect()).collect();
            let gm = DMatrix::from_fn(d, d, |i, j| gamma[i][j] as f64);
            let dg = gm.determinant().round();
            if dg.abs() == 1.0 && dg * det_b > 0.0 {
                if let Some(size) = chart_size_f64(&h, radius) {
                    out.push(Screened { gamma, size });
                }
            }
        }
        let mut k = d;
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < lists[k].len() {
                break;
            }
            choice[k] = 0;
        }
    }
    out.sort_by(|x, y| x.size.total_cmp(&y.size).then_with(|| x.gamma.cmp(&y.gamma)));
    out
}

/// Outcome of the neighborhood test.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum NeighborhoodVerdict {
    /// `basis(x) * gamma * basis(x0)^-1` has chart box size `size < eps`.
    Member { gamma: Vec<Vec<String>>, size: f64 },
    /// No certificate among the matched short vectors; `best` is the smallest
    /// screened box size, if any candidate landed in the chart domain.
    NoWithinSearch { best: Option<f64> },
}

impl NeighborhoodVerdict {
    pub fn is_member(&self) -> bool {
        matches!(self, NeighborhoodVerdict::Member { .. })
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SearchConfig {
    pub short_vectors: usize,
    pub radius: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            short_vectors: DEFAULT_SHORT_VECTORS,
            radius: NEIGHBORHOOD_RADIUS,
        }
    }
}

/// High-precision box size of `m * gamma * C^-1` (`m` an unreduced basis).
fn verified_size(m: &RMatrix, gamma: &IntMatrix, target: &Target, radius: f64) -> Option<RealScalar> {
    let h = m.mul(&RMatrix::from_integer(gamma, m.prec())).mul(&target.reduced_hp_inv);
    let g = AffineElement::linear_only(h).ok()?;
    decompose_near_identity(&g, radius).ok().map(|c| c.box_size())
}

fn to_strings(m: &IntMatrix) -> Vec<Vec<String>> {
    m.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect()
}

/// Whether `x` lies in the chart neighborhood of size `eps` around the target,
/// with the integer change of basis as certificate.
pub fn lattice_neighborhood_member(
    x: &Lattice,
    target: &Target,
    eps: &RealScalar,
    cfg: SearchConfig,
) -> Result<NeighborhoodVerdict, RecurrenceError> {
    if x.dim() != target.dim() {
        return Err(RecurrenceError::Dimension {
            expected: target.dim(),
            got: x.dim(),
        });
    }
    if !(eps.to_f64() < cfg.radius) {
        return Err(RecurrenceError::Argument(format!("eps must be below the chart radius {}", cfg.radius)));
    }
    let (bred, u) = lll_columns(&x.basis().to_f64());
    let cands = screen(&bred, target, cfg.short_vectors, cfg.radius);
    let best = cands.first().map(|c| c.size);
    let ef = eps.to_f64();
    for c in cands.iter().take_while(|c| c.size < ef * (1.0 + 1e-6) + 1e-12) {
        let gamma = int_mat_mul(&int_mat_from_i64(&u), &int_mat_from_i64(&c.gamma));
        if let Some(size) = verified_size(x.basis(), &gamma, target, cfg.radius) {
            if size.definitely_lt(eps) {
                let cert = int_mat_mul(&gamma, &target.v_inv);
                return Ok(NeighborhoodVerdict::Member {
                    gamma: to_strings(&cert),
                    size: size.to_f64(),
                });
            }
        }
    }
    Ok(NeighborhoodVerdict::NoWithinSearch { best })
}

/// FNV-1a over the bit patterns of the double-precision basis.
pub fn lattice_hash(x: &Lattice) -> String {
    let b = x.basis().to_f64();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in b.iter() {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TargetShape {
    /// `U_eps \ U_{eps/2}`.
    Annulus,
    /// `U_eps`.
    Ball,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HittingRecord {
    pub start_hash: String,
    pub eps: f64,
    pub beta: Option<f64>,
    pub shape: TargetShape,
    pub t_hit: Option<f64>,
    /// High-precision box size at the hit lies in the target set.
    pub verified: bool,
    /// Chart box size at the hit.
    pub size: Option<f64>,
    /// Basis change of the start lattice realising the hit.
    pub certificate: Option<Vec<Vec<String>>>,
    pub samples: usize,
    /// Screened hits rejected by the high-precision check.
    pub rejected: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HitConfig {
    pub eps: f64,
    pub beta: Option<f64>,
    pub shape: TargetShape,
    pub search: SearchConfig,
}

impl HitConfig {
    pub fn annulus(eps: f64) -> Self {
        HitConfig {
            eps,
            beta: None,
            shape: TargetShape::Annulus,
            search: SearchConfig::default(),
        }
    }

    /// `eps = t_max^-beta`.
    pub fn from_beta(t_max: f64, beta: f64) -> Result<Self, RecurrenceError> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(RecurrenceError::Argument("beta must lie in (0, 1)".into()));
        }
        if !(t_max > 1.0) {
            return Err(RecurrenceError::Argument("t_max must exceed 1".into()));
        }
        Ok(HitConfig {
            eps: t_max.powf(-beta),
            beta: Some(beta),
            ..HitConfig::annulus(0.0)
        })
    }

    fn in_window(&self, s: f64) -> bool {
        s < self.eps && (self.shape == TargetShape::Ball || s >= self.eps / 2.0)
    }
}

/// Scan `t in [0, t_max]` for the first time `a_t x` enters the target set.
/// Steps never exceed the Lipschitz-safe bound, so the box size moves by at
/// most a quarter of `eps` per step and the annulus cannot be stepped over.
/// Every reported hit is re-verified in high precision from the start basis.
pub fn first_hitting(x: &Lattice, target: &Target, flow: &FlowSpec, cfg: &HitConfig) -> Result<HittingRecord, RecurrenceError> {
    let d = target.dim();
    if x.dim() != d || flow.dim() != d {
        return Err(RecurrenceError::Dimension {
            expected: d,
            got: if x.dim() != d { x.dim() } else { flow.dim() },
        });
    }
    if !(cfg.eps > 0.0 && cfg.eps < cfg.search.radius) {
        return Err(RecurrenceError::Argument(format!(
            "eps must lie in (0, {})",
            cfg.search.radius
        )));
    }
    let prec = x.prec().max(target.prec());
    let step = flow.step(cfg.eps);
    let (mut bred, u) = lll_columns(&x.basis().to_f64());
    let mut w = int_mat_from_i64(&u);
    let mut rec = HittingRecord {
        start_hash: lattice_hash(x),
        eps: cfg.eps,
        beta: cfg.beta,
        shape: cfg.shape,
        t_hit: None,
        verified: false,
        size: None,
        certificate: None,
        samples: 0,
        rejected: 0,
    };
    let eps_hp = RealScalar::from_f64(cfg.eps, prec);
    let half = eps_hp.div_int(2);
    let mut t = 0.0f64;
    loop {
        rec.samples += 1;
        let cands = screen(&bred, target, cfg.search.short_vectors, cfg.search.radius);
        if let Some(best) = cands.first() {
            if cfg.in_window(best.size) {
                let gamma = int_mat_mul(&w, &int_mat_from_i64(&best.gamma));
                let m = flow.matrix(t, prec).mul(&x.basis().with_prec(prec));
                let ok = verified_size(&m, &gamma, target, cfg.search.radius).filter(|s| {
                    s.definitely_lt(&eps_hp) && (cfg.shape == TargetShape::Ball || s.definitely_ge(&half))
                });
                match ok {
                    Some(s) => {
                        rec.t_hit = Some(t);
                        rec.verified = true;
                        rec.size = Some(s.to_f64());
                        rec.certificate = Some(to_strings(&gamma));
                        return Ok(rec);
                    }
                    None => rec.rejected += 1,
                }
            }
        }
        if t >= flow.t_max {
            return Ok(rec);
        }
        let dt = step.min(flow.t_max - t);
        t += dt;
        bred = flow.matrix_f64(dt) * bred;
        let (r, u2) = lll_columns(&bred);
        bred = r;
        w = int_mat_mul(&w, &int_mat_from_i64(&u2));
    }
}

/// The near-identity `h` with `a_t x = h x0` at a verified hit, rebuilt from
/// the certificate as `a_t B_x gamma C^-1` (`C` the reduced target basis).
pub fn hit_element(x: &Lattice, target: &Target, flow: &FlowSpec, rec: &HittingRecord) -> Option<RMatrix> {
    let t = rec.t_hit.filter(|_| rec.verified)?;
    let gamma: IntMatrix = rec
        .certificate
        .as_ref()?
        .iter()
        .map(|r| r.iter().map(|s| s.parse::<Integer>().ok()).collect::<Option<Vec<_>>>())
        .collect::<Option<_>>()?;
    let prec = x.prec().max(target.prec());
    Some(
        flow.matrix(t, prec)
            .mul(&x.basis().with_prec(prec))
            .mul(&RMatrix::from_integer(&gamma, prec))
            .mul(&target.reduced_hp_inv),
    )
}

/// Random unimodular lattice: a Gaussian matrix scaled by `|det|^(-1/d)`, with
/// the first column negated when the determinant is negative. Not Haar-exact.
pub fn random_lattice(d: usize, seed: u64, index: u64, prec: u32) -> Result<Lattice, RecurrenceError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    loop {
        let m = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
        let det = m.determinant();
        if det.abs() < 1e-3 {
            continue;
        }
        let mut hp = RMatrix::from_f64(&m, prec);
        if det < 0.0 {
            for i in 0..d {
                let v = -hp.get(i, 0).clone();
                hp.set(i, 0, v);
            }
        }
        let scale = hp.det().ln().div_int(-(d as i64)).exp();
        let hp = RMatrix::from_fn(d, d, |i, j| hp.get(i, j) * &scale);
        return Ok(Lattice::new(hp)?);
    }
}

/// `first_hitting` from `count` seeded random starts, in parallel.
pub fn random_start_hitting(
    seed: u64,
    count: usize,
    target: &Target,
    flow: &FlowSpec,
    cfg: &HitConfig,
) -> Result<Vec<HittingRecord>, RecurrenceError> {
    let prec = flow.required_prec().max(target.prec());
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let x = random_lattice(target.dim(), seed, i, prec)?;
            first_hitting(&x, target, flow, cfg)
        })
        .collect()
}

/// `I + sum_i u_i E_{i+1, 1}`: the expanding horospherical element for the
/// flow `diag(e^{-(d-1)t}, e^t, ..., e^t)`.
pub fn horospherical_element(u: &[f64], prec: u32) -> RMatrix {
    let d = u.len() + 1;
    RMatrix::from_fn(d, d, |i, j| {
        if i == j {
            RealScalar::one(prec)
        } else if j == 0 {
            RealScalar::from_f64(u[i - 1], prec)
        } else {
            RealScalar::zero(prec)
        }
    })
}

/// First hitting times of `u x` under the horospherical flow for each `u` in the grid.
pub fn horospherical_hitting(
    x: &Lattice,
    u_grid: &[Vec<f64>],
    target: &Target,
    t_max: f64,
    cfg: &HitConfig,
) -> Result<Vec<HittingRecord>, RecurrenceError> {
    let d = target.dim();
    let flow = FlowSpec::horospherical(d, t_max);
    let prec = flow.required_prec().max(x.prec());
    let xp = Lattice::new(x.basis().with_prec(prec))?;
    u_grid
        .par_iter()
        .map(|u| {
            if u.len() + 1 != d {
                return Err(RecurrenceError::Dimension {
                    expected: d - 1,
                    got: u.len(),
                });
            }
            let ux = xp.transform(&horospherical_element(u, prec))?;
            first_hitting(&ux, target, &flow, cfg)
        })
        .collect()
}

/// Start lattice whose orbit passes through `u_alpha(s) x0` at time `tau`.
pub fn planted_start(target: &Target, flow: &FlowSpec, tau: f64, alpha: RootIndex, s: f64) -> Result<Lattice, RecurrenceError> {
    let d = target.dim();
    let prec = target.prec();
    alpha.check(d).map_err(|e| RecurrenceError::Argument(e.to_string()))?;
    let u = AffineElement::root(alpha, &RealScalar::from_f64(s, prec), d).linear;
    let m = flow.matrix(-tau, prec).mul(&u);
    Ok(target.lattice.transform(&m)?)
}

/// Observable on lattices for the orbit-average probe.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum Observable {
    Constant(f64),
    /// 1 on chart boxes of size `<= radius`, decaying linearly to 0 at `radius + width`.
    SmoothBox { radius: f64, width: f64 },
}

impl Observable {
    fn eval(&self, b: &DMatrix<f64>, target: &Target, search: SearchConfig) -> f64 {
        match *self {
            Observable::Constant(c) => c,
            Observable::SmoothBox { radius, width } => match screen(b, target, search.short_vectors, search.radius).first() {
                Some(c) if c.size <= radius => 1.0,
                Some(c) if c.size < radius + width => (radius + width - c.size) / width,
                _ => 0.0,
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AverageRow {
    pub t: f64,
    pub mean: f64,
    pub variance: f64,
    pub samples: usize,
}

/// Sample mean and variance over random starts of the time average
/// `(1/T) int_0^T f(a_t x) dt` (left Riemann sums on a fixed step), for each
/// `T` in `t_list`; `T = 0` evaluates `f(x)`.
pub fn orbit_average_probe(
    f: Observable,
    target: &Target,
    flow: &FlowSpec,
    t_list: &[f64],
    samples: usize,
    seed: u64,
    step: f64,
) -> Result<Vec<AverageRow>, RecurrenceError> {
    if samples < 2 || !(step > 0.0) || t_list.iter().any(|t| !(*t >= 0.0)) {
        return Err(RecurrenceError::Argument("need samples >= 2, step > 0 and T >= 0".into()));
    }
    let d = target.dim();
    let search = SearchConfig::default();
    let t_end = t_list.iter().cloned().fold(0.0, f64::max);
    let a = flow.matrix_f64(step);
    let per_start: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let x = random_lattice(d, seed, i, 128)?;
            let (mut b, _) = lll_columns(&x.basis().to_f64());
            let f0 = f.eval(&b, target, search);
            let n = (t_end / step).round() as usize;
            let mut prefix = Vec::with_capacity(n + 1);
            prefix.push(0.0);
            let mut acc = 0.0;
            let mut fv = f0;
            for _ in 0..n {
                acc += fv * step;
                prefix.push(acc);
                b = lll_columns(&(&a * &b)).0;
                fv = f.eval(&b, target, search);
            }
            Ok(t_list
                .iter()
                .map(|&t| {
                    if t == 0.0 {
                        f0
                    } else {
                        let k = ((t / step).round() as usize).min(n);
                        prefix[k] / (k as f64 * step)
                    }
                })
                .collect())
        })
        .collect::<Result<_, RecurrenceError>>()?;
    Ok(t_list
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let vals: Vec<f64> = per_start.iter().map(|v| v[k]).collect();
            let mean = vals.iter().sum::<f64>() / samples as f64;
            let variance = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
            AverageRow {
                t,
                mean,
                variance,
                samples,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shear(target: &Target, s: f64) -> Lattice {
        let prec = target.prec();
        let u = AffineElement::root(RootIndex::G0 { i: 1, j: 0 }, &RealScalar::from_f64(s, prec), 3).linear;
        target.lattice.transform(&u).unwrap()
    }

    #[test]
    fn base_point_and_shear_are_members() {
        let target = Target::cubic(256).unwrap();
        let eps = RealScalar::from_f64(0.1, 256);
        match lattice_neighborhood_member(&target.lattice, &target, &eps, SearchConfig::default()).unwrap() {
            NeighborhoodVerdict::Member { gamma, size } => {
                assert!(size < 1e-20);
                assert_eq!(gamma, vec![vec!["1", "0", "0"], vec!["0", "1", "0"], vec!["0", "0", "1"]]);
            }
            v => panic!("{v:?}"),
        }
        let x = shear(&target, 0.05);
        match lattice_neighborhood_member(&x, &target, &eps, SearchConfig::default()).unwrap() {
            NeighborhoodVerdict::Member { gamma, size } => {
                assert!((size - 0.05).abs() < 1e-12);
                assert_eq!(gamma[0], vec!["1", "0", "0"]);
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn flowed_base_point_is_far() {
        let target = Target::cubic(256).unwrap();
        let flow = FlowSpec::new(vec![1.0, 0.0, -1.0], 10.0).unwrap();
        let x = target.lattice.transform(&flow.matrix(3.7, 256)).unwrap();
        let eps = RealScalar::from_f64(1e-3, 256);
        let v = lattice_neighborhood_member(&x, &target, &eps, SearchConfig::default()).unwrap();
        assert!(!v.is_member());
    }

    #[test]
    fn annulus_excludes_center_and_catches_start() {
        let target = Target::cubic(256).unwrap();
        let flow = FlowSpec::horospherical(3, 0.0);
        let r = first_hitting(&target.lattice, &target, &flow, &HitConfig::annulus(0.2)).unwrap();
        assert!(r.t_hit.is_none());
        let slow = FlowSpec::new(vec![-0.01, 0.005, 0.005], 1.0).unwrap();
        let x = shear(&target, 0.9 * 0.2);
        let r = first_hitting(&x, &target, &slow, &HitConfig::annulus(0.2)).unwrap();
        assert_eq!(r.t_hit, Some(0.0));
        assert!(r.verified);
    }

    #[test]
    fn planted_crossing_is_found() {
        let target = Target::cubic(384).unwrap();
        let flow = FlowSpec::horospherical(3, 3.0);
        let x = planted_start(&target, &flow, 2.0, RootIndex::G0 { i: 0, j: 1 }, 0.7 * 0.2).unwrap();
        let r = first_hitting(&x, &target, &flow, &HitConfig::annulus(0.2)).unwrap();
        let t = r.t_hit.expect("planted hit");
        assert!(t <= 2.0 + 1e-9 && r.verified);
    }

    #[test]
    fn constant_observable_has_zero_variance() {
        let target = Target::cubic(128).unwrap();
        let flow = FlowSpec::horospherical(3, 0.0);
        let rows = orbit_average_probe(Observable::Constant(0.3), &target, &flow, &[0.0, 1.0], 4, 1, 0.05).unwrap();
        assert!(rows.iter().all(|r| r.variance.abs() < 1e-24 && (r.mean - 0.3).abs() < 1e-12));
    }
}
