//! Approximating a positive target by power products `l1^a * l2^b` of two
//! multiplicatively independent numbers, and its use on root characters of
//! the unit stabilizer.

use std::cmp::Ordering;

use rug::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compact_orbit::{CompactOrbit, SubgroupB1};
use crate::root_action::{DiagElement, RootIndex};
use crate::scalar::{ExactReal, RealScalar};

/// Default cap on the Baker exponent used as a stopping rule.
pub const DEFAULT_ETA_CAP: f64 = 3.0;

/// Largest exponent box (per coordinate, in units of `q`) searched when
/// polishing a ladder result.
pub const POLISH_CAP: i64 = 1_000_000;

/// Minimum search bound for an independence certificate.
pub const MIN_CERTIFICATE_BOUND: u64 = 20;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BakerError {
    #[error("interval comparison undecided at the working precision: {0}")]
    Undecided(String),
    #[error("relation found: {m1} * a1 + {m2} * a2 = 0 within the working precision")]
    Dependent { m1: i64, m2: i64 },
    #[error("numbers must be positive")]
    NonPositive,
    #[error("no convergent reaches 1/M = {0}")]
    NoCombination(f64),
    #[error("exponent size {size:e} exceeds |log t| M^(eta+1) = {cap:e} (eta cap {eta_cap})")]
    StepCap { size: f64, cap: f64, eta_cap: f64 },
    #[error("no certified independent pair among the character values of the stabilizer")]
    NoIndependentPair,
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Two positive numbers through their logarithms, with an independence
/// certificate up to `certified_bound` (0 when not certified).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogPair {
    pub labels: [String; 2],
    pub a1: RealScalar,
    pub a2: RealScalar,
    pub certified_bound: u64,
}

impl LogPair {
    /// Pair without an independence certificate.
    pub fn from_logs_unchecked(a1: RealScalar, a2: RealScalar) -> Self {
        LogPair {
            labels: ["l1".into(), "l2".into()],
            a1,
            a2,
            certified_bound: 0,
        }
    }

    /// Pair from logarithms, certified by showing `m1 a1 + m2 a2 != 0` for every
    /// `0 < max |m_i| <= bound`.
    pub fn certified(labels: [String; 2], a1: RealScalar, a2: RealScalar, bound: u64) -> Result<Self, BakerError> {
        let b = bound.max(MIN_CERTIFICATE_BOUND) as i64;
        for m2 in 0..=b {
            for m1 in -b..=b {
                if m2 == 0 && m1 <= 0 {
                    continue;
                }
                let c = &a1.mul_int(m1) + &a2.mul_int(m2);
                if c.contains_zero() {
                    return Err(BakerError::Dependent { m1, m2 });
                }
            }
        }
        Ok(LogPair {
            labels,
            a1,
            a2,
            certified_bound: b as u64,
        })
    }

    pub fn from_exact(l1: &ExactReal, l2: &ExactReal, prec: u32, bound: u64) -> Result<Self, BakerError> {
        let x1 = l1.approx(prec);
        let x2 = l2.approx(prec);
        if x1.is_positive() != Some(true) || x2.is_positive() != Some(true) {
            return Err(BakerError::NonPositive);
        }
        let lab = |e: &ExactReal| match e {
            ExactReal::Rational(q) => q.to_string(),
            other => other.approx(64).to_string_digits(12),
        };
        Self::certified([lab(l1), lab(l2)], x1.ln(), x2.ln(), bound)
    }

    pub fn prec(&self) -> u32 {
        self.a1.prec().max(self.a2.prec())
    }

    /// `l1^e1 l2^e2` as an interval.
    pub fn value(&self, e1: i64, e2: i64) -> RealScalar {
        (&self.a1.mul_int(e1) + &self.a2.mul_int(e2)).exp()
    }

    pub fn combination(&self, n1: i64, n2: i64) -> RealScalar {
        &self.a1.mul_int(n1) + &self.a2.mul_int(n2)
    }
}

/// Convergents and semiconvergents `p/q` of `x` with `q <= q_max`.
fn approximants(x: &RealScalar, q_max: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut r = x.clone();
    for _ in 0..200 {
        let Some(a) = r.floor_decided() else { break };
        let Some(a) = a.to_i64() else { break };
        // semiconvergents between the previous two convergents
        if q1 > 0 {
            let jmax = (a - 1).min((q_max - q0) / q1);
            for j in 1..=jmax.max(0) {
                let (p, q) = (p0 + j * p1, q0 + j * q1);
                if q > q_max {
                    break;
                }
                out.push((p, q));
            }
        }
        let (Some(p2), Some(q2)) = (a.checked_mul(p1).and_then(|v| v.checked_add(p0)), a.checked_mul(q1).and_then(|v| v.checked_add(q0))) else {
            break;
        };
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        if q1 > q_max {
            break;
        }
        out.push((p1, q1));
        let frac = &r - &RealScalar::from_int(a, r.prec());
        if frac.contains_zero() {
            break;
        }
        r = &RealScalar::one(r.prec()) / &frac;
    }
    out
}

/// Nonzero `(n1, n2)` with `|n1 a1 + n2 a2| <= 1/M` and the smallest
/// `max |n_i|`; ties go to the smaller combination. The result satisfies
/// `max |n_i| <= max(1, M max |a_i|)`.
pub fn small_log_combination(p: &LogPair, m: f64) -> Result<(i64, i64), BakerError> {
    if m < 1.0 {
        return Err(BakerError::Argument("M must be at least 1".into()));
    }
    let prec = p.prec();
    let inv_m = &RealScalar::one(prec) / &RealScalar::from_f64(m, prec);
    let (big, small, swapped) = if p.a1.abs().cmp_decided(&p.a2.abs()) == Some(Ordering::Less) {
        (&p.a2, &p.a1, true)
    } else {
        (&p.a1, &p.a2, false)
    };
    if big.contains_zero() {
        return Err(BakerError::Undecided("both logarithms contain zero".into()));
    }
    let amax = big.abs().hi().to_f64();
    let q_max = (m * amax).ceil() as i64 + 2;
    // n_big = p, n_small = q approximates x = -small / big
    let x = -(small / big);
    let mut cands: Vec<(i64, i64)> = vec![(1, 0), (0, 1)];
    for (pp, qq) in approximants(&x, q_max) {
        cands.push((pp, qq));
    }
    let mut best: Option<(i64, f64, (i64, i64))> = None;
    for (nb, ns) in cands {
        let comb = (&big.mul_int(nb) + &small.mul_int(ns)).abs();
        let ok = if comb.definitely_le(&inv_m) {
            true
        } else if comb.definitely_gt(&inv_m) {
            false
        } else {
            return Err(BakerError::Undecided(format!("|{nb} a + {ns} b| against 1/M")));
        };
        if !ok {
            continue;
        }
        let h = nb.abs().max(ns.abs());
        let c = comb.to_f64();
        let better = match &best {
            None => true,
            Some((bh, bc, _)) => h < *bh || (h == *bh && c < *bc),
        };
        if better {
            best = Some((h, c, (nb, ns)));
        }
    }
    let (h, _, (nb, ns)) = best.ok_or(BakerError::NoCombination(1.0 / m))?;
    assert!(h as f64 <= (m * amax).max(1.0) + 1.0, "Minkowski bound violated");
    // orient so the coefficient of the smaller logarithm is nonnegative
    let (nb, ns) = if ns < 0 || (ns == 0 && nb < 0) { (-nb, -ns) } else { (nb, ns) };
    Ok(if swapped { (ns, nb) } else { (nb, ns) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PowerProduct {
    pub l1: i64,
    pub l2: i64,
    pub value: RealScalar,
    pub error: RealScalar,
    /// `q t / M`.
    pub scale: f64,
    /// The step of the ladder, `b = k (n1 a1 + n2 a2) q`.
    pub step: f64,
    pub combination: (i64, i64),
    /// Exponents produced by the ladder before polishing.
    pub ladder: (i64, i64),
    pub ladder_error: f64,
}

impl PowerProduct {
    /// `|s - t| / (q t / M)`.
    pub fn ratio(&self) -> f64 {
        self.error.to_f64() / self.scale
    }
}

/// A power product in the exponent-`q` subgroup close to `t`.
///
/// A small positive combination `a = q (n1 a1 + n2 a2) <= q / M` is scaled to
/// `b = ceil((q/M) / a) a` in `[q/M, 2q/M)`, and `log t` is rounded to a
/// multiple of `b`.
pub fn near_target_product(p: &LogPair, t: &RealScalar, m: f64, q: u64, eta_cap: f64) -> Result<PowerProduct, BakerError> {
    if t.is_positive() != Some(true) {
        return Err(BakerError::NonPositive);
    }
    if q == 0 || m < 1.0 {
        return Err(BakerError::Argument("need q >= 1 and M >= 1".into()));
    }
    let prec = p.prec();
    let qi = q as i64;
    let scale = q as f64 * t.to_f64() / m;
    let lt = t.ln();
    let finish = |l1: i64, l2: i64, step: f64, comb: (i64, i64)| {
        let value = p.value(l1, l2);
        let error = (&value - t).abs();
        PowerProduct {
            l1,
            l2,
            value,
            error,
            scale,
            step,
            combination: comb,
            ladder: (l1, l2),
            ladder_error: 0.0,
        }
    };
    // exact hits by small elements of the subgroup
    for e1 in -2..=2i64 {
        for e2 in -2..=2i64 {
            let c = &p.combination(e1 * qi, e2 * qi) - &lt;
            if c.contains_zero() {
                return Ok(finish(e1 * qi, e2 * qi, 0.0, (0, 0)));
            }
        }
    }
    let (mut n1, mut n2) = small_log_combination(p, m)?;
    let mut a = p.combination(n1, n2).mul_int(qi);
    match a.sign() {
        Some(Ordering::Greater) => {}
        Some(Ordering::Less) => {
            n1 = -n1;
            n2 = -n2;
            a = -a;
        }
        _ => return Err(BakerError::Dependent { m1: n1, m2: n2 }),
    }
    let target = RealScalar::from_f64(q as f64, prec) / RealScalar::from_f64(m, prec);
    let k = (&target / &a).hi().to_f64().ceil().max(1.0) as i64;
    let b = a.mul_int(k);
    // ladder coverage: consecutive multiples of b are at most 2q/M apart
    assert!(b.definitely_le(&target.mul_int(2)) || k == 1, "ladder step too coarse");
    let i = (&lt / &b).round_value().to_i64().ok_or_else(|| BakerError::Argument("target out of range".into()))?;
    let l1 = i * k * qi * n1;
    let l2 = i * k * qi * n2;
    let size = l1.abs().max(l2.abs()) as f64;
    let cap = lt.abs().to_f64().max(1.0) * m.powf(eta_cap + 1.0);
    if size > cap {
        return Err(BakerError::StepCap { size, cap, eta_cap });
    }
    let raw = finish(l1, l2, b.to_f64(), (n1, n2));
    let bound = l1.abs().max(l2.abs());
    let mut out = raw.clone();
    if bound / qi <= POLISH_CAP {
        let (p1, p2) = polish(p, &lt, bound, qi);
        let polished = finish(p1, p2, b.to_f64(), (n1, n2));
        if polished.error.to_f64() <= raw.error.to_f64() {
            out = polished;
        }
    }
    out.ladder = (l1, l2);
    out.ladder_error = raw.error.to_f64();
    Ok(out)
}

/// Best exponents in the box `|l_i| <= bound` (multiples of `q`): for each
/// `l2` the nearest `l1`, screened in double precision and decided on the
/// best few candidates in interval arithmetic.
fn polish(p: &LogPair, lt: &RealScalar, bound: i64, q: i64) -> (i64, i64) {
    let a1 = p.a1.to_f64();
    let a2 = p.a2.to_f64();
    let ltf = lt.to_f64();
    let lim = bound / q;
    let mut cands: Vec<(f64, i64, i64)> = Vec::new();
    for e2 in -lim..=lim {
        let r = (ltf - (e2 * q) as f64 * a2) / (a1 * q as f64);
        let f = r.floor() as i64;
        for e1 in [f, f + 1] {
            if e1.abs() > lim {
                continue;
            }
            let dev = ((e1 * q) as f64 * a1 + (e2 * q) as f64 * a2 - ltf).abs();
            cands.push((dev, e1 * q, e2 * q));
        }
        if cands.len() > 64 {
            cands.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
            cands.truncate(8);
        }
    }
    cands.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    cands.truncate(8);
    let t = lt.exp();
    let mut best: Option<(RealScalar, i64, i64)> = None;
    for (_, l1, l2) in cands {
        let err = (&p.value(l1, l2) - &t).abs();
        let better = match &best {
            None => true,
            Some((be, b1, b2)) => match err.cmp_decided(be) {
                Some(Ordering::Less) => true,
                Some(Ordering::Greater) => false,
                _ => (l1, l2) < (*b1, *b2) && err.to_f64() <= be.to_f64(),
            },
        };
        if better {
            best = Some((err, l1, l2));
        }
    }
    best.map_or((0, 0), |(_, a, b)| (a, b))
}

/// Best `l1^e1 l2^e2` over `|e_i| <= bound` (multiples of `q` only), optionally
/// excluding `(0, 0)`.
pub fn exhaustive_best(p: &LogPair, t: &RealScalar, bound: i64, q: u64, exclude_zero: bool) -> (i64, i64, f64) {
    let lt = t.ln().to_f64();
    let a1 = p.a1.to_f64();
    let a2 = p.a2.to_f64();
    let tv = t.to_f64();
    let qi = q as i64;
    let mut best = (0, 0, f64::INFINITY);
    let lim = bound / qi;
    for e1 in -lim..=lim {
        for e2 in -lim..=lim {
            if exclude_zero && e1 == 0 && e2 == 0 {
                continue;
            }
            let (l1, l2) = (e1 * qi, e2 * qi);
            let err = ((l1 as f64 * a1 + l2 as f64 * a2 - lt).exp() - 1.0).abs() * tv;
            if err < best.2 {
                best = (l1, l2, err);
            }
        }
    }
    best
}

/// Smallest `eta` with `|m1 a1 + m2 a2| >= max(|m_i|)^(-eta)` for all pairs with
/// `2 <= max |m_i| <= bound`, and the pair attaining it.
pub fn calibrate_eta(p: &LogPair, bound: i64) -> (f64, (i64, i64)) {
    let a1 = p.a1.to_f64();
    let a2 = p.a2.to_f64();
    let mut worst = (f64::NEG_INFINITY, (0, 0));
    let mut consider = |m1: i64, m2: i64| {
        let h = m1.abs().max(m2.abs());
        if !(2..=bound).contains(&h) {
            return;
        }
        let c = (m1 as f64 * a1 + m2 as f64 * a2).abs();
        let eta = -c.ln() / (h as f64).ln();
        if eta > worst.0 {
            worst = (eta, (m1, m2));
        }
    };
    // for each m2 only the two m1 nearest -m2 a2 / a1 can be extremal
    for m2 in 0..=bound {
        let x = -(m2 as f64) * a2 / a1;
        let f = x.floor() as i64;
        for m1 in [f - 1, f, f + 1, f + 2] {
            if m2 == 0 && m1 <= 0 {
                continue;
            }
            consider(m1, m2);
        }
    }
    worst
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CharacterApprox {
    /// Exponents of `b` in the stabilizer generators.
    pub b_exponents: Vec<i64>,
    pub b: DiagElement,
    pub value: RealScalar,
    pub error: RealScalar,
    pub q: u64,
    pub scale: f64,
    pub log_norm: f64,
    pub pair: [Vec<i64>; 2],
    pub certified_bound: u64,
}

impl CharacterApprox {
    pub fn ratio(&self) -> f64 {
        self.error.to_f64() / self.scale
    }
}

fn character_log(orbit: &CompactOrbit, alpha: RootIndex, e: &[i64], prec: u32) -> RealScalar {
    let b = orbit.stabilizer.diag_of(&orbit.field, e, prec);
    b.root_value(alpha).ln()
}

/// An element `b` of the subgroup with `alpha(b)` close to `t`.
///
/// The character values of two stabilizer elements with a certified
/// independence relation bound form the pair; the ladder then runs in the
/// exponent-`q` subgroup, `q` the exponent of the stabilizer modulo the subgroup.
pub fn character_approx(
    orbit: &CompactOrbit,
    b1: &SubgroupB1,
    alpha: RootIndex,
    t: &RealScalar,
    m: f64,
    eta_cap: f64,
) -> Result<CharacterApprox, BakerError> {
    let prec = t.prec();
    let r = orbit.stabilizer.rank();
    alpha
        .check(orbit.field.degree())
        .map_err(|e| BakerError::Argument(e.to_string()))?;
    let finish = |e: Vec<i64>, pair: [Vec<i64>; 2], bound: u64, q: u64| {
        let b = orbit.stabilizer.diag_of(&orbit.field, &e, prec);
        let value = b.root_value(alpha);
        let error = (&value - t).abs();
        let log_norm = b.norm().ln().to_f64();
        CharacterApprox {
            b_exponents: e,
            b,
            value,
            error,
            q,
            scale: q as f64 * t.to_f64() / m,
            log_norm,
            pair,
            certified_bound: bound,
        }
    };
    // exact hits among small elements of the subgroup
    let lt = t.ln();
    for c1 in -2..=2i64 {
        for c2 in -2..=2i64 {
            let c: Vec<i64> = [c1, c2].into_iter().take(r).collect();
            let e = b1.to_b_exponents(&c);
            if (&character_log(orbit, alpha, &e, prec) - &lt).contains_zero() {
                return Ok(finish(e, [vec![], vec![]], 0, b1.exponent));
            }
        }
    }
    // candidate elements: generators and small products
    let mut elems: Vec<Vec<i64>> = Vec::new();
    for c1 in 0..=2i64 {
        for c2 in -2..=2i64 {
            if (c1, c2) != (0, 0) && (c1 > 0 || c2 > 0) && r >= 2 {
                let mut e = vec![0; r];
                e[0] = c1;
                e[1] = c2;
                elems.push(e);
            }
        }
    }
    elems.sort_by_key(|e| e.iter().map(|x| x.abs()).sum::<i64>());
    for i in 0..elems.len() {
        for j in i + 1..elems.len() {
            let la = character_log(orbit, alpha, &elems[i], prec);
            let lb = character_log(orbit, alpha, &elems[j], prec);
            let labels = [format!("{alpha}{:?}", elems[i]), format!("{alpha}{:?}", elems[j])];
            let Ok(pair) = LogPair::certified(labels, la, lb, MIN_CERTIFICATE_BOUND) else {
                continue;
            };
            let pp = near_target_product(&pair, t, m, b1.exponent, eta_cap)?;
            let e: Vec<i64> = (0..r).map(|k| pp.l1 * elems[i][k] + pp.l2 * elems[j][k]).collect();
            debug_assert!(b1.contains(&e));
            return Ok(finish(e, [elems[i].clone(), elems[j].clone()], pair.certified_bound, b1.exponent));
        }
    }
    Err(BakerError::NoIndependentPair)
}

/// `(n1, n2)` as big integers, for reporting.
pub fn pair_to_integers(n: (i64, i64)) -> (Integer, Integer) {
    (Integer::from(n.0), Integer::from(n.1))
}
