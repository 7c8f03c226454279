use std::cmp::Ordering;
use std::fmt;

use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use super::poly::{IntPoly, SturmChain};
use super::real::RealScalar;
use super::{ScalarError, DEFAULT_PRECISION};

/// A real root of an integer polynomial, located by a rational isolating interval.
///
/// The interval is `(lo, hi]` with `p(lo) != 0`; when the root is rational and
/// was hit exactly, `lo == hi` and the enclosure has radius zero.
#[derive(Clone, Debug)]
pub struct AlgebraicNumber {
    poly: IntPoly,
    index: usize,
    lo: Rational,
    hi: Rational,
    cached: RealScalar,
}

fn rational_root_bound(p: &IntPoly) -> Rational {
    let lead = Rational::from(p.leading().clone()).abs();
    let mut m = Rational::new();
    for c in &p.coeffs()[..p.coeffs().len() - 1] {
        let r = Rational::from(c.clone()).abs() / &lead;
        if r > m {
            m = r;
        }
    }
    m + 1u32
}

#[derive(Clone, Debug)]
enum Isolated {
    Exact(Rational),
    Interval(Rational, Rational),
}

fn isolate(chain: &SturmChain, p: &IntPoly, a: Rational, b: Rational, n: usize, out: &mut Vec<Isolated>) {
    if n == 0 {
        return;
    }
    if n == 1 {
        if p.eval_rational(&b) == 0 {
            out.push(Isolated::Exact(b));
        } else {
            out.push(Isolated::Interval(a, b));
        }
        return;
    }
    let mid = Rational::from(&a + &b) / 2u32;
    if p.eval_rational(&mid) != 0 {
        let left = chain.count(&a, &mid);
        isolate(chain, p, a, mid.clone(), left, out);
        isolate(chain, p, mid, b, n - left, out);
        return;
    }
    // the midpoint is a root: carve out a small neighbourhood holding only it
    let mut eta = Rational::from(&b - &a) / 4u32;
    loop {
        let l = Rational::from(&mid - &eta);
        let r = Rational::from(&mid + &eta);
        if p.eval_rational(&l) != 0 && p.eval_rational(&r) != 0 && chain.count(&l, &r) == 1 {
            let left = chain.count(&a, &l);
            isolate(chain, p, a, l.clone(), left, out);
            out.push(Isolated::Exact(mid.clone()));
            let right = chain.count(&r, &b);
            isolate(chain, p, r, b, right, out);
            return;
        }
        eta /= 2u32;
    }
}

/// A rational root `k / lead` of `p` inside `(a, b]`, if any; otherwise the
/// interval narrowed until it holds at most one such candidate.
fn rational_root_in(p: &IntPoly, mut a: Rational, mut b: Rational) -> Result<Rational, (Rational, Rational)> {
    let lead = Integer::from(p.leading().abs_ref());
    let s_a = p.eval_rational(&a).cmp0();
    let width = Rational::from((Integer::from(1), lead.clone()));
    while Rational::from(&b - &a) >= width {
        let mid = Rational::from(&a + &b) / 2u32;
        let s = p.eval_rational(&mid).cmp0();
        if s == Ordering::Equal {
            return Ok(mid);
        }
        if s == s_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    let k = Rational::from(&a * &lead).ceil().numer().clone();
    let k_hi = Rational::from(&b * &lead).floor().numer().clone();
    let mut k = k;
    while k <= k_hi {
        let cand = Rational::from((k.clone(), lead.clone()));
        if cand > a && p.eval_rational(&cand) == 0 {
            return Ok(cand);
        }
        k += 1;
    }
    Err((a, b))
}

fn squarefree_check(p: &IntPoly) -> Result<(), ScalarError> {
    let rp = p.to_rat();
    let g = rp.gcd(&rp.derivative());
    if g.degree().unwrap_or(0) > 0 {
        return Err(ScalarError::NotSquarefree(p.to_string()));
    }
    Ok(())
}

impl AlgebraicNumber {
    /// All real roots of a squarefree polynomial, ascending.
    pub fn real_roots(poly: &IntPoly) -> Result<Vec<AlgebraicNumber>, ScalarError> {
        if poly.degree().unwrap_or(0) == 0 {
            return Err(ScalarError::Parse("constant polynomial has no roots".into()));
        }
        squarefree_check(poly)?;
        let chain = SturmChain::new(&poly.to_rat());
        let bound = rational_root_bound(poly);
        let a = Rational::from(-&bound);
        let n = chain.count(&a, &bound);
        let mut pieces = Vec::new();
        isolate(&chain, poly, a, bound, n, &mut pieces);
        Ok(pieces
            .into_iter()
            .enumerate()
            .map(|(i, piece)| {
                let (lo, hi) = match piece {
                    Isolated::Exact(r) => (r.clone(), r),
                    Isolated::Interval(a, b) => match rational_root_in(poly, a, b) {
                        Ok(r) => (r.clone(), r),
                        Err((a, b)) => (a, b),
                    },
                };
                let mut x = AlgebraicNumber {
                    poly: poly.clone(),
                    index: i,
                    lo,
                    hi,
                    cached: RealScalar::zero(2),
                };
                x.cached = x.bisect_to(DEFAULT_PRECISION);
                x
            })
            .collect())
    }

    /// The `index`-th real root (0-based, ascending) of `poly`.
    pub fn new(poly: IntPoly, index: usize) -> Result<Self, ScalarError> {
        let roots = Self::real_roots(&poly)?;
        let n = roots.len();
        roots
            .into_iter()
            .nth(index)
            .ok_or(ScalarError::RootIndex { index, count: n })
    }

    pub fn from_rational(q: &Rational) -> Self {
        let poly = IntPoly::new(vec![Integer::from(-q.numer()), q.denom().clone()]);
        AlgebraicNumber {
            poly,
            index: 0,
            lo: q.clone(),
            hi: q.clone(),
            cached: RealScalar::from_rational(q, DEFAULT_PRECISION),
        }
    }

    pub fn poly(&self) -> &IntPoly {
        &self.poly
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn is_rational(&self) -> bool {
        self.lo == self.hi
    }

    pub fn isolating_interval(&self) -> (&Rational, &Rational) {
        (&self.lo, &self.hi)
    }

    fn bisect_to(&self, prec: u32) -> RealScalar {
        if self.lo == self.hi {
            return RealScalar::from_rational(&self.lo, prec);
        }
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        let s_lo = self.poly.eval_rational(&lo).cmp0();
        let target = {
            let m = if lo.clone().abs() > hi.clone().abs() {
                lo.clone().abs()
            } else {
                hi.clone().abs()
            };
            let scale = if m > 1 { m } else { Rational::from(1) };
            scale >> (prec + 1)
        };
        while Rational::from(&hi - &lo) > target {
            let mid = Rational::from(&lo + &hi) / 2u32;
            let s = self.poly.eval_rational(&mid).cmp0();
            if s == Ordering::Equal {
                return RealScalar::from_rational(&mid, prec);
            }
            if s == s_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let l = Float::with_val_round(prec, &lo, rug::float::Round::Down).0;
        let h = Float::with_val_round(prec, &hi, rug::float::Round::Up).0;
        RealScalar::from_bounds(l, h)
    }

    /// Enclosure with radius at most `2^(1-prec) * max(1, |value|)`.
    pub fn refine(&self, prec: u32) -> RealScalar {
        if prec <= self.cached.prec() {
            return self.cached.clone();
        }
        self.bisect_to(prec)
    }

    pub fn approx(&self, prec: u32) -> RealScalar {
        self.refine(prec)
    }
}

impl fmt::Display for AlgebraicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "root #{} of [{}] ~ {}", self.index, self.poly, self.cached.to_string_digits(15))
    }
}

#[derive(Serialize, Deserialize)]
struct AlgebraicRepr {
    poly: IntPoly,
    index: usize,
}

impl Serialize for AlgebraicNumber {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        AlgebraicRepr {
            poly: self.poly.clone(),
            index: self.index,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AlgebraicNumber {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = AlgebraicRepr::deserialize(d)?;
        AlgebraicNumber::new(r.poly, r.index).map_err(serde::de::Error::custom)
    }
}

/// Whether a monic polynomial with only real roots is irreducible over the rationals.
///
/// A factor of degree `k` would have as coefficients the elementary symmetric
/// functions of some `k` of the roots; those are enclosed numerically and any
/// all-integer candidate is confirmed or refuted by exact division.
pub fn is_irreducible_totally_real(p: &IntPoly) -> Result<bool, ScalarError> {
    let d = p.degree().unwrap_or(0);
    if d <= 1 {
        return Ok(d == 1);
    }
    if !p.is_monic() {
        return Err(ScalarError::NotMonic(p.to_string()));
    }
    let roots = AlgebraicNumber::real_roots(p)?;
    if roots.len() != d {
        return Err(ScalarError::NotTotallyReal(p.to_string()));
    }
    let mut prec = DEFAULT_PRECISION;
    'outer: loop {
        let approx: Vec<RealScalar> = roots.iter().map(|r| r.refine(prec)).collect();
        for mask in 1u32..(1 << d) - 1 {
            let k = mask.count_ones() as usize;
            if 2 * k > d {
                continue;
            }
            // coefficients of prod (x - r_i) over the subset
            let mut coeffs = vec![RealScalar::one(prec)];
            for (i, r) in approx.iter().enumerate() {
                if mask & (1 << i) == 0 {
                    continue;
                }
                let mut next = vec![RealScalar::zero(prec); coeffs.len() + 1];
                for (j, c) in coeffs.iter().enumerate() {
                    next[j + 1] = &next[j + 1] + c;
                    next[j] = &next[j] - &(c * r);
                }
                coeffs = next;
            }
            let mut candidate = Vec::with_capacity(coeffs.len());
            let mut excluded = false;
            for c in &coeffs {
                let dist = c.nearest_int_dist();
                if dist.lo() > &0 {
                    excluded = true;
                    break;
                }
                if c.width() >= 1 {
                    prec *= 2;
                    if prec > super::MAX_PRECISION {
                        return Err(ScalarError::Undecided { precision: prec / 2 });
                    }
                    continue 'outer;
                }
                candidate.push(c.round_value());
            }
            if excluded {
                continue;
            }
            let g = IntPoly::new(candidate);
            if p.div_exact(&g).is_some() {
                return Ok(false);
            }
        }
        return Ok(true);
    }
}
