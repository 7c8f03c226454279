//! Validated real arithmetic: outward-rounded intervals, integer polynomials
//! and real algebraic numbers with exact isolating intervals.

mod algebraic;
mod poly;
mod real;

pub use algebraic::{is_irreducible_totally_real, AlgebraicNumber};
pub use poly::{IntPoly, RatPoly, SturmChain};
pub use real::RealScalar;

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_PRECISION: u32 = 256;
pub const MAX_PRECISION: u32 = 4096;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScalarError {
    #[error("comparison undecided at {precision} bits")]
    Undecided { precision: u32 },
    #[error("polynomial {0} is not squarefree")]
    NotSquarefree(String),
    #[error("polynomial {0} is not monic")]
    NotMonic(String),
    #[error("polynomial {0} has non-real roots")]
    NotTotallyReal(String),
    #[error("polynomial {0} is reducible")]
    NotIrreducible(String),
    #[error("root index {index} out of range ({count} real roots)")]
    RootIndex { index: usize, count: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

/// Run `f` at increasing precision until it decides, doubling from `start` up to `MAX_PRECISION`.
///
/// `f` must recompute its inputs from exact sources at the precision it is given.
pub fn escalate<T>(start: u32, mut f: impl FnMut(u32) -> Option<T>) -> Result<(T, u32), ScalarError> {
    let mut prec = start.max(64);
    loop {
        if let Some(v) = f(prec) {
            return Ok((v, prec));
        }
        if prec >= MAX_PRECISION {
            return Err(ScalarError::Undecided { precision: prec });
        }
        prec = (prec * 2).min(MAX_PRECISION);
    }
}

/// A real number given exactly: a rational, a real algebraic number, or a
/// polynomial expression `sum a_i theta^i` in a real algebraic `theta`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum ExactReal {
    Rational(#[serde(with = "rational_string")] Rational),
    Algebraic(AlgebraicNumber),
    Polynomial {
        theta: AlgebraicNumber,
        #[serde(with = "rational_vec")]
        coords: Vec<Rational>,
    },
}

impl ExactReal {
    pub fn approx(&self, prec: u32) -> RealScalar {
        match self {
            ExactReal::Rational(q) => RealScalar::from_rational(q, prec),
            ExactReal::Algebraic(a) => a.refine(prec),
            ExactReal::Polynomial { theta, coords } => {
                // a little headroom so the Horner sum keeps the requested accuracy
                let t = theta.refine(prec + 32);
                let mut acc = RealScalar::zero(prec + 32);
                for c in coords.iter().rev() {
                    acc = &(&acc * &t) + &RealScalar::from_rational(c, prec + 32);
                }
                acc.with_prec(prec)
            }
        }
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            ExactReal::Rational(q) => Some(q),
            _ => None,
        }
    }

    pub fn from_int(n: i64) -> Self {
        ExactReal::Rational(Rational::from(n))
    }

    /// Parse a number in one of the forms
    /// `3`, `-2/7`, `0.125`, `1e-3`, `alg:c0,c1,...,cn@k` (the `k`-th real root,
    /// ascending from 0), or `alg:c0,...,cn@k|a0,a1,...` for `sum a_i theta^i`.
    pub fn parse(s: &str) -> Result<Self, ScalarError> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("alg:") {
            let (root, combo) = match rest.split_once('|') {
                Some((r, c)) => (r, Some(c)),
                None => (rest, None),
            };
            let (poly, idx) = root
                .split_once('@')
                .ok_or_else(|| ScalarError::Parse(format!("missing root index in {s:?}")))?;
            let poly = IntPoly::parse(poly)?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| ScalarError::Parse(format!("bad root index in {s:?}")))?;
            let theta = AlgebraicNumber::new(poly, idx)?;
            return match combo {
                None => Ok(ExactReal::Algebraic(theta)),
                Some(c) => {
                    let coords = c
                        .split(',')
                        .map(parse_rational)
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(ExactReal::Polynomial { theta, coords })
                }
            };
        }
        parse_rational(s).map(ExactReal::Rational)
    }
}

/// Parse an exact rational from `n`, `n/m`, or a decimal with optional exponent.
pub fn parse_rational(s: &str) -> Result<Rational, ScalarError> {
    let s = s.trim();
    let bad = || ScalarError::Parse(format!("not a number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: Integer = n.trim().parse().map_err(|_| bad())?;
        let d: Integer = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Rational::from((n, d)));
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (ip, fp) = mant.split_once('.').unwrap_or((mant, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(bad());
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all = format!("{ip}{fp}");
    let digits: Integer = all.parse().map_err(|_| bad())?;
    let scale = exp - fp.len() as i32;
    let mut q = Rational::from(digits);
    if scale >= 0 {
        q *= Integer::from(Integer::u_pow_u(10, scale as u32));
    } else {
        q /= Integer::from(Integer::u_pow_u(10, (-scale) as u32));
    }
    if neg {
        q = -q;
    }
    Ok(q)
}

pub(crate) mod rational_string {
    use rug::Rational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&q.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let raw = String::deserialize(d)?;
        super::parse_rational(&raw).map_err(serde::de::Error::custom)
    }
}

pub(crate) mod rational_vec {
    use rug::Rational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|q| q.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let raw: Vec<String> = Vec::deserialize(d)?;
        raw.iter()
            .map(|s| super::parse_rational(s).map_err(serde::de::Error::custom))
            .collect()
    }
}
