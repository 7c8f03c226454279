use std::fmt;

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use super::real::RealScalar;
use super::ScalarError;

/// Polynomial with integer coefficients, lowest degree first, no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntPoly {
    #[serde(with = "integer_vec")]
    coeffs: Vec<Integer>,
}

mod integer_vec {
    use rug::Integer;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Integer], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Integer>, D::Error> {
        let raw: Vec<String> = Vec::deserialize(d)?;
        raw.iter()
            .map(|s| s.parse::<Integer>().map_err(serde::de::Error::custom))
            .collect()
    }
}

impl IntPoly {
    pub fn new(mut coeffs: Vec<Integer>) -> Self {
        while coeffs.last().is_some_and(|c| *c == 0) {
            coeffs.pop();
        }
        IntPoly { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Integer::from(c)).collect())
    }

    /// Parse `"c0,c1,...,cn"`, lowest degree first.
    pub fn parse(s: &str) -> Result<Self, ScalarError> {
        let coeffs = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<Integer>()
                    .map_err(|_| ScalarError::Parse(format!("bad coefficient {t:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let p = Self::new(coeffs);
        if p.degree().is_none() {
            return Err(ScalarError::Parse("zero polynomial".into()));
        }
        Ok(p)
    }

    pub fn coeffs(&self) -> &[Integer] {
        &self.coeffs
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> &Integer {
        self.coeffs.last().expect("zero polynomial")
    }

    pub fn is_monic(&self) -> bool {
        !self.coeffs.is_empty() && *self.leading() == 1
    }

    pub fn to_rat(&self) -> RatPoly {
        RatPoly::new(self.coeffs.iter().map(|c| Rational::from(c.clone())).collect())
    }

    pub fn eval_rational(&self, x: &Rational) -> Rational {
        let mut acc = Rational::new();
        for c in self.coeffs.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    pub fn eval_scalar(&self, x: &RealScalar) -> RealScalar {
        let p = x.prec();
        let mut acc = RealScalar::zero(p);
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * x) + &RealScalar::from_integer(c, p);
        }
        acc
    }

    pub fn derivative(&self) -> IntPoly {
        IntPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| Integer::from(c * i as u32))
                .collect(),
        )
    }

    /// Newton power sums `p_k = sum_i r_i^k` of the roots for `k < n`, for monic input.
    pub fn power_sums(&self, n: usize) -> Vec<Integer> {
        assert!(self.is_monic(), "power sums need a monic polynomial");
        let d = self.degree().unwrap();
        // e-coefficients: x^d + a_{d-1} x^{d-1} + ... ; Newton: p_k + a_{d-1} p_{k-1} + ... + k a_{d-k} = 0
        let a = |j: usize| -> Integer { self.coeffs[j].clone() };
        let mut p: Vec<Integer> = Vec::with_capacity(n);
        for k in 0..n {
            if k == 0 {
                p.push(Integer::from(d));
                continue;
            }
            let mut s = Integer::new();
            for i in 1..=k.min(d) {
                if i < k {
                    s += a(d - i) * &p[k - i];
                } else {
                    s += a(d - i) * Integer::from(k);
                }
            }
            p.push(-s);
        }
        p
    }

    /// Discriminant of a monic polynomial, as the determinant of the trace form.
    pub fn discriminant(&self) -> Integer {
        let d = self.degree().unwrap();
        let ps = self.power_sums(2 * d);
        let m: Vec<Vec<Rational>> = (0..d)
            .map(|i| (0..d).map(|j| Rational::from(ps[i + j].clone())).collect())
            .collect();
        let det = crate::linalg::det_rational(&m);
        det.numer().clone()
    }

    pub fn div_exact(&self, g: &IntPoly) -> Option<IntPoly> {
        let (q, r) = self.to_rat().div_rem(&g.to_rat());
        if !r.is_zero() {
            return None;
        }
        q.to_int()
    }
}

impl fmt::Display for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Polynomial with rational coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq)]
pub struct RatPoly {
    coeffs: Vec<Rational>,
}

impl RatPoly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(|c| *c == 0) {
            coeffs.pop();
        }
        RatPoly { coeffs }
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let mut acc = Rational::new();
        for c in self.coeffs.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    pub fn derivative(&self) -> RatPoly {
        RatPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| Rational::from(c * i as u32))
                .collect(),
        )
    }

    pub fn neg(&self) -> RatPoly {
        RatPoly::new(self.coeffs.iter().map(|c| Rational::from(-c)).collect())
    }

    pub fn mul(&self, other: &RatPoly) -> RatPoly {
        if self.is_zero() || other.is_zero() {
            return RatPoly::new(vec![]);
        }
        let mut out = vec![Rational::new(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += Rational::from(a * b);
            }
        }
        RatPoly::new(out)
    }

    pub fn div_rem(&self, g: &RatPoly) -> (RatPoly, RatPoly) {
        let dg = g.degree().expect("division by zero polynomial");
        let mut r = self.coeffs.clone();
        let lead = g.coeffs[dg].clone();
        let mut q = vec![Rational::new(); r.len().saturating_sub(dg).max(1)];
        while r.len() > dg && !r.is_empty() {
            let k = r.len() - 1 - dg;
            let c = Rational::from(r.last().unwrap() / &lead);
            for (j, gc) in g.coeffs.iter().enumerate() {
                r[k + j] -= Rational::from(&c * gc);
            }
            q[k] = c;
            r.pop();
            while r.last().is_some_and(|x| *x == 0) {
                r.pop();
            }
        }
        (RatPoly::new(q), RatPoly::new(r))
    }

    pub fn monic(&self) -> RatPoly {
        let lead = self.coeffs.last().expect("zero polynomial").clone();
        RatPoly::new(self.coeffs.iter().map(|c| Rational::from(c / &lead)).collect())
    }

    pub fn gcd(&self, other: &RatPoly) -> RatPoly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        if a.is_zero() {
            a
        } else {
            a.monic()
        }
    }

    pub fn to_int(&self) -> Option<IntPoly> {
        let mut out = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            if *c.denom() != 1 {
                return None;
            }
            out.push(c.numer().clone());
        }
        Some(IntPoly::new(out))
    }

    fn sign_at(&self, x: &Rational) -> i32 {
        let v = self.eval(x);
        v.cmp0() as i32
    }

    fn sign_at_infinity(&self, positive: bool) -> i32 {
        let d = self.degree().unwrap();
        let s = self.coeffs[d].cmp0() as i32;
        if positive || d % 2 == 0 {
            s
        } else {
            -s
        }
    }
}

/// Sturm chain of a squarefree polynomial.
#[derive(Clone, Debug)]
pub struct SturmChain {
    chain: Vec<RatPoly>,
}

impl SturmChain {
    pub fn new(p: &RatPoly) -> Self {
        let mut chain = vec![p.clone(), p.derivative()];
        loop {
            let n = chain.len();
            if chain[n - 1].is_zero() {
                chain.pop();
                break;
            }
            let (_, r) = chain[n - 2].div_rem(&chain[n - 1]);
            if r.is_zero() {
                break;
            }
            chain.push(r.neg());
        }
        SturmChain { chain }
    }

    fn variations(signs: impl Iterator<Item = i32>) -> usize {
        let mut last = 0;
        let mut count = 0;
        for s in signs {
            if s == 0 {
                continue;
            }
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
        count
    }

    pub fn variations_at(&self, x: &Rational) -> usize {
        Self::variations(self.chain.iter().map(|p| p.sign_at(x)))
    }

    pub fn variations_at_infinity(&self, positive: bool) -> usize {
        Self::variations(self.chain.iter().map(|p| p.sign_at_infinity(positive)))
    }

    /// Number of distinct real roots in `(a, b]`; requires `a` not to be a root.
    pub fn count(&self, a: &Rational, b: &Rational) -> usize {
        self.variations_at(a) - self.variations_at(b)
    }

    pub fn count_all(&self) -> usize {
        self.variations_at_infinity(false) - self.variations_at_infinity(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        let p = IntPoly::parse("1,-2,-1,1").unwrap();
        assert_eq!(p.degree(), Some(3));
        assert_eq!(p.to_string(), "1,-2,-1,1");
        assert!(IntPoly::parse("0,0").is_err());
        assert!(IntPoly::parse("1,x").is_err());
    }

    #[test]
    fn discriminants_of_small_polynomials() {
        // x^2 - 2 has discriminant 8; x^3 - x^2 - 2x + 1 has 49
        assert_eq!(IntPoly::from_i64(&[-2, 0, 1]).discriminant(), 8);
        assert_eq!(IntPoly::from_i64(&[1, -2, -1, 1]).discriminant(), 49);
        assert_eq!(IntPoly::from_i64(&[-1, -3, 0, 1]).discriminant(), 81);
    }

    #[test]
    fn sturm_counts_roots() {
        let p = IntPoly::from_i64(&[1, -2, -1, 1]).to_rat();
        let s = SturmChain::new(&p);
        assert_eq!(s.count_all(), 3);
        assert_eq!(s.count(&Rational::from(0), &Rational::from(1)), 1);
        let q = IntPoly::from_i64(&[1, 0, 1]).to_rat();
        assert_eq!(SturmChain::new(&q).count_all(), 0);
    }

    #[test]
    fn exact_division() {
        let p = IntPoly::from_i64(&[-1, 0, 1]);
        let g = IntPoly::from_i64(&[-1, 1]);
        assert_eq!(p.div_exact(&g), Some(IntPoly::from_i64(&[1, 1])));
        assert_eq!(p.div_exact(&IntPoly::from_i64(&[2, 1])), None);
    }
}
