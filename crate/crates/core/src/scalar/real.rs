use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rug::float::{Constant, Round, Special};
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A real number enclosed in a closed interval with outward-rounded endpoints.
///
/// Every operation returns an interval guaranteed to contain the exact result
/// for all inputs inside the operand intervals. Comparisons answer `None` when
/// the enclosures overlap and the answer cannot be decided at this precision.
#[derive(Clone, Debug)]
pub struct RealScalar {
    lo: Float,
    hi: Float,
}

fn down<T>(prec: u32, val: T) -> Float
where
    Float: rug::ops::AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, val, Round::Down).0
}

fn up<T>(prec: u32, val: T) -> Float
where
    Float: rug::ops::AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, val, Round::Up).0
}

fn min_f(a: Float, b: Float) -> Float {
    if a <= b {
        a
    } else {
        b
    }
}

fn max_f(a: Float, b: Float) -> Float {
    if a >= b {
        a
    } else {
        b
    }
}

impl RealScalar {
    fn make(mut lo: Float, mut hi: Float) -> Self {
        if lo.is_nan() {
            lo = Float::with_val(hi.prec(), Special::NegInfinity);
        }
        if hi.is_nan() {
            hi = Float::with_val(lo.prec(), Special::Infinity);
        }
        debug_assert!(lo <= hi, "inverted interval {lo} > {hi}");
        RealScalar { lo, hi }
    }

    pub fn from_bounds(lo: Float, hi: Float) -> Self {
        assert!(!(lo > hi), "lower bound exceeds upper bound");
        Self::make(lo, hi)
    }

    pub fn from_float(x: Float) -> Self {
        RealScalar {
            hi: x.clone(),
            lo: x,
        }
    }

    pub fn from_int(n: i64, prec: u32) -> Self {
        Self::make(down(prec, n), up(prec, n))
    }

    pub fn from_integer(n: &Integer, prec: u32) -> Self {
        Self::make(down(prec, n), up(prec, n))
    }

    pub fn from_rational(q: &Rational, prec: u32) -> Self {
        Self::make(down(prec, q), up(prec, q))
    }

    pub fn from_f64(x: f64, prec: u32) -> Self {
        Self::make(down(prec, x), up(prec, x))
    }

    pub fn zero(prec: u32) -> Self {
        Self::from_int(0, prec)
    }

    pub fn one(prec: u32) -> Self {
        Self::from_int(1, prec)
    }

    pub fn pi(prec: u32) -> Self {
        Self::make(down(prec, Constant::Pi), up(prec, Constant::Pi))
    }

    /// The whole real line; the result of dividing by an interval around zero.
    pub fn entire(prec: u32) -> Self {
        RealScalar {
            lo: Float::with_val(prec, Special::NegInfinity),
            hi: Float::with_val(prec, Special::Infinity),
        }
    }

    pub fn lo(&self) -> &Float {
        &self.lo
    }

    pub fn hi(&self) -> &Float {
        &self.hi
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec().max(self.hi.prec())
    }

    /// Midpoint, rounded to nearest at one bit above the working precision.
    pub fn value(&self) -> Float {
        if !self.is_finite() {
            if self.lo.is_finite() {
                return self.lo.clone();
            }
            if self.hi.is_finite() {
                return self.hi.clone();
            }
            return Float::new(self.prec());
        }
        let p = self.prec() + 1;
        let s = Float::with_val(p + 64, &self.lo + &self.hi);
        Float::with_val(p, s / 2u32)
    }

    /// Upper bound on the distance from `value()` to either endpoint.
    pub fn radius(&self) -> Float {
        let p = self.prec();
        if !self.is_finite() {
            return Float::with_val(p, Special::Infinity);
        }
        let m = self.value();
        let a = up(p, &self.hi - &m);
        let b = up(p, &m - &self.lo);
        max_f(a, b)
    }

    pub fn width(&self) -> Float {
        up(self.prec(), &self.hi - &self.lo)
    }

    pub fn to_f64(&self) -> f64 {
        self.value().to_f64()
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains_zero(&self) -> bool {
        !(self.lo > 0) && !(self.hi < 0)
    }

    pub fn contains_float(&self, x: &Float) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    pub fn contains_rational(&self, q: &Rational) -> bool {
        self.lo <= *q && *q <= self.hi
    }

    pub fn contains(&self, other: &RealScalar) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Smallest interval containing both operands.
    pub fn hull(&self, other: &RealScalar) -> RealScalar {
        Self::make(
            min_f(self.lo.clone(), other.lo.clone()),
            max_f(self.hi.clone(), other.hi.clone()),
        )
    }

    /// Same enclosure widened to a new working precision (outward rounding).
    pub fn with_prec(&self, prec: u32) -> RealScalar {
        Self::make(down(prec, &self.lo), up(prec, &self.hi))
    }

    pub fn sign(&self) -> Option<Ordering> {
        if self.lo > 0 {
            Some(Ordering::Greater)
        } else if self.hi < 0 {
            Some(Ordering::Less)
        } else if self.lo == 0 && self.hi == 0 {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    /// Decided comparison of the enclosed values, `None` when the enclosures overlap.
    pub fn cmp_decided(&self, other: &RealScalar) -> Option<Ordering> {
        if self.hi < other.lo {
            Some(Ordering::Less)
        } else if self.lo > other.hi {
            Some(Ordering::Greater)
        } else if self.is_point() && other.is_point() && self.lo == other.lo {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    pub fn definitely_lt(&self, other: &RealScalar) -> bool {
        self.hi < other.lo
    }

    pub fn definitely_le(&self, other: &RealScalar) -> bool {
        self.hi <= other.lo
    }

    pub fn definitely_gt(&self, other: &RealScalar) -> bool {
        self.lo > other.hi
    }

    pub fn definitely_ge(&self, other: &RealScalar) -> bool {
        self.lo >= other.hi
    }

    pub fn is_positive(&self) -> Option<bool> {
        if self.lo > 0 {
            Some(true)
        } else if !(self.hi > 0) {
            Some(false)
        } else {
            None
        }
    }

    pub fn abs(&self) -> RealScalar {
        if self.lo >= 0 {
            self.clone()
        } else if self.hi <= 0 {
            -self
        } else {
            let a = Float::with_val(self.prec(), -&self.lo);
            RealScalar::make(Float::new(self.prec()), max_f(a, self.hi.clone()))
        }
    }

    pub fn sqr(&self) -> RealScalar {
        let a = self.abs();
        let p = a.prec();
        RealScalar::make(down(p, a.lo.square_ref()), up(p, a.hi.square_ref()))
    }

    /// Square root; the part of the enclosure below zero is discarded.
    pub fn sqrt(&self) -> RealScalar {
        let p = self.prec();
        let zero = Float::new(p);
        let lo = if self.lo > 0 {
            down(p, self.lo.sqrt_ref())
        } else {
            zero.clone()
        };
        let hi = if self.hi > 0 {
            up(p, self.hi.sqrt_ref())
        } else {
            zero
        };
        RealScalar::make(lo, hi)
    }

    pub fn exp(&self) -> RealScalar {
        let p = self.prec();
        RealScalar::make(down(p, self.lo.exp_ref()), up(p, self.hi.exp_ref()))
    }

    /// Natural logarithm; endpoints at or below zero map to negative infinity.
    pub fn ln(&self) -> RealScalar {
        let p = self.prec();
        let ninf = Float::with_val(p, Special::NegInfinity);
        let lo = if self.lo > 0 {
            down(p, self.lo.ln_ref())
        } else {
            ninf.clone()
        };
        let hi = if self.hi > 0 {
            up(p, self.hi.ln_ref())
        } else {
            ninf
        };
        RealScalar::make(lo, hi)
    }

    pub fn powi(&self, n: i64) -> RealScalar {
        if n == 0 {
            return RealScalar::one(self.prec());
        }
        if n < 0 {
            return RealScalar::one(self.prec()) / self.powi(-n);
        }
        let p = self.prec();
        let e = Integer::from(n);
        if n % 2 == 1 {
            RealScalar::make(down(p, (&self.lo).pow(&e)), up(p, (&self.hi).pow(&e)))
        } else {
            let a = self.abs();
            RealScalar::make(down(p, (&a.lo).pow(&e)), up(p, (&a.hi).pow(&e)))
        }
    }

    /// `self^y` for positive `self`, through `exp(y ln self)`.
    pub fn powf(&self, y: &RealScalar) -> RealScalar {
        (y * &self.ln()).exp()
    }

    pub fn min(&self, other: &RealScalar) -> RealScalar {
        RealScalar::make(
            min_f(self.lo.clone(), other.lo.clone()),
            min_f(self.hi.clone(), other.hi.clone()),
        )
    }

    pub fn max(&self, other: &RealScalar) -> RealScalar {
        RealScalar::make(
            max_f(self.lo.clone(), other.lo.clone()),
            max_f(self.hi.clone(), other.hi.clone()),
        )
    }

    pub fn mul_int(&self, n: i64) -> RealScalar {
        self * &RealScalar::from_int(n, self.prec())
    }

    pub fn div_int(&self, n: i64) -> RealScalar {
        self / &RealScalar::from_int(n, self.prec())
    }

    /// Integer part when both endpoints share it.
    pub fn floor_decided(&self) -> Option<Integer> {
        if !self.is_finite() {
            return None;
        }
        let a = self.lo.to_integer_round(Round::Down)?.0;
        let b = self.hi.to_integer_round(Round::Down)?.0;
        (a == b).then_some(a)
    }

    /// Nearest integer to the midpoint.
    pub fn round_value(&self) -> Integer {
        self.value()
            .to_integer_round(Round::Nearest)
            .map(|x| x.0)
            .unwrap_or_default()
    }

    /// Exact image of the enclosure under `x -> |x - round(x)|`.
    ///
    /// The minimum is zero when the interval holds an integer and the maximum
    /// is one half when it holds a half-integer; otherwise both come from the
    /// endpoints, which is exact because the map is monotone between those points.
    pub fn nearest_int_dist(&self) -> RealScalar {
        let p = self.prec();
        let half = Float::with_val(p, 0.5);
        if !self.is_finite() || self.width() >= 1 {
            return RealScalar::make(Float::new(p), half);
        }
        let frac_dist = |x: &Float| -> Float {
            let n = Float::with_val(x.prec(), x.round_ref());
            // the fractional part of a p-bit float is representable in p bits
            Float::with_val(x.prec(), x - &n).abs()
        };
        let dl = frac_dist(&self.lo);
        let dh = frac_dist(&self.hi);
        let fl = self.lo.to_integer_round(Round::Up).unwrap().0;
        let ch = self.hi.to_integer_round(Round::Down).unwrap().0;
        let has_int = fl <= ch;
        let two_lo = Float::with_val(self.lo.prec(), &self.lo * 2u32);
        let two_hi = Float::with_val(self.hi.prec(), &self.hi * 2u32);
        let a = two_lo.to_integer_round(Round::Up).unwrap().0;
        let b = two_hi.to_integer_round(Round::Down).unwrap().0;
        let has_half = if a > b {
            false
        } else {
            a != b || a.is_odd()
        };
        let lo = if has_int {
            Float::new(p)
        } else {
            min_f(dl.clone(), dh.clone())
        };
        let hi = if has_half { half } else { max_f(dl, dh) };
        RealScalar::make(Float::with_val(p, lo), Float::with_val(p, hi))
    }

    /// Midpoint and radius in scientific notation with `digits` significant digits.
    pub fn to_string_digits(&self, digits: usize) -> String {
        let m = self.value();
        let r = self.radius();
        format!(
            "{} +/- {}",
            m.to_string_radix(10, Some(digits)),
            r.to_string_radix(10, Some(3))
        )
    }
}

impl fmt::Display for RealScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_string_digits(20))
    }
}

impl From<&Rational> for RealScalar {
    fn from(q: &Rational) -> Self {
        RealScalar::from_rational(q, super::DEFAULT_PRECISION)
    }
}

impl Neg for &RealScalar {
    type Output = RealScalar;
    fn neg(self) -> RealScalar {
        RealScalar::make(-self.hi.clone(), -self.lo.clone())
    }
}

impl Neg for RealScalar {
    type Output = RealScalar;
    fn neg(self) -> RealScalar {
        RealScalar::make(-self.hi, -self.lo)
    }
}

fn add_ref(a: &RealScalar, b: &RealScalar) -> RealScalar {
    let p = a.prec().max(b.prec());
    RealScalar::make(down(p, &a.lo + &b.lo), up(p, &a.hi + &b.hi))
}

fn sub_ref(a: &RealScalar, b: &RealScalar) -> RealScalar {
    let p = a.prec().max(b.prec());
    RealScalar::make(down(p, &a.lo - &b.hi), up(p, &a.hi - &b.lo))
}

fn mul_ref(a: &RealScalar, b: &RealScalar) -> RealScalar {
    let p = a.prec().max(b.prec());
    let pairs = [(&a.lo, &b.lo), (&a.lo, &b.hi), (&a.hi, &b.lo), (&a.hi, &b.hi)];
    let mut lo: Option<Float> = None;
    let mut hi: Option<Float> = None;
    for (x, y) in pairs {
        let zero_times_inf = (x.is_zero() && y.is_infinite()) || (x.is_infinite() && y.is_zero());
        let (l, h) = if zero_times_inf {
            (Float::new(p), Float::new(p))
        } else {
            (down(p, x * y), up(p, x * y))
        };
        lo = Some(match lo {
            None => l,
            Some(c) => min_f(c, l),
        });
        hi = Some(match hi {
            None => h,
            Some(c) => max_f(c, h),
        });
    }
    RealScalar::make(lo.unwrap(), hi.unwrap())
}

fn div_ref(a: &RealScalar, b: &RealScalar) -> RealScalar {
    let p = a.prec().max(b.prec());
    if b.contains_zero() {
        return RealScalar::entire(p);
    }
    let pairs = [(&a.lo, &b.lo), (&a.lo, &b.hi), (&a.hi, &b.lo), (&a.hi, &b.hi)];
    let mut lo: Option<Float> = None;
    let mut hi: Option<Float> = None;
    for (x, y) in pairs {
        let (l, h) = if x.is_infinite() && y.is_infinite() {
            (
                Float::with_val(p, Special::NegInfinity),
                Float::with_val(p, Special::Infinity),
            )
        } else {
            (down(p, x / y), up(p, x / y))
        };
        lo = Some(match lo {
            None => l,
            Some(c) => min_f(c, l),
        });
        hi = Some(match hi {
            None => h,
            Some(c) => max_f(c, h),
        });
    }
    RealScalar::make(lo.unwrap(), hi.unwrap())
}

macro_rules! binop {
    ($tr:ident, $method:ident, $f:ident) => {
        impl $tr<&RealScalar> for &RealScalar {
            type Output = RealScalar;
            fn $method(self, rhs: &RealScalar) -> RealScalar {
                $f(self, rhs)
            }
        }
        impl $tr<RealScalar> for RealScalar {
            type Output = RealScalar;
            fn $method(self, rhs: RealScalar) -> RealScalar {
                $f(&self, &rhs)
            }
        }
        impl $tr<&RealScalar> for RealScalar {
            type Output = RealScalar;
            fn $method(self, rhs: &RealScalar) -> RealScalar {
                $f(&self, rhs)
            }
        }
        impl $tr<RealScalar> for &RealScalar {
            type Output = RealScalar;
            fn $method(self, rhs: RealScalar) -> RealScalar {
                $f(self, &rhs)
            }
        }
    };
}

binop!(Add, add, add_ref);
binop!(Sub, sub, sub_ref);
binop!(Mul, mul, mul_ref);
binop!(Div, div, div_ref);

#[derive(Serialize, Deserialize)]
struct Bounds {
    lo: String,
    hi: String,
    prec: u32,
}

fn float_to_exact(f: &Float) -> String {
    if f.is_infinite() {
        return if f.is_sign_negative() { "-inf".into() } else { "inf".into() };
    }
    match f.to_integer_exp() {
        Some((m, e)) => format!("{m}p{e}"),
        None => "0".into(),
    }
}

fn float_from_exact(s: &str, prec: u32) -> Option<Float> {
    match s {
        "inf" => return Some(Float::with_val(prec, Special::Infinity)),
        "-inf" => return Some(Float::with_val(prec, Special::NegInfinity)),
        "0" => return Some(Float::new(prec)),
        _ => {}
    }
    let (m, e) = s.split_once('p')?;
    let m: Integer = m.parse().ok()?;
    let e: i32 = e.parse().ok()?;
    if m.significant_bits() > prec {
        return None;
    }
    Some(Float::with_val(prec, m) << e)
}

impl Serialize for RealScalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Bounds {
            lo: float_to_exact(&self.lo),
            hi: float_to_exact(&self.hi),
            prec: self.prec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RealScalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let b = Bounds::deserialize(d)?;
        let parse = |s: &str| -> Result<Float, D::Error> {
            float_from_exact(s, b.prec).ok_or_else(|| serde::de::Error::custom(format!("bad bound {s:?}")))
        };
        let lo = parse(&b.lo)?;
        let hi = parse(&b.hi)?;
        if lo > hi {
            return Err(serde::de::Error::custom("inverted interval"));
        }
        Ok(RealScalar::make(lo, hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn third_times_three_contains_one() {
        let t = RealScalar::from_rational(&rat(1, 3), 64);
        let p = &t * &RealScalar::from_int(3, 64);
        assert!(p.contains_rational(&rat(1, 1)));
        assert!(!p.is_point());
    }

    #[test]
    fn point_arithmetic_is_exact_for_small_integers() {
        let a = RealScalar::from_int(7, 64);
        let b = RealScalar::from_int(-3, 64);
        assert_eq!((&a * &b).cmp_decided(&RealScalar::from_int(-21, 64)), Some(Ordering::Equal));
        assert_eq!((&a + &b).lo().to_f64(), 4.0);
    }

    #[test]
    fn overlapping_comparison_is_undecided() {
        let a = RealScalar::from_bounds(Float::with_val(64, 1), Float::with_val(64, 2));
        let b = RealScalar::from_bounds(Float::with_val(64, 1.5), Float::with_val(64, 3));
        assert_eq!(a.cmp_decided(&b), None);
        assert_eq!(a.sign(), Some(Ordering::Greater));
    }

    #[test]
    fn division_by_interval_around_zero_is_entire() {
        let a = RealScalar::one(64);
        let z = RealScalar::from_bounds(Float::with_val(64, -1), Float::with_val(64, 1));
        let q = &a / &z;
        assert!(q.lo().is_infinite() && q.hi().is_infinite());
    }

    #[test]
    fn nearest_int_dist_of_interval() {
        let iv = |a: f64, b: f64| RealScalar::from_bounds(Float::with_val(64, a), Float::with_val(64, b));
        let d = iv(0.2, 0.3).nearest_int_dist();
        assert_eq!(d.lo().to_f64(), 0.2);
        assert_eq!(d.hi().to_f64(), 0.3);
        let d = iv(0.4, 0.7).nearest_int_dist();
        assert!((d.lo().to_f64() - 0.3).abs() < 1e-15);
        assert_eq!(d.hi().to_f64(), 0.5);
        let d = iv(2.9, 3.25).nearest_int_dist();
        assert_eq!(d.lo().to_f64(), 0.0);
        assert_eq!(d.hi().to_f64(), 0.25);
        let d = iv(-0.75, -0.6).nearest_int_dist();
        assert_eq!(d.lo().to_f64(), 0.25);
        assert!((d.hi().to_f64() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn transcendental_enclosures() {
        let one = RealScalar::one(128);
        let e = one.exp();
        let l = e.ln();
        assert!(l.contains_rational(&rat(1, 1)));
        let two = RealScalar::from_int(2, 128);
        let s = two.sqrt();
        let sq = s.sqr();
        assert!(sq.contains_rational(&rat(2, 1)));
        assert!(s.radius() < Float::with_val(128, 1e-35));
    }

    #[test]
    fn serde_round_trip_keeps_bounds() {
        let x = RealScalar::from_rational(&rat(2, 7), 200);
        let s = serde_json::to_string(&x).unwrap();
        let y: RealScalar = serde_json::from_str(&s).unwrap();
        assert_eq!(x.lo(), y.lo());
        assert_eq!(x.hi(), y.hi());
    }
}
