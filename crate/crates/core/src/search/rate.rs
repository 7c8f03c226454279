use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::scalar::RealScalar;

/// Nondecreasing rate functions on `[1, inf)` built from iterated logarithms
/// and powers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RateFunction {
    /// `(log_(s) |x|)^delta`, where `log_(s)` is the `s`-th iterate of `max(1, log |x|)`.
    IteratedLog { s: u32, delta: f64 },
    /// `|x|^exponent`.
    Power { exponent: f64 },
    Product(Vec<RateFunction>),
}

impl RateFunction {
    pub fn one() -> Self {
        RateFunction::Power { exponent: 0.0 }
    }

    pub fn log() -> Self {
        RateFunction::IteratedLog { s: 1, delta: 1.0 }
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        match self {
            RateFunction::IteratedLog { s, delta } => iterated_log_f64(x, *s).powf(*delta),
            RateFunction::Power { exponent } => {
                if *exponent == 0.0 {
                    1.0
                } else {
                    x.abs().powf(*exponent)
                }
            }
            RateFunction::Product(fs) => fs.iter().map(|f| f.eval_f64(x)).product(),
        }
    }

    pub fn eval(&self, x: &RealScalar) -> RealScalar {
        let p = x.prec();
        match self {
            RateFunction::IteratedLog { s, delta } => {
                let l = iterated_log(x, *s);
                if *delta == 1.0 {
                    l
                } else {
                    l.powf(&RealScalar::from_f64(*delta, p))
                }
            }
            RateFunction::Power { exponent } => {
                if *exponent == 0.0 {
                    RealScalar::one(p)
                } else {
                    x.abs().powf(&RealScalar::from_f64(*exponent, p))
                }
            }
            RateFunction::Product(fs) => fs.iter().fold(RealScalar::one(p), |acc, f| &acc * &f.eval(x)),
        }
    }

    /// Whether the function tends to infinity (needed for a criterion rate).
    pub fn is_unbounded(&self) -> bool {
        match self {
            RateFunction::IteratedLog { delta, .. } => *delta > 0.0,
            RateFunction::Power { exponent } => *exponent > 0.0,
            RateFunction::Product(fs) => {
                fs.iter().any(|f| f.is_unbounded()) && fs.iter().all(|f| f.is_unbounded() || *f == RateFunction::one())
            }
        }
    }

    fn check(&self) -> Result<(), SearchError> {
        match self {
            RateFunction::IteratedLog { delta, .. } if !(*delta >= 0.0 && delta.is_finite()) => {
                Err(SearchError::Rate("log exponent must be nonnegative".into()))
            }
            RateFunction::Power { exponent } if !(*exponent >= 0.0 && exponent.is_finite()) => {
                Err(SearchError::Rate("power must be nonnegative".into()))
            }
            RateFunction::Product(fs) => fs.iter().try_for_each(|f| f.check()),
            _ => Ok(()),
        }
    }
}

pub fn iterated_log_f64(x: f64, s: u32) -> f64 {
    let mut v = x.abs();
    for _ in 0..s {
        v = v.ln().max(1.0);
    }
    v
}

pub fn iterated_log(x: &RealScalar, s: u32) -> RealScalar {
    let one = RealScalar::one(x.prec());
    let e = one.exp();
    let mut v = x.abs();
    for _ in 0..s {
        // the floor of the iterate is exact once |v| <= e is decided
        v = if v.definitely_le(&e) { one.clone() } else { v.ln().max(&one) };
    }
    v
}

impl fmt::Display for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFunction::IteratedLog { s, delta } if *delta == 1.0 => write!(f, "log{s}"),
            RateFunction::IteratedLog { s, delta } => write!(f, "log{s}^{delta}"),
            RateFunction::Power { exponent } if *exponent == 0.0 => write!(f, "one"),
            RateFunction::Power { exponent } => write!(f, "pow{exponent}"),
            RateFunction::Product(fs) => {
                let parts: Vec<String> = fs.iter().map(|x| x.to_string()).collect();
                write!(f, "{}", parts.join("*"))
            }
        }
    }
}

/// `one`, `logS`, `logS^D`, `powE`, and `*`-products of those.
impl FromStr for RateFunction {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.contains('*') {
            let fs = s.split('*').map(|p| p.parse()).collect::<Result<Vec<_>, _>>()?;
            let r = RateFunction::Product(fs);
            r.check()?;
            return Ok(r);
        }
        let bad = || SearchError::Rate(format!("cannot parse rate {s:?}"));
        let r = if s == "one" {
            RateFunction::one()
        } else if let Some(rest) = s.strip_prefix("log") {
            let (lv, dl) = match rest.split_once('^') {
                Some((a, b)) => (a, b.parse::<f64>().map_err(|_| bad())?),
                None => (rest, 1.0),
            };
            let lv = if lv.is_empty() { 1 } else { lv.parse::<u32>().map_err(|_| bad())? };
            RateFunction::IteratedLog { s: lv, delta: dl }
        } else if let Some(rest) = s.strip_prefix("pow") {
            RateFunction::Power {
                exponent: rest.parse().map_err(|_| bad())?,
            }
        } else {
            return Err(bad());
        };
        r.check()?;
        Ok(r)
    }
}
