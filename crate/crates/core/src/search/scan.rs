use std::cmp::Ordering;

use rayon::prelude::*;
use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use super::rate::RateFunction;
use super::SearchError;
use crate::scalar::{escalate, ExactReal, RealScalar, DEFAULT_PRECISION};

/// Values of `|q|` per parallel chunk; fixed so results do not depend on the worker count.
const CHUNK: u64 = 1 << 16;
/// Fixed-point distances below `2^-80` are resolved exactly (possible integer hits).
const ZERO_SUSPECT: u128 = 1 << 48;
/// Relative slack of the double-precision screen.
const SCREEN_SLACK: f64 = 1e-9;
const ZERO_EXAMPLES: usize = 16;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanRecord {
    pub q: i64,
    /// `|q| <q u - alpha> <q v - beta>`.
    pub value: RealScalar,
    /// `value * rate(|q|)`.
    pub rated: RealScalar,
    pub running_min: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanResult {
    pub q_max: u64,
    /// Strict running minima of the rated value among positive values, in scan order.
    pub records: Vec<ScanRecord>,
    /// `q` with value exactly zero (excluded from the minima).
    pub zero_hits: u64,
    pub zero_examples: Vec<i64>,
    /// `q` whose zero test or record comparison stayed undecided at maximal precision.
    pub undecided: Vec<i64>,
}

impl ScanResult {
    /// Smallest rated value over `|q| <= q`, from the record list.
    pub fn min_up_to(&self, q: u64) -> Option<&ScanRecord> {
        self.records.iter().take_while(|r| r.q.unsigned_abs() <= q).last()
    }
}

/// The four scan inputs with cached approximations.
struct Inputs {
    exact: [ExactReal; 4],
    fixed: [u128; 4],
    /// `2 alpha` and `2 beta` are integers, so the values at `q` and `-q` agree.
    symmetric: bool,
}

impl Inputs {
    fn new(exact: [ExactReal; 4]) -> Self {
        let fixed = std::array::from_fn(|k| fixed_frac(&exact[k]));
        let symmetric = exact[2..]
            .iter()
            .all(|x| x.as_rational().is_some_and(|r| *Rational::from(r * 2).denom() == 1));
        Inputs { exact, fixed, symmetric }
    }

    fn approx(&self, prec: u32) -> [RealScalar; 4] {
        std::array::from_fn(|k| self.exact[k].approx(prec))
    }

    fn rational(&self) -> Option<[&Rational; 4]> {
        let r: Vec<&Rational> = self.exact.iter().filter_map(|e| e.as_rational()).collect();
        (r.len() == 4).then(|| [r[0], r[1], r[2], r[3]])
    }
}

/// `frac(x) * 2^128` rounded, as a wrapping fixed-point number.
fn fixed_frac(x: &ExactReal) -> u128 {
    let scaled = &x.approx(256) * &RealScalar::from_integer(&(Integer::from(1) << 128), 256);
    scaled.round_value().to_u128_wrapping()
}

fn fixed_dist(q: i64, u: u128, a: u128) -> u128 {
    let qu = if q >= 0 {
        (q as u128).wrapping_mul(u)
    } else {
        (q.unsigned_abs() as u128).wrapping_mul(u).wrapping_neg()
    };
    let x = qu.wrapping_sub(a);
    x.min(x.wrapping_neg())
}

fn fixed_to_f64(x: u128) -> f64 {
    x as f64 * 2f64.powi(-128)
}

#[derive(Clone, Debug)]
enum Event {
    Candidate(i64),
    Suspect(i64),
}

/// Events of one chunk in scan order: screened candidates for a record and
/// possible exact hits.
fn chunk_events(inp: &Inputs, rate: &RateFunction, lo: u64, hi: u64) -> Vec<Event> {
    let [u, v, a, b] = inp.fixed;
    let mut out = Vec::new();
    let mut local = f64::INFINITY;
    for m in lo..=hi {
        let rf = rate.eval_f64(m as f64);
        for q in [m as i64, -(m as i64)] {
            let d1 = fixed_dist(q, u, a);
            let d2 = fixed_dist(q, v, b);
            if d1 < ZERO_SUSPECT || d2 < ZERO_SUSPECT {
                out.push(Event::Suspect(q));
                continue;
            }
            let r = m as f64 * fixed_to_f64(d1) * fixed_to_f64(d2) * rf;
            if r <= local * (1.0 + SCREEN_SLACK) {
                out.push(Event::Candidate(q));
                local = local.min(r);
            }
        }
    }
    out
}

fn value_at(inp: &Inputs, q: i64, prec: u32) -> RealScalar {
    let [u, v, a, b] = inp.approx(prec);
    let d1 = (&u.mul_int(q) - &a).nearest_int_dist();
    let d2 = (&v.mul_int(q) - &b).nearest_int_dist();
    &(&d1 * &d2) * &RealScalar::from_int(q.abs(), prec)
}

fn exact_value(r: [&Rational; 4], q: i64) -> Rational {
    let dist = |x: &Rational, s: &Rational| {
        let t = Rational::from(x * q) - s;
        let f = Rational::from(t.clone() - Rational::from(t.floor_ref()));
        let g = Rational::from(1) - f.clone();
        if f < g {
            f
        } else {
            g
        }
    };
    Rational::from(q.abs()) * dist(r[0], r[2]) * dist(r[1], r[3])
}

/// Zero test: `Some(true)` exact hit, `Some(false)` positive, `None` undecided.
fn is_zero(inp: &Inputs, q: i64) -> Option<bool> {
    if let Some(r) = inp.rational() {
        return Some(exact_value(r, q) == 0);
    }
    escalate(DEFAULT_PRECISION, |p| {
        let v = value_at(inp, q, p);
        if v.is_positive() == Some(true) {
            Some(false)
        } else {
            None
        }
    })
    .ok()
    .map(|x| x.0)
}

/// Decided comparison of the rated values at `q1` and `q2`; `Equal` only for
/// `|q1| = |q2|` with a symmetric shift or equal exact rational values.
fn compare(inp: &Inputs, rate: &RateFunction, q1: i64, q2: i64) -> Option<Ordering> {
    if q1.abs() == q2.abs() {
        if inp.symmetric {
            return Some(Ordering::Equal);
        }
        if let Some(r) = inp.rational() {
            return Some(exact_value(r, q1).cmp(&exact_value(r, q2)));
        }
    }
    escalate(DEFAULT_PRECISION, |p| {
        let a = &value_at(inp, q1, p) * &rate.eval(&RealScalar::from_int(q1.abs(), p));
        let b = &value_at(inp, q2, p) * &rate.eval(&RealScalar::from_int(q2.abs(), p));
        a.cmp_decided(&b)
    })
    .ok()
    .map(|x| x.0)
}

fn record(inp: &Inputs, rate: &RateFunction, q: i64) -> ScanRecord {
    let p = DEFAULT_PRECISION;
    let value = value_at(inp, q, p);
    let rated = &value * &rate.eval(&RealScalar::from_int(q.abs(), p));
    ScanRecord {
        q,
        value,
        rated,
        running_min: true,
    }
}

/// Running minima of `rate(|q|) |q| <q u - alpha> <q v - beta>` over
/// `1 <= |q| <= q_max`, scanning `|q|` upwards with `q` before `-q`. A new
/// record needs a decided strict decrease, so ties keep the earlier `q`.
/// Chunks are screened in parallel in fixed-point arithmetic and merged in
/// order, so the output does not depend on the number of workers.
pub fn direct_scan(inputs: [ExactReal; 4], q_max: u64, rate: &RateFunction) -> Result<ScanResult, SearchError> {
    if q_max < 2 {
        return Err(SearchError::Argument("scan bound must be at least 2".into()));
    }
    if q_max > i64::MAX as u64 / 2 {
        return Err(SearchError::Argument("scan bound too large".into()));
    }
    let inp = Inputs::new(inputs);
    let n_chunks = q_max.div_ceil(CHUNK);
    let events: Vec<Vec<Event>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| chunk_events(&inp, rate, c * CHUNK + 1, ((c + 1) * CHUNK).min(q_max)))
        .collect();
    let mut res = ScanResult {
        q_max,
        records: Vec::new(),
        zero_hits: 0,
        zero_examples: Vec::new(),
        undecided: Vec::new(),
    };
    let mut best: Option<(i64, f64)> = None;
    let screen = |q: i64| -> f64 {
        let d1 = fixed_to_f64(fixed_dist(q, inp.fixed[0], inp.fixed[2]));
        let d2 = fixed_to_f64(fixed_dist(q, inp.fixed[1], inp.fixed[3]));
        q.unsigned_abs() as f64 * d1 * d2 * rate.eval_f64(q.unsigned_abs() as f64)
    };
    for ev in events.into_iter().flatten() {
        let q = match ev {
            Event::Suspect(q) => match is_zero(&inp, q) {
                Some(true) => {
                    res.zero_hits += 1;
                    if res.zero_examples.len() < ZERO_EXAMPLES {
                        res.zero_examples.push(q);
                    }
                    continue;
                }
                Some(false) => q,
                None => {
                    res.undecided.push(q);
                    continue;
                }
            },
            Event::Candidate(q) => q,
        };
        let r = screen(q);
        match best {
            Some((_, bf)) if r > bf * (1.0 + SCREEN_SLACK) + 1e-300 => {}
            Some((bq, _)) => match compare(&inp, rate, q, bq) {
                Some(Ordering::Less) => {
                    res.records.push(record(&inp, rate, q));
                    best = Some((q, r));
                }
                Some(_) => {}
                None => res.undecided.push(q),
            },
            None => {
                res.records.push(record(&inp, rate, q));
                best = Some((q, r));
            }
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(s: &str) -> ExactReal {
        ExactReal::parse(s).unwrap()
    }

    #[test]
    fn all_zero_inputs_hit_everywhere() {
        let r = direct_scan([ex("0"), ex("0"), ex("0"), ex("0")], 20, &RateFunction::one()).unwrap();
        assert!(r.records.is_empty());
        assert_eq!(r.zero_hits, 40);
    }

    #[test]
    fn symmetric_shift_has_no_undecided_ties() {
        let u = ex("alg:1,-2,-1,1@2");
        let v = ex("alg:1,-2,-1,1@2|0,0,1");
        let r = direct_scan([u, v, ex("1/2"), ex("0")], 5000, &RateFunction::one()).unwrap();
        assert!(r.undecided.is_empty());
        assert!(r.records.iter().all(|x| x.q > 0));
    }

    #[test]
    fn half_third_table() {
        let r = direct_scan([ex("1/2"), ex("1/3"), ex("0"), ex("0")], 10, &RateFunction::one()).unwrap();
        // nonzero only for q = +-1, +-5, +-7, with values |q| / 6
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.records[0].q, 1);
        assert_eq!(r.zero_hits, 14);
    }
}
