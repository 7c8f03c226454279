use rug::Rational;
use serde::{Deserialize, Serialize};

use super::SearchError;

/// An extreme point of the normalized vectors `v_i / L(v_i)` with a strictly
/// separating functional `s1` (`s1(v_j) > 0`, `s1(v_i) < 0` otherwise) and a
/// supporting one `s2` (`s2(v_j) = 0`, `s2(v_i) < 0` otherwise).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtremePoint {
    pub j: usize,
    #[serde(with = "crate::scalar::rational_vec")]
    pub s1: Vec<Rational>,
    #[serde(with = "crate::scalar::rational_vec")]
    pub s2: Vec<Rational>,
    /// `min` over `i != j` of `-s1(v_i) / L(v_i)`, and `s1(v_j) / L(v_j)`.
    pub margin1: f64,
    /// `min` over `i != j` of `-s2(v_i) / L(v_i)`.
    pub margin2: f64,
}

impl ExtremePoint {
    pub fn s1_f64(&self) -> Vec<f64> {
        self.s1.iter().map(|x| x.to_f64()).collect()
    }

    pub fn s2_f64(&self) -> Vec<f64> {
        self.s2.iter().map(|x| x.to_f64()).collect()
    }
}

fn exact(v: &[f64]) -> Result<Vec<Rational>, SearchError> {
    v.iter()
        .map(|&x| Rational::from_f64(x).ok_or_else(|| SearchError::Argument(format!("non-finite entry {x}"))))
        .collect()
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).fold(Rational::new(), |acc, (x, y)| acc + Rational::from(x * y))
}

/// Exact sign check of the two functionals on all input vectors.
pub fn verify_extreme(vectors: &[Vec<f64>], ep: &ExtremePoint) -> Result<bool, SearchError> {
    for (i, v) in vectors.iter().enumerate() {
        let v = exact(v)?;
        let a = dot(&ep.s1, &v);
        let b = dot(&ep.s2, &v);
        let ok = if i == ep.j { a > 0 && b == 0 } else { a < 0 && b < 0 };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The lexicographically largest normalized vector is an extreme point of the
/// hull; a functional `c` ranking it strictly first is found by weighting the
/// coordinates with powers of a growing base, and both functionals are
/// `c - level * L`. All arithmetic is exact on the given doubles.
pub fn extreme_point_functional(vectors: &[Vec<f64>], l: &[f64]) -> Result<ExtremePoint, SearchError> {
    if vectors.is_empty() {
        return Err(SearchError::Argument("no vectors".into()));
    }
    let n = l.len();
    if vectors.iter().any(|v| v.len() != n) {
        return Err(SearchError::Argument("vector length differs from the functional".into()));
    }
    let lq = exact(l)?;
    let vq: Vec<Vec<Rational>> = vectors.iter().map(|v| exact(v)).collect::<Result<_, _>>()?;
    let lv: Vec<Rational> = vq.iter().map(|v| dot(&lq, v)).collect();
    if lv.iter().any(|x| *x <= 0) {
        return Err(SearchError::Argument("L must be positive on every vector".into()));
    }
    let norm: Vec<Vec<Rational>> = vq
        .iter()
        .zip(&lv)
        .map(|(v, s)| v.iter().map(|x| Rational::from(x / s)).collect())
        .collect();
    for a in 0..norm.len() {
        for b in a + 1..norm.len() {
            if norm[a] == norm[b] {
                return Err(SearchError::Degenerate(format!("vectors {a} and {b} coincide after normalization")));
            }
        }
    }
    if vectors.len() == 1 {
        return Ok(ExtremePoint {
            j: 0,
            s1: lq,
            s2: vec![Rational::new(); n],
            margin1: 1.0,
            margin2: f64::INFINITY,
        });
    }
    let j = (0..norm.len()).max_by(|&a, &b| norm[a].cmp(&norm[b])).unwrap();
    let mut base = Rational::from(2);
    let c = loop {
        let mut w = Rational::from(1);
        let mut c = vec![Rational::new(); n];
        for k in (0..n).rev() {
            c[k] = w.clone();
            w *= &base;
        }
        let top = dot(&c, &norm[j]);
        if (0..norm.len()).filter(|&i| i != j).all(|i| dot(&c, &norm[i]) < top) {
            break c;
        }
        base *= 2;
    };
    let top = dot(&c, &norm[j]);
    let gap = (0..norm.len())
        .filter(|&i| i != j)
        .map(|i| Rational::from(&top - &dot(&c, &norm[i])))
        .min()
        .unwrap();
    let level1 = Rational::from(&top - Rational::from(&gap / 2));
    let s1: Vec<Rational> = c.iter().zip(&lq).map(|(ci, li)| Rational::from(ci - Rational::from(&level1 * li))).collect();
    let s2: Vec<Rational> = c.iter().zip(&lq).map(|(ci, li)| Rational::from(ci - Rational::from(&top * li))).collect();
    let mut margin1 = dot(&s1, &norm[j]).to_f64();
    let mut margin2 = f64::INFINITY;
    for (i, v) in norm.iter().enumerate() {
        if i != j {
            margin1 = margin1.min(-dot(&s1, v).to_f64());
            margin2 = margin2.min(-dot(&s2, v).to_f64());
        }
    }
    let ep = ExtremePoint {
        j,
        s1,
        s2,
        margin1,
        margin2,
    };
    if !verify_extreme(vectors, &ep)? {
        return Err(SearchError::Verification("extreme point functionals failed the sign check".into()));
    }
    Ok(ep)
}
