//! Exact arithmetic in a totally real field `Q[x]/(f)` and an order inside it.

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use super::OrbitError;
use crate::linalg::{det_rational, solve_rational, IntMatrix};
use crate::scalar::{is_irreducible_totally_real, AlgebraicNumber, IntPoly, RealScalar};

/// Field element in power-basis coordinates `sum c_k theta^k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldElement {
    #[serde(with = "crate::scalar::rational_vec")]
    pub coords: Vec<Rational>,
}

impl FieldElement {
    pub fn zero(d: usize) -> Self {
        FieldElement {
            coords: vec![Rational::new(); d],
        }
    }

    pub fn from_int(n: i64, d: usize) -> Self {
        let mut e = Self::zero(d);
        e.coords[0] = Rational::from(n);
        e
    }

    pub fn is_rational(&self) -> bool {
        self.coords[1..].iter().all(|c| *c == 0)
    }

    pub fn is_one(&self) -> bool {
        self.is_rational() && self.coords[0] == 1
    }

    pub fn add(&self, o: &FieldElement) -> FieldElement {
        FieldElement {
            coords: self.coords.iter().zip(&o.coords).map(|(a, b)| Rational::from(a + b)).collect(),
        }
    }

    pub fn sub(&self, o: &FieldElement) -> FieldElement {
        FieldElement {
            coords: self.coords.iter().zip(&o.coords).map(|(a, b)| Rational::from(a - b)).collect(),
        }
    }

    pub fn neg(&self) -> FieldElement {
        FieldElement {
            coords: self.coords.iter().map(|a| Rational::from(-a)).collect(),
        }
    }
}

/// A totally real field of degree `d` with a chosen order, given by a
/// `Z`-basis in power-basis coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TotallyRealField {
    minpoly: IntPoly,
    embeddings: Vec<AlgebraicNumber>,
    integral_basis: Vec<FieldElement>,
}

impl TotallyRealField {
    /// The order `Z[theta]`.
    pub fn new(minpoly: IntPoly) -> Result<Self, OrbitError> {
        let d = minpoly.degree().unwrap_or(0);
        let basis = (0..d)
            .map(|k| {
                let mut e = FieldElement::zero(d);
                e.coords[k] = Rational::from(1);
                e
            })
            .collect();
        Self::with_basis(minpoly, basis)
    }

    pub fn with_basis(minpoly: IntPoly, integral_basis: Vec<FieldElement>) -> Result<Self, OrbitError> {
        if !is_irreducible_totally_real(&minpoly)? {
            return Err(OrbitError::NotTotallyReal);
        }
        let d = minpoly.degree().unwrap();
        if integral_basis.len() != d || integral_basis.iter().any(|b| b.coords.len() != d) {
            return Err(OrbitError::Basis("wrong number of basis elements".into()));
        }
        let embeddings = AlgebraicNumber::real_roots(&minpoly)?;
        let f = TotallyRealField {
            minpoly,
            embeddings,
            integral_basis,
        };
        if f.order_discriminant() == 0 {
            return Err(OrbitError::Basis("basis is degenerate".into()));
        }
        // the basis must span a ring: products of basis elements stay in the order
        for a in &f.integral_basis {
            for b in &f.integral_basis {
                if f.order_coords(&f.mul(a, b)).is_none() {
                    return Err(OrbitError::Basis("basis is not closed under multiplication".into()));
                }
            }
        }
        if f.order_coords(&FieldElement::from_int(1, d)).is_none() {
            return Err(OrbitError::Basis("order does not contain 1".into()));
        }
        Ok(f)
    }

    /// `x^3 - x^2 - 2x + 1`, the cubic field of conductor 7.
    pub fn conductor7() -> Self {
        Self::new(IntPoly::from_i64(&[1, -2, -1, 1])).expect("conductor-7 cubic is totally real")
    }

    pub fn degree(&self) -> usize {
        self.embeddings.len()
    }

    pub fn minpoly(&self) -> &IntPoly {
        &self.minpoly
    }

    pub fn embeddings(&self) -> &[AlgebraicNumber] {
        &self.embeddings
    }

    pub fn integral_basis(&self) -> &[FieldElement] {
        &self.integral_basis
    }

    pub(crate) fn negate_basis_element(&mut self, k: usize) {
        self.integral_basis[k] = self.integral_basis[k].neg();
    }

    pub fn mul(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        let d = self.degree();
        let mut prod = vec![Rational::new(); 2 * d - 1];
        for (i, x) in a.coords.iter().enumerate() {
            if *x == 0 {
                continue;
            }
            for (j, y) in b.coords.iter().enumerate() {
                prod[i + j] += Rational::from(x * y);
            }
        }
        // reduce with the monic minimal polynomial
        let f = self.minpoly.coeffs();
        for k in (d..prod.len()).rev() {
            let c = std::mem::take(&mut prod[k]);
            if c == 0 {
                continue;
            }
            for (i, fi) in f.iter().enumerate().take(d) {
                prod[k - d + i] -= Rational::from(&c * fi);
            }
        }
        prod.truncate(d);
        FieldElement { coords: prod }
    }

    pub fn pow(&self, a: &FieldElement, n: i64) -> Option<FieldElement> {
        let d = self.degree();
        let base = if n < 0 { self.inverse(a)? } else { a.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = FieldElement::from_int(1, d);
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &b);
            }
            e >>= 1;
            if e > 0 {
                b = self.mul(&b, &b);
            }
        }
        Some(acc)
    }

    /// Matrix of `x -> a x` on power-basis coordinates (column k is `a theta^k`).
    pub fn mult_matrix(&self, a: &FieldElement) -> Vec<Vec<Rational>> {
        let d = self.degree();
        let cols: Vec<FieldElement> = (0..d)
            .map(|k| {
                let mut e = FieldElement::zero(d);
                e.coords[k] = Rational::from(1);
                self.mul(a, &e)
            })
            .collect();
        (0..d).map(|i| (0..d).map(|k| cols[k].coords[i].clone()).collect()).collect()
    }

    pub fn norm(&self, a: &FieldElement) -> Rational {
        det_rational(&self.mult_matrix(a))
    }

    pub fn trace(&self, a: &FieldElement) -> Rational {
        let m = self.mult_matrix(a);
        (0..self.degree()).fold(Rational::new(), |acc, i| acc + &m[i][i])
    }

    pub fn inverse(&self, a: &FieldElement) -> Option<FieldElement> {
        let d = self.degree();
        let one = FieldElement::from_int(1, d);
        solve_rational(&self.mult_matrix(a), &one.coords).map(|coords| FieldElement { coords })
    }

    /// Coordinates in the order basis, if `a` lies in the order.
    pub fn order_coords(&self, a: &FieldElement) -> Option<Vec<Integer>> {
        let q = self.order_coords_rational(a)?;
        q.into_iter()
            .map(|c| if *c.denom() == 1 { Some(c.numer().clone()) } else { None })
            .collect()
    }

    pub fn order_coords_rational(&self, a: &FieldElement) -> Option<Vec<Rational>> {
        let d = self.degree();
        let m: Vec<Vec<Rational>> = (0..d)
            .map(|i| (0..d).map(|k| self.integral_basis[k].coords[i].clone()).collect())
            .collect();
        solve_rational(&m, &a.coords)
    }

    pub fn from_order_coords(&self, c: &[Integer]) -> FieldElement {
        let d = self.degree();
        let mut out = FieldElement::zero(d);
        for (k, ck) in c.iter().enumerate() {
            for i in 0..d {
                out.coords[i] += Rational::from(ck * &self.integral_basis[k].coords[i]);
            }
        }
        out
    }

    /// Multiplication by `a` on order coordinates, when it preserves the order.
    pub fn order_action(&self, a: &FieldElement) -> Option<IntMatrix> {
        let d = self.degree();
        let cols: Vec<Vec<Integer>> = self
            .integral_basis
            .iter()
            .map(|w| self.order_coords(&self.mul(a, w)))
            .collect::<Option<_>>()?;
        Some((0..d).map(|i| (0..d).map(|k| cols[k][i].clone()).collect()).collect())
    }

    /// `det(Tr(w_i w_j))` for the order basis.
    pub fn order_discriminant(&self) -> Integer {
        let d = self.degree();
        let m: Vec<Vec<Rational>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| self.trace(&self.mul(&self.integral_basis[i], &self.integral_basis[j])))
                    .collect()
            })
            .collect();
        det_rational(&m).numer().clone()
    }

    /// `sigma_i(a)`, with embeddings ordered by ascending root.
    pub fn embed(&self, a: &FieldElement, i: usize, prec: u32) -> RealScalar {
        let wp = prec + 32;
        let t = self.embeddings[i].refine(wp);
        let mut acc = RealScalar::zero(wp);
        for c in a.coords.iter().rev() {
            acc = &(&acc * &t) + &RealScalar::from_rational(c, wp);
        }
        acc.with_prec(prec)
    }

    pub fn embed_all(&self, a: &FieldElement, prec: u32) -> Vec<RealScalar> {
        (0..self.degree()).map(|i| self.embed(a, i, prec)).collect()
    }

    /// Signs of the embeddings (+1/-1) of a nonzero element.
    pub fn signs(&self, a: &FieldElement) -> Vec<i32> {
        let mut prec = 128;
        loop {
            let v = self.embed_all(a, prec);
            if v.iter().all(|x| x.sign().is_some_and(|s| s != std::cmp::Ordering::Equal)) {
                return v.iter().map(|x| if x.is_positive() == Some(true) { 1 } else { -1 }).collect();
            }
            prec *= 2;
            assert!(prec <= 1 << 14, "embedding of a nonzero element did not separate from zero");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conductor7_basics() {
        let f = TotallyRealField::conductor7();
        assert_eq!(f.degree(), 3);
        assert_eq!(f.order_discriminant(), 49);
        let theta = FieldElement {
            coords: vec![Rational::new(), Rational::from(1), Rational::new()],
        };
        // theta is a unit: constant term of the minimal polynomial is 1
        assert_eq!(f.norm(&theta).abs(), 1);
        let inv = f.inverse(&theta).unwrap();
        assert!(f.mul(&theta, &inv).is_one());
        let cube = f.pow(&theta, 3).unwrap();
        // theta^3 = theta^2 + 2 theta - 1
        assert_eq!(cube.coords, vec![Rational::from(-1), Rational::from(2), Rational::from(1)]);
        let e = f.embed_all(&theta, 128);
        let prod = &(&e[0] * &e[1]) * &e[2];
        assert!(prod.contains_rational(&Rational::from(-1)));
    }
}
