//! Dense matrices of `RealScalar` entries.

use nalgebra::DMatrix;
use rug::Integer;
use serde::{Deserialize, Serialize};

use crate::scalar::RealScalar;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RMatrix {
    rows: usize,
    cols: usize,
    data: Vec<RealScalar>,
}

pub type RVector = Vec<RealScalar>;

impl RMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> RealScalar) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        RMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<RealScalar>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged rows");
        RMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn identity(n: usize, prec: u32) -> Self {
        Self::from_fn(n, n, |i, j| RealScalar::from_int((i == j) as i64, prec))
    }

    pub fn diagonal(entries: &[RealScalar]) -> Self {
        let p = entries.iter().map(|e| e.prec()).max().unwrap_or(64);
        let n = entries.len();
        Self::from_fn(n, n, |i, j| {
            if i == j {
                entries[i].clone()
            } else {
                RealScalar::zero(p)
            }
        })
    }

    pub fn from_f64(m: &DMatrix<f64>, prec: u32) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| RealScalar::from_f64(m[(i, j)], prec))
    }

    pub fn from_i64(m: &[Vec<i64>], prec: u32) -> Self {
        let r = m.len();
        let c = m.first().map_or(0, |x| x.len());
        Self::from_fn(r, c, |i, j| RealScalar::from_int(m[i][j], prec))
    }

    pub fn from_integer(m: &[Vec<Integer>], prec: u32) -> Self {
        let r = m.len();
        let c = m.first().map_or(0, |x| x.len());
        Self::from_fn(r, c, |i, j| RealScalar::from_integer(&m[i][j], prec))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &RealScalar {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: RealScalar) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[RealScalar] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> RVector {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn prec(&self) -> u32 {
        self.data.iter().map(|x| x.prec()).max().unwrap_or(64)
    }

    pub fn with_prec(&self, prec: u32) -> Self {
        RMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.with_prec(prec)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn mul(&self, other: &RMatrix) -> RMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let p = self.prec().max(other.prec());
        Self::from_fn(self.rows, other.cols, |i, j| {
            let mut acc = RealScalar::zero(p);
            for k in 0..self.cols {
                acc = &acc + &(self.get(i, k) * other.get(k, j));
            }
            acc
        })
    }

    pub fn mul_vec(&self, v: &[RealScalar]) -> RVector {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        let p = self.prec();
        (0..self.rows)
            .map(|i| {
                let mut acc = RealScalar::zero(p);
                for (k, vk) in v.iter().enumerate() {
                    acc = &acc + &(self.get(i, k) * vk);
                }
                acc
            })
            .collect()
    }

    pub fn mul_int_vec(&self, v: &[i64]) -> RVector {
        let p = self.prec();
        (0..self.rows)
            .map(|i| {
                let mut acc = RealScalar::zero(p);
                for (k, &vk) in v.iter().enumerate() {
                    if vk != 0 {
                        acc = &acc + &self.get(i, k).mul_int(vk);
                    }
                }
                acc
            })
            .collect()
    }

    /// Right multiplication by an integer matrix.
    pub fn mul_int_mat(&self, m: &[Vec<i64>]) -> RMatrix {
        let p = self.prec();
        let c = m.first().map_or(0, |r| r.len());
        Self::from_fn(self.rows, c, |i, j| {
            let mut acc = RealScalar::zero(p);
            for (k, row) in m.iter().enumerate() {
                if row[j] != 0 {
                    acc = &acc + &self.get(i, k).mul_int(row[j]);
                }
            }
            acc
        })
    }

    pub fn sub(&self, other: &RMatrix) -> RMatrix {
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j) - other.get(i, j))
    }

    pub fn add(&self, other: &RMatrix) -> RMatrix {
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j) + other.get(i, j))
    }

    /// Largest absolute entry (the max norm on matrices).
    pub fn max_abs(&self) -> RealScalar {
        let mut best = RealScalar::zero(self.prec());
        for x in &self.data {
            best = best.max(&x.abs());
        }
        best
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).to_f64())
    }

    /// Determinant by cofactor expansion for `n <= 4`, interval Gaussian elimination beyond.
    pub fn det(&self) -> RealScalar {
        assert_eq!(self.rows, self.cols, "square matrix required");
        let n = self.rows;
        let idx: Vec<usize> = (0..n).collect();
        if n <= 4 {
            return self.minor_det(&idx, &idx);
        }
        let p = self.prec();
        let mut a = self.clone();
        let mut det = RealScalar::one(p);
        for c in 0..n {
            let piv = (c..n)
                .max_by(|&x, &y| {
                    let ax = a.get(x, c).to_f64().abs();
                    let ay = a.get(y, c).to_f64().abs();
                    ax.partial_cmp(&ay).unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap();
            if piv != c {
                a.swap_rows(piv, c);
                det = -det;
            }
            let pv = a.get(c, c).clone();
            det = &det * &pv;
            for r in c + 1..n {
                let f = a.get(r, c) / &pv;
                for k in c..n {
                    let v = a.get(r, k) - &(&f * a.get(c, k));
                    a.set(r, k, v);
                }
            }
        }
        det
    }

    fn minor_det(&self, rows: &[usize], cols: &[usize]) -> RealScalar {
        let n = rows.len();
        if n == 1 {
            return self.get(rows[0], cols[0]).clone();
        }
        if n == 2 {
            return &(self.get(rows[0], cols[0]) * self.get(rows[1], cols[1]))
                - &(self.get(rows[0], cols[1]) * self.get(rows[1], cols[0]));
        }
        let mut acc = RealScalar::zero(self.prec());
        let sub_rows = &rows[1..];
        for (k, _) in cols.iter().enumerate() {
            let e = self.get(rows[0], cols[k]);
            if e.sign() == Some(std::cmp::Ordering::Equal) {
                continue;
            }
            let sub_cols: Vec<usize> = cols.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &c)| c).collect();
            let m = &(e * &self.minor_det(sub_rows, &sub_cols));
            acc = if k % 2 == 0 { &acc + m } else { &acc - m };
        }
        acc
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Interval Gauss-Jordan inverse with pivots chosen by midpoint magnitude;
    /// `None` when a pivot interval contains zero.
    pub fn inverse(&self) -> Option<RMatrix> {
        assert_eq!(self.rows, self.cols, "square matrix required");
        let n = self.rows;
        let p = self.prec();
        let mut a = self.clone();
        let mut inv = RMatrix::identity(n, p);
        for c in 0..n {
            let piv = (c..n)
                .max_by(|&x, &y| {
                    let ax = a.get(x, c).to_f64().abs();
                    let ay = a.get(y, c).to_f64().abs();
                    ax.partial_cmp(&ay).unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap();
            a.swap_rows(piv, c);
            inv.swap_rows(piv, c);
            let pv = a.get(c, c).clone();
            if pv.contains_zero() {
                return None;
            }
            for k in 0..n {
                let v = a.get(c, k) / &pv;
                a.set(c, k, v);
                let w = inv.get(c, k) / &pv;
                inv.set(c, k, w);
            }
            for r in 0..n {
                if r == c {
                    continue;
                }
                let f = a.get(r, c).clone();
                if f.sign() == Some(std::cmp::Ordering::Equal) {
                    continue;
                }
                for k in 0..n {
                    let v = a.get(r, k) - &(&f * a.get(c, k));
                    a.set(r, k, v);
                    let w = inv.get(r, k) - &(&f * inv.get(c, k));
                    inv.set(r, k, w);
                }
            }
        }
        Some(inv)
    }

    /// Whether every entry above the diagonal is exactly zero.
    pub fn is_lower_triangular(&self) -> bool {
        (0..self.rows).all(|i| (i + 1..self.cols).all(|j| self.get(i, j).sign() == Some(std::cmp::Ordering::Equal)))
    }
}

pub fn vec_sup_norm(v: &[RealScalar]) -> RealScalar {
    let p = v.iter().map(|x| x.prec()).max().unwrap_or(64);
    let mut best = RealScalar::zero(p);
    for x in v {
        best = best.max(&x.abs());
    }
    best
}

pub fn vec_product(v: &[RealScalar]) -> RealScalar {
    let p = v.iter().map(|x| x.prec()).max().unwrap_or(64);
    let mut acc = RealScalar::one(p);
    for x in v {
        acc = &acc * x;
    }
    acc
}

pub fn vec_add(a: &[RealScalar], b: &[RealScalar]) -> RVector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn vec_sub(a: &[RealScalar], b: &[RealScalar]) -> RVector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vec_to_f64(v: &[RealScalar]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64()).collect()
}
