//! Small dense linear algebra: exact rational/integer routines and floating
//! point lattice reduction used for screening.

use nalgebra::{DMatrix, DVector};
use rug::{Integer, Rational};

pub type IntMatrix = Vec<Vec<Integer>>;

/// Determinant by Gaussian elimination over the rationals.
pub fn det_rational(m: &[Vec<Rational>]) -> Rational {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let mut det = Rational::from(1);
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| a[r][c] != 0) else {
            return Rational::new();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        let piv = a[c][c].clone();
        det *= &piv;
        for r in c + 1..n {
            if a[r][c] == 0 {
                continue;
            }
            let f = Rational::from(&a[r][c] / &piv);
            for k in c..n {
                let t = Rational::from(&f * &a[c][k]);
                a[r][k] -= t;
            }
        }
    }
    det
}

/// Determinant of an integer matrix (fraction-free Bareiss elimination).
pub fn det_integer(m: &[Vec<Integer>]) -> Integer {
    let n = m.len();
    if n == 0 {
        return Integer::from(1);
    }
    let mut a: IntMatrix = m.to_vec();
    let mut sign = 1i32;
    let mut prev = Integer::from(1);
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            let Some(p) = (k + 1..n).find(|&r| a[r][k] != 0) else {
                return Integer::new();
            };
            a.swap(p, k);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = Integer::from(&a[i][j] * &a[k][k]) - Integer::from(&a[i][k] * &a[k][j]);
                a[i][j] = v.div_exact(&prev);
            }
        }
        prev = a[k][k].clone();
    }
    let d = a[n - 1][n - 1].clone();
    if sign < 0 {
        -d
    } else {
        d
    }
}

/// Solve `A x = b` exactly; `None` when `A` is singular.
pub fn solve_rational(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
    let n = a.len();
    let mut m: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&r| m[r][c] != 0)?;
        m.swap(p, c);
        let piv = m[c][c].clone();
        for k in c..=n {
            m[c][k] /= &piv;
        }
        for r in 0..n {
            if r == c || m[r][c] == 0 {
                continue;
            }
            let f = m[r][c].clone();
            for k in c..=n {
                let t = Rational::from(&f * &m[c][k]);
                m[r][k] -= t;
            }
        }
    }
    Some(m.into_iter().map(|mut r| r.pop().unwrap()).collect())
}

pub fn int_mat_mul(a: &[Vec<Integer>], b: &[Vec<Integer>]) -> IntMatrix {
    let n = a.len();
    let k = b.len();
    let m = if k == 0 { 0 } else { b[0].len() };
    let mut out = vec![vec![Integer::new(); m]; n];
    for i in 0..n {
        for l in 0..k {
            if a[i][l] == 0 {
                continue;
            }
            for j in 0..m {
                out[i][j] += Integer::from(&a[i][l] * &b[l][j]);
            }
        }
    }
    out
}

pub fn int_identity(n: usize) -> IntMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| Integer::from((i == j) as i32)).collect())
        .collect()
}

pub fn int_mat_from_i64(m: &[Vec<i64>]) -> IntMatrix {
    m.iter().map(|r| r.iter().map(|&x| Integer::from(x)).collect()).collect()
}

pub fn int_mat_to_i64(m: &[Vec<Integer>]) -> Option<Vec<Vec<i64>>> {
    m.iter()
        .map(|r| r.iter().map(|x| x.to_i64()).collect::<Option<Vec<_>>>())
        .collect()
}

/// Row-style Hermite normal form with transform: returns `(H, U)` with `U M = H`,
/// `U` unimodular, nonzero rows of `H` first in echelon form with positive pivots.
pub fn row_hnf(m: &[Vec<Integer>]) -> (IntMatrix, IntMatrix) {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut h: IntMatrix = m.to_vec();
    let mut u = int_identity(rows);
    let mut pivot_row = 0;
    let mut pivots = Vec::new();
    for c in 0..cols {
        if pivot_row == rows {
            break;
        }
        loop {
            // smallest nonzero entry in column c at or below pivot_row
            let best = (pivot_row..rows)
                .filter(|&r| h[r][c] != 0)
                .min_by(|&x, &y| h[x][c].cmp_abs(&h[y][c]));
            let Some(b) = best else { break };
            h.swap(pivot_row, b);
            u.swap(pivot_row, b);
            let mut done = true;
            for r in pivot_row + 1..rows {
                if h[r][c] == 0 {
                    continue;
                }
                let q = <(Integer, Integer)>::from(h[r][c].div_rem_floor_ref(&h[pivot_row][c])).0;
                for k in 0..cols {
                    let t = Integer::from(&q * &h[pivot_row][k]);
                    h[r][k] -= t;
                }
                for k in 0..rows {
                    let t = Integer::from(&q * &u[pivot_row][k]);
                    u[r][k] -= t;
                }
                if h[r][c] != 0 {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if pivot_row < rows && h[pivot_row][c] != 0 {
            if h[pivot_row][c] < 0 {
                for k in 0..cols {
                    h[pivot_row][k] = Integer::from(-&h[pivot_row][k]);
                }
                for k in 0..rows {
                    u[pivot_row][k] = Integer::from(-&u[pivot_row][k]);
                }
            }
            pivots.push((pivot_row, c));
            pivot_row += 1;
        }
    }
    // reduce entries above pivots into [0, pivot)
    for &(pr, c) in &pivots {
        for r in 0..pr {
            let q = <(Integer, Integer)>::from(h[r][c].div_rem_floor_ref(&h[pr][c])).0;
            if q == 0 {
                continue;
            }
            for k in 0..cols {
                let t = Integer::from(&q * &h[pr][k]);
                h[r][k] -= t;
            }
            for k in 0..rows {
                let t = Integer::from(&q * &u[pr][k]);
                u[r][k] -= t;
            }
        }
    }
    (h, u)
}

/// Basis (HNF rows) of the integer lattice spanned by `gens`.
pub fn lattice_basis(gens: &[Vec<Integer>]) -> IntMatrix {
    let (h, _) = row_hnf(gens);
    h.into_iter().filter(|r| r.iter().any(|x| *x != 0)).collect()
}

/// LLL reduction (delta = 0.99) of the columns of `b`, returning the reduced
/// basis and the integer transform `u` with `reduced = b * u`.
pub fn lll_columns(b: &DMatrix<f64>) -> (DMatrix<f64>, Vec<Vec<i64>>) {
    let n = b.ncols();
    let mut basis = b.clone();
    let mut u: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as i64).collect()).collect();
    if n <= 1 {
        return (basis, u);
    }
    let delta = 0.99;
    let gso = |basis: &DMatrix<f64>| -> (Vec<DVector<f64>>, Vec<Vec<f64>>, Vec<f64>) {
        let mut bstar: Vec<DVector<f64>> = Vec::with_capacity(n);
        let mut mu = vec![vec![0.0; n]; n];
        let mut norms = vec![0.0; n];
        for i in 0..n {
            let mut v = basis.column(i).into_owned();
            for j in 0..i {
                mu[i][j] = if norms[j] > 0.0 {
                    basis.column(i).dot(&bstar[j]) / norms[j]
                } else {
                    0.0
                };
                v -= &bstar[j] * mu[i][j];
            }
            norms[i] = v.dot(&v);
            bstar.push(v);
        }
        (bstar, mu, norms)
    };
    let mut k = 1;
    let mut iterations = 0usize;
    let (mut _bs, mut mu, mut norms) = gso(&basis);
    while k < n && iterations < 100_000 {
        iterations += 1;
        for j in (0..k).rev() {
            let q = mu[k][j].round();
            if q != 0.0 {
                let col_j = basis.column(j).into_owned();
                let mut col_k = basis.column_mut(k);
                col_k -= col_j * q;
                let qi = q as i64;
                for row in u.iter_mut() {
                    row[k] -= qi * row[j];
                }
                for l in 0..=j {
                    let m = if l == j { 1.0 } else { mu[j][l] };
                    mu[k][l] -= q * m;
                }
            }
        }
        if norms[k] >= (delta - mu[k][k - 1] * mu[k][k - 1]) * norms[k - 1] {
            k += 1;
        } else {
            basis.swap_columns(k, k - 1);
            for row in u.iter_mut() {
                row.swap(k, k - 1);
            }
            let r = gso(&basis);
            _bs = r.0;
            mu = r.1;
            norms = r.2;
            k = (k - 1).max(1);
        }
    }
    (basis, u)
}

/// Sup-norm closest vector: the integer `k` minimising `|x - B k|_inf` over
/// column combinations of `b`, found exhaustively inside a box that provably
/// contains every minimiser. Ties go to the lexicographically smallest `k`.
#[derive(Clone, Debug)]
pub struct SupCvp {
    pub coeffs: Vec<i64>,
    pub dist: f64,
    pub candidates: usize,
}

pub fn sup_norm_cvp(b: &DMatrix<f64>, x: &DVector<f64>, cap: usize) -> Option<SupCvp> {
    let n = b.ncols();
    let (red, u) = lll_columns(b);
    let pinv = red.clone().pseudo_inverse(1e-12).ok()?;
    let k0 = &pinv * x;
    let babai: Vec<i64> = k0.iter().map(|v| v.round() as i64).collect();
    let dist_of = |k: &[i64]| -> f64 {
        let mut v = x.clone();
        for (j, &kj) in k.iter().enumerate() {
            if kj != 0 {
                v -= red.column(j) * kj as f64;
            }
        }
        v.amax()
    };
    let d0 = dist_of(&babai) * (1.0 + 1e-9) + 1e-12;
    let mut lo = vec![0i64; n];
    let mut hi = vec![0i64; n];
    let mut total: f64 = 1.0;
    for i in 0..n {
        let w: f64 = pinv.row(i).iter().map(|v| v.abs()).sum::<f64>() * d0;
        lo[i] = (k0[i] - w).floor() as i64;
        hi[i] = (k0[i] + w).ceil() as i64;
        total *= (hi[i] - lo[i] + 1) as f64;
    }
    if total > cap as f64 {
        return None;
    }
    let mut best: Option<(f64, Vec<i64>)> = None;
    let mut cur = lo.clone();
    let mut count = 0usize;
    loop {
        count += 1;
        let d = dist_of(&cur);
        let orig = mat_vec_i64(&u, &cur);
        let better = match &best {
            None => true,
            Some((bd, bk)) => {
                // distances within rounding noise are treated as ties
                let tol = 1e-12 * bd.max(1e-300);
                d < bd - tol || ((d - bd).abs() <= tol && orig < *bk)
            }
        };
        if better {
            best = Some((d, orig));
        }
        let mut i = 0;
        loop {
            if i == n {
                let (dist, coeffs) = best.unwrap();
                return Some(SupCvp {
                    coeffs,
                    dist,
                    candidates: count,
                });
            }
            if cur[i] < hi[i] {
                cur[i] += 1;
                break;
            }
            cur[i] = lo[i];
            i += 1;
        }
    }
}

pub fn mat_vec_i64(u: &[Vec<i64>], v: &[i64]) -> Vec<i64> {
    u.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}
