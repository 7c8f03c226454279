use cassels::grid::{cassels_grid, enumerate_box, norm_product, w_witness, Grid, Lattice, Witness};
use cassels::matrix::RMatrix;
use cassels::scalar::RealScalar;
use proptest::prelude::*;
use rug::Rational;

const P: u32 = 128;

fn rs(q: &Rational) -> RealScalar {
    RealScalar::from_rational(q, P)
}

/// Exact grid: integer unimodular matrix times diag(2, 1/2, 1), rational shift.
struct ExactGrid {
    basis: Vec<Vec<Rational>>,
    shift: Vec<Rational>,
    /// Row sums of the absolute inverse basis.
    inv_rows: Vec<Rational>,
    inv: Vec<Vec<Rational>>,
}

impl ExactGrid {
    fn new(ops: &[(usize, usize, i64)], shift: [(i64, i64); 3]) -> Self {
        let mut m: Vec<Vec<i64>> = (0..3).map(|i| (0..3).map(|j| (i == j) as i64).collect()).collect();
        for &(i, j, k) in ops {
            if i != j {
                for r in 0..3 {
                    m[r][i] += k * m[r][j];
                }
            }
        }
        let scale = [Rational::from(2), Rational::from((1, 2)), Rational::from(1)];
        let basis = (0..3)
            .map(|r| (0..3).map(|c| Rational::from(m[r][c]) * &scale[c]).collect())
            .collect();
        // det m = 1, so the inverse is the adjugate
        let cof = |i: usize, j: usize| {
            let r: Vec<usize> = (0..3).filter(|&x| x != j).collect();
            let c: Vec<usize> = (0..3).filter(|&x| x != i).collect();
            let d = m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]];
            if (i + j) % 2 == 0 { d } else { -d }
        };
        let inv_rows = (0..3)
            .map(|i| {
                let s: i64 = (0..3).map(|j| cof(i, j).abs()).sum();
                Rational::from(s) / &scale[i]
            })
            .collect();
        let inv = (0..3)
            .map(|i| (0..3).map(|j| Rational::from(cof(i, j)) / &scale[i]).collect())
            .collect();
        ExactGrid {
            basis,
            shift: shift.iter().map(|&(n, d)| Rational::from((n, d))).collect(),
            inv_rows,
            inv,
        }
    }

    fn grid(&self) -> Grid {
        let b = RMatrix::from_rows(self.basis.iter().map(|r| r.iter().map(rs).collect()).collect());
        Grid::new(Lattice::new(b).unwrap(), self.shift.iter().map(rs).collect()).unwrap()
    }

    /// Lattice coordinates of the shift chosen by `g` relative to ours.
    fn shift_offset(&self, g: &Grid) -> Vec<i64> {
        let diff: Vec<Rational> = (0..3)
            .map(|j| Rational::from_f64(g.shift()[j].to_f64()).unwrap() - &self.shift[j])
            .collect();
        self.inv
            .iter()
            .map(|row| {
                let x = row.iter().zip(&diff).fold(Rational::new(), |acc, (a, b)| acc + Rational::from(a * b));
                x.round().numer().to_i64().unwrap()
            })
            .collect()
    }

    fn point(&self, c: &[i64]) -> Vec<Rational> {
        (0..3)
            .map(|r| (0..3).fold(self.shift[r].clone(), |acc, k| acc + Rational::from(&self.basis[r][k] * c[k])))
            .collect()
    }
}

fn sup(v: &[Rational]) -> Rational {
    v.iter().map(|x| x.clone().abs()).max().unwrap()
}

fn prod(v: &[Rational]) -> Rational {
    v.iter().fold(Rational::from(1), |acc, x| acc * x)
}

/// All exact points with sup norm below `bound`, by brute force over a
/// coordinate box large enough to contain them.
fn brute(g: &ExactGrid, bound: &Rational) -> Vec<Vec<Rational>> {
    let reach = Rational::from(bound + sup(&g.shift));
    let r: Vec<i64> = g
        .inv_rows
        .iter()
        .map(|x| Rational::from(x * &reach).ceil().numer().to_i64().unwrap() + 1)
        .collect();
    let mut out = Vec::new();
    for a in -r[0]..=r[0] {
        for b in -r[1]..=r[1] {
            for c in -r[2]..=r[2] {
                let v = g.point(&[a, b, c]);
                if sup(&v) < *bound {
                    out.push(v);
                }
            }
        }
    }
    out
}

#[test]
fn cassels_box_count_matches_triple_loop() {
    let (u, v, a, b) = (Rational::from((1, 2)), Rational::from((1, 3)), Rational::from((1, 4)), Rational::from((1, 5)));
    let g = cassels_grid(&rs(&u), &rs(&v), &rs(&a), &rs(&b));
    let bound = Rational::from((21, 10));
    let mut count = 0;
    for x in -10i64..=10 {
        for y in -10i64..=10 {
            for z in -10i64..=10 {
                let p = [
                    Rational::from(x),
                    Rational::from(&u * x) - y - &a,
                    Rational::from(&v * x) - z - &b,
                ];
                if sup(&p) < bound {
                    count += 1;
                }
            }
        }
    }
    let found = enumerate_box(&g, &rs(&bound), 1_000_000).unwrap();
    assert_eq!(found.len(), count);
}

fn arb_ops() -> impl Strategy<Value = Vec<(usize, usize, i64)>> {
    prop::collection::vec((0usize..3, 0usize..3, -2i64..=2), 0..5)
}

fn arb_shift() -> impl Strategy<Value = [(i64, i64); 3]> {
    [(-7i64..7, 1i64..8), (-7i64..7, 1i64..8), (-7i64..7, 1i64..8)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn enumeration_matches_brute_force(ops in arb_ops(), shift in arb_shift(), bound in 1i64..4) {
        let eg = ExactGrid::new(&ops, shift);
        let g = eg.grid();
        let b = Rational::from(bound);
        let found = enumerate_box(&g, &rs(&b), 1_000_000).unwrap();
        let expected = brute(&eg, &b);
        prop_assert_eq!(found.len(), expected.len());
        let offset = eg.shift_offset(&g);
        for (x, q) in g.shift().iter().zip(eg.point(&offset)) {
            prop_assert!(x.contains_rational(&q));
        }
        for c in &found {
            // coordinates reproduce the reported vector, also after basis reduction
            let k: Vec<i64> = c.coords.iter().zip(&offset).map(|(a, b)| a + b).collect();
            let exact = eg.point(&k);
            let again = g.point(&c.coords);
            for ((x, y), q) in c.vector.iter().zip(&again).zip(&exact) {
                prop_assert!(x.contains_rational(q) && y.contains_rational(q));
            }
            prop_assert!(expected.iter().any(|e| c.vector.iter().zip(e).all(|(x, q)| x.contains_rational(q))));
        }
    }

    #[test]
    fn window_search_matches_brute_force(ops in arb_ops(), shift in arb_shift()) {
        let eg = ExactGrid::new(&ops, shift);
        let g = eg.grid();
        let theta = Rational::from(3);
        let (e1, e2) = (Rational::from((1, 100)), Rational::from((1, 2)));
        let ws = w_witness(&g, &rs(&theta), &rs(&e1), &rs(&e2), 1_000_000).unwrap();
        let best = brute(&eg, &theta)
            .into_iter()
            .map(|v| prod(&v).abs())
            .filter(|n| *n > e1 && *n < e2)
            .min();
        match (&ws.witness, best) {
            (Some(w), Some(n)) => {
                prop_assert!(w.abs_product.contains_rational(&n));
                prop_assert!(w.verify(&g));
            }
            (None, None) => {}
            (w, n) => prop_assert!(false, "witness {:?} vs brute force {:?}", w.is_some(), n),
        }
    }

    #[test]
    fn witnesses_survive_serialization(ops in arb_ops(), shift in arb_shift()) {
        let g = ExactGrid::new(&ops, shift).grid();
        for c in enumerate_box(&g, &RealScalar::from_int(2, P), 100_000).unwrap() {
            if norm_product(&c.vector).abs().is_positive() != Some(true) {
                continue;
            }
            let w = Witness::from_coords(&g, &c.coords, None);
            let back: Witness = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
            prop_assert!(back.verify(&g));
        }
    }
}
