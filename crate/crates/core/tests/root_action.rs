use cassels::grid::{norm_product, w_witness, Grid, Lattice, Witness};
use cassels::matrix::{vec_sup_norm, RMatrix};
use cassels::root_action::{
    apply_root, chart_size_f64, decompose_near_identity, perturbation_constants, root_displacement, AffineElement,
    ChartCoords, DiagElement, RootIndex, Sign, CHART_RADIUS,
};
use cassels::scalar::RealScalar;
use proptest::prelude::*;

const P: u32 = 256;

fn r(x: f64) -> RealScalar {
    RealScalar::from_f64(x, P)
}

fn overlaps(a: &RealScalar, b: &RealScalar) -> bool {
    !(a.definitely_lt(b) || a.definitely_gt(b))
}

fn arb_chart(size: f64) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-size..size, 2),
        prop::collection::vec(-size..size, RootIndex::all(3).len()),
    )
}

fn chart_from(logs: &[f64], ts: &[f64]) -> ChartCoords {
    let l = vec![logs[0], logs[1], -logs[0] - logs[1]];
    ChartCoords {
        a: DiagElement::from_log_f64(&l, P),
        t: RootIndex::all(3).into_iter().zip(ts).map(|(a, &t)| (a, r(t))).collect(),
    }
}

/// A grid with a mildly skewed basis and a generic shift.
fn skew_grid(s: f64, shift: [f64; 3]) -> Grid {
    let b = RMatrix::from_rows(vec![
        vec![r(1.0), r(s), r(0.0)],
        vec![r(0.0), r(1.0), r(-s)],
        vec![r(s), r(0.0), r(1.0)],
    ]);
    let det = b.det();
    let scale = det.ln().div_int(-3).exp();
    let b = RMatrix::from_fn(3, 3, |i, j| b.get(i, j) * &scale);
    Grid::new(Lattice::new(b).unwrap(), shift.iter().map(|&x| r(x)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn chart_coordinates_are_recovered((logs, ts) in arb_chart(0.02)) {
        let c = chart_from(&logs, &ts);
        let g = c.compose();
        let back = decompose_near_identity(&g, CHART_RADIUS).unwrap();
        for (x, y) in back.a.entries().iter().zip(c.a.entries()) {
            prop_assert!((x - y).abs().to_f64() < 1e-30);
        }
        for (alpha, t) in &c.t {
            prop_assert!((back.get(*alpha).unwrap() - t).abs().to_f64() < 1e-30);
        }
        // double-precision chart size agrees with the high-precision box size
        let s = chart_size_f64(&g.linear.to_f64(), CHART_RADIUS).unwrap();
        prop_assert!((s - back.shear_size().max(&back.a.dist_to_identity()).to_f64()).abs() < 1e-9);
    }

    #[test]
    fn conjugation_scales_root_parameters(la in -2.0f64..2.0, lb in -2.0f64..2.0, t in -1.0f64..1.0) {
        let a = DiagElement::from_log_f64(&[la, lb, -la - lb], P);
        let ai = AffineElement::diag(&a);
        let inv = AffineElement::diag(&a.inverse());
        for alpha in RootIndex::all(3) {
            let lhs = ai.compose(&AffineElement::root(alpha, &r(t), 3)).compose(&inv);
            let rhs = AffineElement::root(alpha, &(&a.root_value(alpha) * &r(t)), 3);
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!(overlaps(lhs.linear.get(i, j), rhs.linear.get(i, j)));
                }
                prop_assert!(overlaps(&lhs.translation[i], &rhs.translation[i]));
            }
        }
    }

    #[test]
    fn displacements_reverify(s in -0.3f64..0.3, x in 0.05f64..0.95, y in 0.05f64..0.95, z in 0.05f64..0.95,
                              root in 0usize..9, plus in any::<bool>()) {
        let g = skew_grid(s, [x, y, z]);
        let alpha = RootIndex::all(3)[root];
        let sign = if plus { Sign::Plus } else { Sign::Minus };
        let (e1, e2) = (r(0.1), r(0.2));
        let d = match root_displacement(&g, alpha, &e1, &e2, sign, 1_000_000) {
            Ok(d) => d,
            // no vector with the sign pattern in range is a legitimate outcome
            Err(_) => return Ok(()),
        };
        prop_assert_eq!(d.t.is_positive(), Some(plus));
        let moved = apply_root(alpha, &d.t, &g).unwrap();
        prop_assert!(d.witness.verify(&moved));
        let ws = w_witness(&moved, &d.theta, &e1, &e2, 1_000_000).unwrap();
        prop_assert!(ws.witness.is_some());
    }

    #[test]
    fn small_perturbations_respect_window_margins(ts in prop::collection::vec(-1.0f64..1.0, 9), eps_exp in 18.0f64..30.0) {
        // a witness of Z^3 + (1/2, 1/2, 1/2): (1/2, -1/2, 1/2) with |N| = 1/8
        let g = Grid::new(Lattice::standard(3, P), vec![r(0.5); 3]).unwrap();
        let w = Witness::from_coords(&g, &[0, -1, 0], None);
        let (theta, e1, e2) = (1.0, 0.1, 0.2);
        let eps = 2f64.powf(-eps_exp);
        let chart = ChartCoords {
            a: DiagElement::identity(3, P),
            t: RootIndex::all(3).into_iter().zip(&ts).map(|(a, &t)| (a, r(t * eps))).collect(),
        };
        let pert = chart.compose();
        let actual = pert.dist_to_identity().to_f64();
        let pc = perturbation_constants(3, theta, actual, e1, e2);
        prop_assume!(pc.c1 > 0.0);
        let v = pert.apply_vec(&w.vector);
        let n = norm_product(&v).abs().to_f64();
        prop_assert!(vec_sup_norm(&v).to_f64() < theta + pc.delta);
        prop_assert!(n > pc.c1 * e1 && n < pc.c2 * e2, "{n} vs ({}, {})", pc.c1 * e1, pc.c2 * e2);
    }
}
