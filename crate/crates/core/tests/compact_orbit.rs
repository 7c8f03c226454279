use std::collections::{HashSet, VecDeque};
use std::sync::OnceLock;

use cassels::compact_orbit::{
    approximate_in_subgroup, build_compact_point, diophantine_test, fiber_density_probe, q_rational_points,
    stab_subgroup, CompactOrbit, DiophantineCase, SubgroupB1, TotallyRealField, DEFAULT_UNIT_BOUND,
};
use cassels::linalg::int_mat_to_i64;
use cassels::root_action::DiagElement;
use cassels::scalar::RealScalar;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Rational;

fn orbit() -> &'static CompactOrbit {
    static O: OnceLock<CompactOrbit> = OnceLock::new();
    O.get_or_init(|| build_compact_point(&TotallyRealField::conductor7(), 256, DEFAULT_UNIT_BOUND).unwrap())
}

fn actions(o: &CompactOrbit) -> Vec<Vec<Vec<i64>>> {
    let r = o.stabilizer.rank();
    (0..r)
        .map(|j| {
            let e: Vec<i64> = (0..r).map(|k| (k == j) as i64).collect();
            int_mat_to_i64(&o.stabilizer.action_of(&o.field, &e)).unwrap()
        })
        .collect()
}

fn act(m: &[Vec<i64>], k: &[i64], q: i64) -> Vec<i64> {
    m.iter()
        .map(|row| row.iter().zip(k).map(|(a, b)| a * b).sum::<i64>().rem_euclid(q))
        .collect()
}

#[test]
fn units_have_norm_one_and_full_log_rank() {
    let o = orbit();
    for u in o.stabilizer.fundamental.iter().chain(&o.stabilizer.generators) {
        assert_eq!(o.field.norm(u).abs(), 1);
    }
    let logs = DMatrix::from_fn(3, 2, |i, j| o.stabilizer.log_basis[j][i]);
    assert_eq!(logs.rank(1e-9), 2);
}

#[test]
fn rational_points_are_permuted_by_generators() {
    let o = orbit();
    for q in [2u64, 3] {
        let pts = q_rational_points(3, q);
        assert_eq!(pts.len(), (q as usize).pow(3));
        let nums: HashSet<Vec<i64>> = pts
            .iter()
            .map(|p| p.iter().map(|x| Rational::from(x * q).numer().to_i64().unwrap()).collect())
            .collect();
        for m in actions(o) {
            let image: HashSet<Vec<i64>> = nums.iter().map(|k| act(&m, k, q as i64)).collect();
            assert_eq!(image, nums);
        }
    }
}

#[test]
fn subgroup_index_matches_orbit_enumeration() {
    let o = orbit();
    let gens = actions(o);
    for q in [2u64, 3] {
        for p in q_rational_points(3, q) {
            let k0: Vec<i64> = p.iter().map(|x| Rational::from(x * q).numer().to_i64().unwrap()).collect();
            // breadth-first orbit of k0
            let mut seen = HashSet::from([k0.clone()]);
            let mut queue = VecDeque::from([k0.clone()]);
            while let Some(k) = queue.pop_front() {
                for m in &gens {
                    let k2 = act(m, &k, q as i64);
                    if seen.insert(k2.clone()) {
                        queue.push_back(k2);
                    }
                }
            }
            let b1 = stab_subgroup(o, &p, q).unwrap();
            assert_eq!(b1.index as usize, seen.len());
            assert!(b1.index <= q.pow(3));
            for row in &b1.exponent_lattice {
                let m = int_mat_to_i64(&o.stabilizer.action_of(&o.field, row)).unwrap();
                assert_eq!(act(&m, &k0, q as i64), k0);
            }
        }
    }
}

#[test]
fn subgroup_approximation_matches_brute_force() {
    let o = orbit();
    let full = SubgroupB1::full(o.stabilizer.rank());
    let logs: Vec<Vec<f64>> = (0..2)
        .map(|j| {
            let e: Vec<i64> = (0..2).map(|k| (k == j) as i64).collect();
            o.stabilizer.diag_of(&o.field, &e, 128).log_f64()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let h: Vec<f64> = (0..2).map(|_| rng.random_range(-25.0..25.0)).collect();
        let target = vec![h[0], h[1], -h[0] - h[1]];
        let a = DiagElement::from_log_f64(&target, 128);
        let got = approximate_in_subgroup(o, &a, &full, 10_000_000).unwrap();
        let mut best = f64::INFINITY;
        for l1 in -80i64..=80 {
            for l2 in -80i64..=80 {
                let d = (0..3)
                    .map(|i| (target[i] - l1 as f64 * logs[0][i] - l2 as f64 * logs[1][i]).abs())
                    .fold(0.0, f64::max);
                best = best.min(d);
            }
        }
        assert!((got.log_dist - best).abs() < 1e-9, "{} vs {}", got.log_dist, best);
        assert!(got.log_dist <= got.rho_bound);
    }
}

#[test]
fn diophantine_verdicts_match_brute_force() {
    let o = orbit();
    let b = o.lattice.basis().to_f64();
    let b_inv = b.clone().try_inverse().unwrap();
    let (k, c, q_max, l) = (3.0, 0.1, 1000u64, 10u64);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let wf: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<RealScalar> = wf.iter().map(|&x| RealScalar::from_f64(x, 256)).collect();
        let mut first = None;
        for q in 2..=q_max {
            let qw = DVector::from_iterator(3, wf.iter().map(|x| x * q as f64));
            let c0 = &b_inv * &qw;
            let mut dist = f64::INFINITY;
            for off in 0..125 {
                let z = DVector::from_iterator(
                    3,
                    (0..3).map(|i| c0[i].round() + ((off / 5usize.pow(i as u32)) % 5) as f64 - 2.0),
                );
                dist = dist.min((&qw - &b * z).amax());
            }
            if dist < c * (q as f64).powf(1.0 - k) {
                first = Some(q);
                break;
            }
        }
        let v = diophantine_test(&o.lattice, &w, k, c, q_max, l).unwrap();
        let expected = match first {
            None => DiophantineCase::Diophantine,
            Some(q) if q <= l => DiophantineCase::NearSmallTorsion,
            Some(_) => DiophantineCase::NearLargeTorsion,
        };
        assert_eq!(v.case, expected);
        assert_eq!(v.violation.map(|x| x.0), first);
    }
}

#[test]
fn density_estimates_do_not_increase_with_the_norm_bound() {
    let o = orbit();
    let y = [0.1234, 0.5678, 0.9101];
    let mut last = f64::INFINITY;
    for q in [1e2, 1e3, 1e4] {
        let p = fiber_density_probe(o, &y, q, 10, 10_000_000).unwrap();
        assert!(p.covering_estimate <= last + 1e-12, "{} after {}", p.covering_estimate, last);
        last = p.covering_estimate;
    }
}
