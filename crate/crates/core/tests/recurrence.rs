use cassels::grid::Lattice;
use cassels::matrix::RMatrix;
use cassels::recurrence::{
    first_hitting, hit_element, horospherical_hitting, orbit_average_probe, planted_start, random_lattice, FlowSpec,
    HitConfig, HittingRecord, Observable, Target,
};
use cassels::root_action::{decompose_near_identity, AffineElement, RootIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const EPS: f64 = 0.2;

/// `a_t x = h x0` holds iff `B0^-1 h^-1 a_t B_x` is an integer matrix of determinant one.
fn check_hit(x: &Lattice, target: &Target, flow: &FlowSpec, rec: &HittingRecord) {
    let h = hit_element(x, target, flow, rec).expect("verified hit");
    let t = rec.t_hit.unwrap();
    let prec = h.prec();
    let m = target
        .lattice
        .basis()
        .with_prec(prec)
        .inverse()
        .unwrap()
        .mul(&h.inverse().unwrap())
        .mul(&flow.matrix(t, prec))
        .mul(&x.basis().with_prec(prec))
        .to_f64();
    for v in m.iter() {
        assert!((v - v.round()).abs() < 1e-9, "non-integral change of basis {m}");
    }
    assert!((m.map(f64::round).determinant().abs() - 1.0).abs() < 1e-9);
    let size = decompose_near_identity(&AffineElement::linear_only(h).unwrap(), 0.5)
        .unwrap()
        .box_size()
        .to_f64();
    assert!((size - rec.size.unwrap()).abs() < 1e-9);
    assert!(size >= EPS / 2.0 && size < EPS, "{size}");
}

#[test]
fn planted_crossings_are_never_missed() {
    let target = Target::cubic(384).unwrap();
    let roots = RootIndex::g0_roots(3);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cases: Vec<(Vec<f64>, f64, RootIndex, f64)> = (0..100)
        .map(|_| {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            let dir = vec![a, b, -a - b];
            let tau = rng.random_range(0.5..3.0);
            let alpha = roots[rng.random_range(0..roots.len())];
            let s = rng.random_range(0.55..0.95) * EPS * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (dir, tau, alpha, s)
        })
        .collect();
    cases.par_iter().for_each(|(dir, tau, alpha, s)| {
        let flow = FlowSpec::new(dir.clone(), tau + 0.5).unwrap();
        let x = planted_start(&target, &flow, *tau, *alpha, *s).unwrap();
        let rec = first_hitting(&x, &target, &flow, &HitConfig::annulus(EPS)).unwrap();
        let t = rec.t_hit.unwrap_or_else(|| panic!("missed crossing {dir:?} tau={tau} {alpha:?} s={s}"));
        assert!(t <= tau + 1e-9 && rec.verified);
        check_hit(&x, &target, &flow, &rec);
    });
}

#[test]
fn horospherical_grid_is_total_and_matches_direct_runs() {
    let target = Target::cubic(256).unwrap();
    let x = Lattice::standard(3, 256);
    let cfg = HitConfig::annulus(EPS);
    let t_max = 4.0;
    let grid: Vec<Vec<f64>> = (-1..=1)
        .flat_map(|i| (-1..=1).map(move |j| vec![0.1 * i as f64, 0.1 * j as f64]))
        .collect();
    let recs = horospherical_hitting(&x, &grid, &target, t_max, &cfg).unwrap();
    assert_eq!(recs.len(), 9);
    let flow = FlowSpec::horospherical(3, t_max);
    let xp = Lattice::new(x.basis().with_prec(flow.required_prec().max(256))).unwrap();
    let direct = first_hitting(&xp, &target, &flow, &cfg).unwrap();
    let zero = &recs[4];
    assert_eq!(zero.t_hit, direct.t_hit);
    assert_eq!(zero.start_hash, direct.start_hash);
    for (u, r) in grid.iter().zip(&recs) {
        if r.verified {
            let ux = xp
                .transform(&cassels::recurrence::horospherical_element(u, xp.prec()))
                .unwrap();
            check_hit(&ux, &target, &flow, r);
        }
    }
}

#[test]
fn random_lattices_are_unimodular_and_seeded() {
    for i in 0..10 {
        let a = random_lattice(3, 42, i, 128).unwrap();
        let b = random_lattice(3, 42, i, 128).unwrap();
        assert_eq!(a.basis().to_f64(), b.basis().to_f64());
        assert!((a.basis().det().to_f64() - 1.0).abs() < 1e-30);
        let c = random_lattice(3, 43, i, 128).unwrap();
        assert_ne!(a.basis().to_f64(), c.basis().to_f64());
    }
    assert_ne!(
        random_lattice(3, 42, 0, 128).unwrap().basis().to_f64(),
        random_lattice(3, 42, 1, 128).unwrap().basis().to_f64()
    );
}

#[test]
fn time_zero_average_is_the_observable() {
    let target = Target::cubic(128).unwrap();
    let flow = FlowSpec::horospherical(3, 0.0);
    let f = Observable::SmoothBox { radius: 0.3, width: 0.2 };
    let rows = orbit_average_probe(f, &target, &flow, &[0.0], 40, 5, 0.05).unwrap();
    let c = orbit_average_probe(Observable::Constant(2.0), &target, &flow, &[0.0, 2.0], 10, 5, 0.05).unwrap();
    assert!(c.iter().all(|r| r.variance.abs() < 1e-24));
    let r = &rows[0];
    assert!(r.mean >= 0.0 && r.mean <= 1.0);
    assert!(r.variance <= r.mean * (1.0 - r.mean) * 40.0 / 39.0 + 1e-12);
}

#[test]
fn identity_flow_matrix() {
    let flow = FlowSpec::new(vec![1.0, -0.5, -0.5], 1.0).unwrap();
    let m: RMatrix = flow.matrix(0.0, 128);
    assert_eq!(m.to_f64(), nalgebra::DMatrix::identity(3, 3));
    assert!((flow.matrix(1.3, 128).det().to_f64() - 1.0).abs() < 1e-30);
}
