use rug::Rational;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::certify::{balancing, verify_level, LevelCertificate};
use super::extreme::extreme_point_functional;
use super::phi::phi_split;
use super::rate::RateFunction;
use super::SearchError;
use crate::baker::{character_approx, DEFAULT_ETA_CAP};
use crate::compact_orbit::{
    approximate_in_subgroup, covering_radius_bound, diophantine_test, exponents_below, stab_subgroup, CompactOrbit,
    DiophantineCase, SubgroupB1,
};
use crate::grid::{enumerate_box, norm_product, w_witness, Grid, GridError, Witness};
use crate::matrix::{vec_sub, vec_sup_norm, RMatrix, RVector};
use crate::recurrence::{first_hitting, hit_element, FlowSpec, HitConfig, Target, NEIGHBORHOOD_RADIUS};
use crate::root_action::{
    decompose_near_identity, perturbation_constants, root_displacement, AffineElement, ChartCoords, DiagElement,
    RootIndex, Sign,
};
use crate::scalar::RealScalar;

/// Tunables of the guided search. None of them is effective in the sense of
/// an asymptotic rate; they are chosen for small instances and recorded in
/// the trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GuidedParams {
    /// Diophantine exponent: violations are `|q w - z| < c q^(1-k)`.
    pub k: f64,
    /// Largest `q` counted as small torsion.
    pub l: u64,
    pub c: f64,
    pub q_max: u64,
    /// Recurrence target size `t_max^-beta`.
    pub beta: f64,
    pub t_max: f64,
    /// Baker approximation parameter.
    pub m: f64,
    /// Steps of the perturbation mesh for near large torsion.
    pub mesh: usize,
    /// Radius of the final box.
    pub theta: f64,
    /// Upper end of the product window before the rate bound is applied.
    pub eps_window: f64,
    /// Ratio of consecutive gap thresholds, as an exponent.
    pub zeta: f64,
    /// Size the leading root coordinate is expanded to.
    pub omega: f64,
    pub rate: RateFunction,
    pub eta_cap: f64,
    pub cap: usize,
    /// Max-entry norm bound of stabilizer elements tried for Diophantine shifts.
    pub b_norm_cap: f64,
    pub case1_limit: usize,
    /// Box radius for the balancing fallback.
    pub refine_bound: f64,
}

impl Default for GuidedParams {
    fn default() -> Self {
        GuidedParams {
            k: 8.0,
            l: 4,
            c: 1.0,
            q_max: 16,
            beta: 0.5,
            t_max: 20.0,
            m: 50.0,
            mesh: 8,
            theta: 3.0,
            eps_window: 0.5,
            zeta: 0.5,
            omega: 0.5,
            rate: RateFunction::log(),
            eta_cap: DEFAULT_ETA_CAP,
            cap: 200_000,
            b_norm_cap: 30.0,
            case1_limit: 256,
            refine_bound: 8.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag {
    Diophantine,
    TorsionSmall { q: u64, z: Vec<i64> },
    TorsionLarge { q: u64, z: Vec<i64> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceStep {
    pub stage: String,
    pub data: Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GuidedWitness {
    /// Witness on `y`; `producer` holds the diagonal element `a`.
    pub witness: Witness,
    pub case: CaseTag,
    /// Which construction produced `a`.
    pub route: String,
    /// The level at which the certificate inequalities hold.
    pub level: LevelCertificate,
    pub trace: Vec<TraceStep>,
}

struct Ctx<'a> {
    y: &'a Grid,
    orbit: &'a CompactOrbit,
    params: &'a GuidedParams,
    trace: Vec<TraceStep>,
}

impl Ctx<'_> {
    fn log(&mut self, stage: &str, data: Value) {
        self.trace.push(TraceStep {
            stage: stage.to_string(),
            data,
        });
    }

    fn prec(&self) -> u32 {
        self.y.prec()
    }

    fn d(&self) -> usize {
        self.y.dim()
    }

    fn no_find(self, stage: &str) -> SearchError {
        SearchError::NoFind {
            stage: stage.to_string(),
            trace: Box::new(self.trace),
        }
    }
}

fn f64s(v: &[RealScalar]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64()).collect()
}

/// Coordinates below this size are chart-inversion noise.
fn noise_floor(prec: u32) -> f64 {
    2f64.powi(-(prec as i32) / 3)
}

/// The final level for `(a, v)`: smallest `T` above `|a|`, `|a v|` and the box radius.
fn level_for(a: &DiagElement, av: &[RealScalar], theta: f64) -> f64 {
    let n = a.norm().hi().to_f64().max(vec_sup_norm(av).hi().to_f64()).max(theta);
    n * (1.0 + 1e-9)
}

/// Certificate for the point of `y` with coordinates `coords` under `a`, if
/// the rate inequality holds at the smallest admissible level. Passing the
/// inequalities here and failing the independent recheck is a bug.
fn certify_candidate(ctx: &Ctx, a: &DiagElement, coords: &[i64], source: &str) -> Result<Option<LevelCertificate>, SearchError> {
    let y = ctx.y;
    let p = ctx.prec();
    let d = ctx.d();
    let w = Witness::from_coords(y, coords, Some(a.entries().to_vec()));
    let av = a.apply_vec(&w.vector);
    let t = level_for(a, &av, ctx.params.theta);
    let tr = RealScalar::from_f64(t, p);
    let td = tr.powi(d as i64);
    let bound = RealScalar::one(p) / &ctx.params.rate.eval(&td);
    if w.abs_product.is_positive() != Some(true) || !w.abs_product.definitely_lt(&bound) {
        return Ok(None);
    }
    let cert = LevelCertificate {
        t,
        a: a.entries().to_vec(),
        image_sup: vec_sup_norm(&av),
        rated: &w.abs_product * &ctx.params.rate.eval(&w.sup_norm),
        witness: w,
        source: source.to_string(),
    };
    if !verify_level(y, &cert, &ctx.params.rate) {
        return Err(SearchError::Verification(format!("{source} candidate failed the level recheck")));
    }
    Ok(Some(cert))
}

/// Final step for a candidate `a`: exact window search on `a y` at the
/// candidate's level, falling back to the transferred point.
fn finish(ctx: &mut Ctx, a: &DiagElement, hint: Option<Vec<i64>>, route: &str) -> Result<Option<LevelCertificate>, SearchError> {
    let p = ctx.prec();
    let d = ctx.d();
    let ay = a.apply_grid(ctx.y)?;
    let t = a.norm().hi().to_f64().max(ctx.params.theta) * (1.0 + 1e-9);
    let tr = RealScalar::from_f64(t, p);
    let eps2 = RealScalar::one(p) / &ctx.params.rate.eval(&tr.powi(d as i64));
    let eps2 = eps2.min(&RealScalar::from_f64(ctx.params.eps_window, p));
    let found = match w_witness(&ay, &tr, &RealScalar::zero(p), &eps2, ctx.params.cap) {
        Ok(ws) => ws.witness.map(|w| w.integer_coords),
        Err(GridError::CapExceeded { estimated, .. }) => {
            ctx.log("final", json!({"route": route, "capped": estimated}));
            None
        }
        Err(e) => return Err(e.into()),
    };
    for coords in found.into_iter().chain(hint) {
        if let Some(cert) = certify_candidate(ctx, a, &coords, route)? {
            ctx.log(
                "final",
                json!({"route": route, "level": cert.t, "abs_product": cert.witness.abs_product.to_f64(),
                       "image_sup": cert.image_sup.to_f64(), "a_log": a.log_f64()}),
            );
            return Ok(Some(cert));
        }
    }
    ctx.log("final", json!({"route": route, "level": t, "found": false, "a_log": a.log_f64()}));
    Ok(None)
}

/// Move a surrogate witness through the perturbation `pert` (with
/// `a y = pert * surrogate`), log the window transfer, and return the
/// coordinates of the image point in `y`.
#[allow(clippy::too_many_arguments)]
fn transfer(
    ctx: &mut Ctx,
    a: &DiagElement,
    pert: &AffineElement,
    sw: &Witness,
    theta: f64,
    eps1: f64,
    eps2: f64,
    route: &str,
) -> Result<Option<Vec<i64>>, SearchError> {
    let d = ctx.d();
    let eps = pert.dist_to_identity().hi().to_f64();
    let pc = perturbation_constants(d, theta, eps, eps1, eps2);
    let img = pert.apply_vec(&sw.vector);
    let ay = a.apply_grid(ctx.y)?;
    let coords = ay.coords_of(&img).ok();
    let n = norm_product(&img).abs().to_f64();
    let sup = vec_sup_norm(&img).to_f64();
    let margin_ok = sup < theta + pc.delta && n > pc.c1 * eps1 && n < pc.c2 * eps2;
    ctx.log(
        "perturbation",
        json!({"route": route, "eps": eps, "theta": theta, "eps1": eps1, "eps2": eps2,
               "delta": pc.delta, "c1": pc.c1, "c2": pc.c2,
               "surrogate_product": sw.abs_product.to_f64(), "achieved_product": n,
               "achieved_sup": sup, "margin_ok": margin_ok}),
    );
    Ok(coords)
}

fn trace_zero_coords(x: &[f64]) -> Vec<f64> {
    x[..x.len() - 1].to_vec()
}

fn from_trace_zero(c: &[f64]) -> Vec<f64> {
    let mut x = c.to_vec();
    x.push(-c.iter().sum::<f64>());
    x
}

fn functional_coords(alpha: RootIndex, d: usize) -> Vec<f64> {
    let f = alpha.log_functional(d);
    (0..d - 1).map(|k| f[k] - f[d - 1]).collect()
}

/// Orbit route for Diophantine shifts: stabilizer elements `b` with small norm
/// move the fiber shift; a window point of `x0 + b w` is carried to `(b a0) y`.
fn case_diophantine(ctx: &mut Ctx, a0: &DiagElement, h: &RMatrix, w: &RVector) -> Result<Option<LevelCertificate>, SearchError> {
    let p = ctx.prec();
    let d = ctx.d();
    let orbit = ctx.orbit;
    let mut exps = exponents_below(orbit, ctx.params.b_norm_cap, ctx.params.cap)?;
    let norm = |e: &Vec<i64>| orbit.stabilizer.log_of(e).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    exps.sort_by(|a, b| norm(a).total_cmp(&norm(b)).then_with(|| a.cmp(b)));
    exps.truncate(ctx.params.case1_limit);
    let theta = ctx.params.theta;
    let e_target = ctx.params.eps_window;
    let (mut tried, mut skipped) = (0usize, 0usize);
    for e in &exps {
        let b = orbit.stabilizer.diag_of(&orbit.field, e, p);
        let conj = b.matrix().mul(h).mul(&b.inverse().matrix());
        let pert = AffineElement::linear_only(conj)?;
        let eps = pert.dist_to_identity().hi().to_f64();
        let c_sqrt = perturbation_constants(d, theta, eps, 1.0, 1.0).c_theta * eps.sqrt();
        let (eps1, eps2) = (2.0 * c_sqrt, e_target - c_sqrt);
        if !(eps1 < eps2) {
            skipped += 1;
            continue;
        }
        tried += 1;
        let sur = Grid::new(orbit.lattice.clone(), b.apply_vec(w))?;
        let ws = match w_witness(
            &sur,
            &RealScalar::from_f64(theta, p),
            &RealScalar::from_f64(eps1, p),
            &RealScalar::from_f64(eps2, p),
            ctx.params.cap,
        ) {
            Ok(ws) => ws,
            Err(GridError::CapExceeded { .. }) => continue,
            Err(err) => return Err(err.into()),
        };
        let Some(sw) = ws.witness else { continue };
        let a = b.mul(a0);
        let hint = transfer(ctx, &a, &pert, &sw, theta, eps1, eps2, "orbit")?;
        if let Some(cert) = finish(ctx, &a, hint, "orbit")? {
            ctx.log("orbit", json!({"b_exponents": e, "tried": tried, "skipped": skipped}));
            return Ok(Some(cert));
        }
    }
    ctx.log("orbit", json!({"found": false, "tried": tried, "skipped": skipped, "available": exps.len()}));
    Ok(None)
}

/// Regular element of the subgroup with `alpha0` expanded, smallest log norm
/// among small combinations of the subgroup basis.
fn regular_generator(orbit: &CompactOrbit, b1: &SubgroupB1, alpha0: RootIndex, prec: u32) -> Option<(Vec<i64>, DiagElement)> {
    let r = b1.rank();
    let mut best: Option<(f64, Vec<i64>, DiagElement)> = None;
    let mut c = vec![-2i64; r];
    loop {
        if c.iter().any(|&x| x != 0) {
            let e = b1.to_b_exponents(&c);
            let a = orbit.stabilizer.diag_of(&orbit.field, &e, prec);
            if let Ok(split) = phi_split(&a) {
                let (e, a) = if split.plus.contains(&alpha0) { (e, a) } else { (e.iter().map(|x| -x).collect(), a.inverse()) };
                let n = a.log_f64().iter().cloned().fold(0.0f64, |m, x| m.max(x.abs()));
                if best.as_ref().is_none_or(|b| n < b.0) {
                    best = Some((n, e, a));
                }
            }
        }
        let mut i = 0;
        loop {
            if i == r {
                return best.map(|b| (b.1, b.2));
            }
            if c[i] < 2 {
                c[i] += 1;
                break;
            }
            c[i] = -2;
            i += 1;
        }
    }
}

/// Contraction route for shifts near small torsion.
fn case_torsion(
    ctx: &mut Ctx,
    a0: &DiagElement,
    h: &RMatrix,
    w: &RVector,
    q: u64,
    zc: &[i64],
) -> Result<Option<LevelCertificate>, SearchError> {
    let p = ctx.prec();
    let d = ctx.d();
    let orbit = ctx.orbit;
    let params = ctx.params.clone();
    let zq: RVector = orbit.lattice.point(zc).iter().map(|x| x.div_int(q as i64)).collect();
    let zq_coords: Vec<Rational> = zc.iter().map(|&z| Rational::from((z, q as i64))).collect();
    let y0 = Grid::new(orbit.lattice.clone(), zq.clone())?;
    let h_aff = AffineElement::new(h.clone(), h.mul_vec(&vec_sub(w, &zq)))?;
    let chart = match decompose_near_identity(&h_aff, NEIGHBORHOOD_RADIUS) {
        Ok(c) => c,
        Err(e) => {
            ctx.log("contraction", json!({"chart": e.to_string()}));
            return Ok(None);
        }
    };
    // move the diagonal part to the left: u_V(t) c = c u_V(t / c_i)
    let c = chart.a.clone();
    let tprime: Vec<(RootIndex, RealScalar)> = chart
        .t
        .iter()
        .map(|(alpha, t)| match *alpha {
            RootIndex::V { i } => (*alpha, t / &c.entries()[i]),
            _ => (*alpha, t.clone()),
        })
        .collect();
    let a0c = c.inverse().mul(a0);
    let floor = noise_floor(p);
    let active: Vec<(RootIndex, f64)> = tprime
        .iter()
        .map(|(a, t)| (*a, t.to_f64()))
        .filter(|(_, t)| t.abs() > floor)
        .collect();
    ctx.log(
        "contraction",
        json!({"c_log": c.log_f64(), "t": tprime.iter().map(|(a, t)| (a.to_string(), t.to_f64())).collect::<Vec<_>>(),
               "noise_floor": floor, "active": active.len()}),
    );
    let b1 = stab_subgroup(orbit, &zq_coords, q)?;
    ctx.log("subgroup", json!({"index": b1.index, "exponent": b1.exponent, "rows": b1.exponent_lattice}));
    let Some(&(alpha0, _)) = active.iter().max_by(|x, y| x.1.abs().total_cmp(&y.1.abs())) else {
        ctx.log("contraction", json!({"skipped": "no shear coordinate above the noise floor"}));
        return Ok(None);
    };
    let Some((ge, gen)) = regular_generator(orbit, &b1, alpha0, p) else {
        ctx.log("contraction", json!({"skipped": "no regular element among small subgroup elements"}));
        return Ok(None);
    };
    // largest power keeping every coordinate at most omega
    let glog = gen.log_f64();
    let gnorm = glog.iter().cloned().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut i_max = (params.b_norm_cap.ln() / gnorm).floor();
    for &(alpha, t) in &active {
        let lam: f64 = alpha.log_functional(d).iter().zip(&glog).map(|(f, x)| f * x).sum();
        if lam > 0.0 {
            i_max = i_max.min(((params.omega.ln() - t.abs().ln()) / lam).floor());
        }
    }
    let i_pow = i_max.max(0.0) as i64;
    let b = gen.pow(i_pow);
    let b_exps: Vec<i64> = ge.iter().map(|x| x * i_pow).collect();
    let s: Vec<(RootIndex, RealScalar)> = tprime.iter().map(|(a, t)| (*a, &b.root_value(*a) * t)).collect();
    let s_abs = |alpha: RootIndex| s.iter().find(|x| x.0 == alpha).map(|x| x.1.to_f64().abs()).unwrap_or(0.0);
    ctx.log(
        "expansion",
        json!({"alpha0": alpha0.to_string(), "generator": ge, "power": i_pow,
               "s": s.iter().map(|(a, v)| (a.to_string(), v.to_f64())).collect::<Vec<_>>()}),
    );
    // gap split: thresholds tau_l increasing towards 1, the leading root above the gap
    let lead = s_abs(alpha0);
    let mut tau = params.omega * 2f64.powf(-params.k);
    let mut split = None;
    for ell in 0..params.l.max(1) {
        let next = tau.powf(params.zeta);
        if next > lead {
            break;
        }
        if !active.iter().any(|(a, _)| {
            let v = s_abs(*a);
            v >= tau && v < next
        }) {
            split = Some((Some(ell), tau, next));
            break;
        }
        tau = next;
    }
    let (ell, tau_lo, tau_hi) = split.unwrap_or_else(|| {
        // no clean gap below the leading root: split just under it
        let below = active
            .iter()
            .map(|(a, _)| s_abs(*a))
            .filter(|&v| v < lead)
            .fold(floor, f64::max);
        (None, below * (1.0 + 1e-9), lead)
    });
    let phi1: Vec<RootIndex> = active.iter().map(|x| x.0).filter(|a| s_abs(*a) >= tau_hi).collect();
    ctx.log(
        "gap",
        json!({"ell": ell, "tau_low": tau_lo, "tau_high": tau_hi,
               "phi1": phi1.iter().map(|a| a.to_string()).collect::<Vec<_>>()}),
    );
    if phi1.is_empty() {
        return Ok(None);
    }
    let lcoords = trace_zero_coords(&glog);
    let vectors: Vec<Vec<f64>> = phi1.iter().map(|a| functional_coords(*a, d)).collect();
    if vectors.iter().any(|v| v.iter().zip(&lcoords).map(|(x, y)| x * y).sum::<f64>() <= 0.0) {
        ctx.log("extreme", json!({"skipped": "a large coordinate is contracted by the generator"}));
        return Ok(None);
    }
    let ep = match extreme_point_functional(&vectors, &lcoords) {
        Ok(ep) => ep,
        Err(e) => {
            ctx.log("extreme", json!({"error": e.to_string()}));
            return Ok(None);
        }
    };
    let alpha_j = phi1[ep.j];
    let s1 = ep.s1_f64();
    let s2 = ep.s2_f64();
    let dotv = |f: &[f64], v: &[f64]| f.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let rho = covering_radius_bound(&b1.log_basis(orbit));
    // a1 expands the chosen root by e, a2 pushes the others below tau_lo
    let kappa1 = 1.0 / dotv(&s1, &vectors[ep.j]);
    let mut kappa2 = 0.0f64;
    for (idx, alpha) in phi1.iter().enumerate() {
        if idx == ep.j {
            continue;
        }
        let v = &vectors[idx];
        let need = s_abs(*alpha).ln() + kappa1 * dotv(&s1, v) - tau_lo.ln() + 2.0 * rho + 1.0;
        kappa2 = kappa2.max(need / -dotv(&s2, v));
    }
    let x: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| kappa1 * a + kappa2 * b).collect();
    let target = DiagElement::from_log_f64(&from_trace_zero(&x), p);
    let approx = approximate_in_subgroup(orbit, &target, &b1, params.cap)?;
    let b2 = approx.b.clone();
    let s2v: Vec<(RootIndex, RealScalar)> = s.iter().map(|(a, v)| (*a, &b2.root_value(*a) * v)).collect();
    let r = s2v.iter().find(|x| x.0 == alpha_j).map(|x| x.1.clone()).expect("root present");
    let others_small = s2v
        .iter()
        .filter(|x| x.0 != alpha_j)
        .all(|x| x.1.to_f64().abs() < tau_lo);
    ctx.log(
        "extreme",
        json!({"alpha_j": alpha_j.to_string(), "margin1": ep.margin1, "margin2": ep.margin2,
               "kappa1": kappa1, "kappa2": kappa2, "rho": rho, "b2_exponents": approx.b_exponents,
               "log_dist": approx.log_dist, "r": r.to_f64(), "others_below_tau": others_small}),
    );
    let sign = match r.is_positive() {
        Some(true) => Sign::Plus,
        Some(false) => Sign::Minus,
        None => return Ok(None),
    };
    let e2 = params.eps_window;
    let e1 = e2 / 64.0;
    let disp = match root_displacement(
        &y0,
        alpha_j,
        &RealScalar::from_f64(e1, p),
        &RealScalar::from_f64(e2, p),
        sign,
        params.cap,
    ) {
        Ok(dp) => dp,
        Err(e) => {
            ctx.log("displacement", json!({"error": e.to_string()}));
            return Ok(None);
        }
    };
    let tc = &disp.t / &r;
    ctx.log(
        "displacement",
        json!({"t": disp.t.to_f64(), "theta": disp.theta.to_f64(), "character_target": tc.to_f64()}),
    );
    let b3 = match character_approx(orbit, &b1, alpha_j, &tc, params.m, params.eta_cap) {
        Ok(ca) => {
            ctx.log(
                "character",
                json!({"b_exponents": ca.b_exponents, "value": ca.value.to_f64(), "error": ca.error.to_f64(), "q": ca.q}),
            );
            ca.b
        }
        Err(e) => {
            ctx.log("character", json!({"error": e.to_string()}));
            return Ok(None);
        }
    };
    let bb = b3.mul(&b2).mul(&b);
    let a = bb.mul(&a0c);
    // a y = H y0 with H the conjugated shears; H = pert * u_alpha_j(t)
    let sfin: Vec<(RootIndex, RealScalar)> = tprime.iter().map(|(al, t)| (*al, &bb.root_value(*al) * t)).collect();
    let hfin = ChartCoords {
        a: DiagElement::identity(d, p),
        t: sfin,
    }
    .compose();
    let u_inv = AffineElement::root(alpha_j, &-&disp.t, d);
    let pert = hfin.compose(&u_inv);
    let hint = transfer(ctx, &a, &pert, &disp.witness, disp.theta.to_f64(), e1, e2, "contraction")?;
    ctx.log("contraction", json!({"b_exponents": b_exps}));
    finish(ctx, &a, hint, "contraction")
}

/// Balancing fallback: near misses of `a0 y` in a small box are flattened by a
/// diagonal element.
fn balanced(ctx: &mut Ctx, a0: &DiagElement) -> Result<Option<LevelCertificate>, SearchError> {
    let p = ctx.prec();
    let ay = a0.apply_grid(ctx.y)?;
    let cands = match enumerate_box(&ay, &RealScalar::from_f64(ctx.params.refine_bound, p), ctx.params.cap) {
        Ok(c) => c,
        Err(GridError::CapExceeded { estimated, .. }) => {
            ctx.log("balanced", json!({"capped": estimated}));
            return Ok(None);
        }
        Err(e) => return Err(e.into()),
    };
    let limit = RealScalar::from_f64(ctx.params.eps_window, p);
    let mut ranked: Vec<(f64, Vec<i64>, RVector)> = cands
        .into_iter()
        .filter_map(|c| {
            let n = norm_product(&c.vector).abs();
            (n.is_positive() == Some(true) && n.definitely_lt(&limit)).then(|| (n.to_f64(), c.coords, c.vector))
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let theta = RealScalar::from_f64(ctx.params.theta, p);
    let n_ranked = ranked.len();
    for (_, coords, v) in ranked {
        let Some(ab) = balancing(&v, &theta) else { continue };
        let a = ab.mul(a0);
        let ay2 = a.apply_grid(ctx.y)?;
        let img = ab.apply_vec(&v);
        let hint = ay2.coords_of(&img).ok().or(Some(coords));
        if let Some(cert) = finish(ctx, &a, hint, "balanced")? {
            return Ok(Some(cert));
        }
    }
    ctx.log("balanced", json!({"found": false, "near_misses": n_ranked}));
    Ok(None)
}

fn classify(ctx: &mut Ctx, w: &RVector) -> Result<CaseTag, SearchError> {
    let pr = ctx.params;
    let v = diophantine_test(&ctx.orbit.lattice, w, pr.k, pr.c, pr.q_max, pr.l)?;
    let tag = match (v.case, v.violation.clone()) {
        (DiophantineCase::Diophantine, _) => CaseTag::Diophantine,
        (DiophantineCase::NearSmallTorsion, Some((q, z, _))) => CaseTag::TorsionSmall { q, z },
        (DiophantineCase::NearLargeTorsion, Some((q, z, _))) => CaseTag::TorsionLarge { q, z },
        _ => return Err(SearchError::Degenerate("torsion verdict without a violation".into())),
    };
    ctx.log(
        "classify",
        json!({"w": f64s(w), "case": tag, "violation": v.violation, "undecided": v.undecided}),
    );
    Ok(tag)
}

fn run_case(ctx: &mut Ctx, tag: &CaseTag, a0: &DiagElement, h: &RMatrix, w: &RVector) -> Result<Option<LevelCertificate>, SearchError> {
    match tag {
        CaseTag::Diophantine => case_diophantine(ctx, a0, h, w),
        CaseTag::TorsionSmall { q, z } => case_torsion(ctx, a0, h, w, *q, z),
        CaseTag::TorsionLarge { .. } => Ok(None),
    }
}

/// Orbit-guided witness search on `y` against the compact orbit of `orbit`.
///
/// The flow brings the underlying lattice near the orbit point; the fiber
/// shift there is classified by its approximations by torsion points and a
/// diagonal candidate is built by the matching route: stabilizer translates
/// for Diophantine shifts, contraction and a Baker-type correction near small
/// torsion, a short diagonal perturbation (one retry) near large torsion. A
/// balancing fallback runs last. Every returned witness has passed an exact
/// recheck of the level inequalities from integer coordinates.
pub fn guided_witness(y: &Grid, orbit: &CompactOrbit, params: &GuidedParams) -> Result<GuidedWitness, SearchError> {
    let d = y.dim();
    if orbit.lattice.dim() != d {
        return Err(SearchError::Argument(format!("grid has dimension {d}, orbit {}", orbit.lattice.dim())));
    }
    let p = y.prec();
    let mut ctx = Ctx {
        y,
        orbit,
        params,
        trace: Vec::new(),
    };
    ctx.log("params", serde_json::to_value(params).unwrap_or(Value::Null));
    let target = Target::new(orbit.lattice.clone())?;
    let flow = FlowSpec::horospherical(d, params.t_max);
    let cfg = HitConfig::from_beta(params.t_max, params.beta)?;
    let rec = first_hitting(y.lattice(), &target, &flow, &cfg)?;
    ctx.log("recurrence", serde_json::to_value(&rec).unwrap_or(Value::Null));
    let (Some(t_hit), Some(h)) = (rec.t_hit, hit_element(y.lattice(), &target, &flow, &rec)) else {
        return Err(ctx.no_find("recurrence"));
    };
    let h = h.with_prec(p);
    let a0 = DiagElement::from_log(
        &flow
            .direction
            .iter()
            .map(|&c| &RealScalar::from_f64(c, p) * &RealScalar::from_f64(t_hit, p))
            .collect::<Vec<_>>(),
    );
    let h_inv = h.inverse().ok_or_else(|| SearchError::Degenerate("hit element is singular".into()))?;
    let w = h_inv.mul_vec(&a0.apply_vec(y.shift()));
    let h_dist = AffineElement::linear_only(h.clone())?.dist_to_identity().to_f64();
    ctx.log("fiber", json!({"t_hit": t_hit, "h_dist": h_dist, "a0_log": a0.log_f64()}));
    let tag = classify(&mut ctx, &w)?;
    let mut found = run_case(&mut ctx, &tag, &a0, &h, &w)?;
    if found.is_none() {
        if let CaseTag::TorsionLarge { .. } = tag {
            // perturb by diag(e^s, e^-s, 1, ...) along a short mesh and retry once
            let s_max = (1.0 + params.t_max.powf(-params.beta)).ln();
            for step in 1..=params.mesh.max(1) {
                let s = s_max * step as f64 / params.mesh.max(1) as f64;
                let mut logs = vec![0.0; d];
                logs[0] = s;
                logs[1] = -s;
                let pa = DiagElement::from_log_f64(&logs, p);
                let a1 = pa.mul(&a0);
                let h1 = pa.matrix().mul(&h);
                let h1_inv = h1.inverse().ok_or_else(|| SearchError::Degenerate("perturbed hit is singular".into()))?;
                let w1 = h1_inv.mul_vec(&a1.apply_vec(y.shift()));
                let tag1 = classify(&mut ctx, &w1)?;
                ctx.log("perturb", json!({"s": s, "case": tag1}));
                if !matches!(tag1, CaseTag::TorsionLarge { .. }) {
                    found = run_case(&mut ctx, &tag1, &a1, &h1, &w1)?;
                    break;
                }
            }
        }
    }
    if found.is_none() {
        found = balanced(&mut ctx, &a0)?;
    }
    match found {
        Some(level) => {
            let route = level.source.clone();
            Ok(GuidedWitness {
                witness: level.witness.clone(),
                case: tag,
                route,
                level,
                trace: ctx.trace,
            })
        }
        None => Err(ctx.no_find("candidates")),
    }
}
