use serde::{Deserialize, Serialize};

use super::rate::RateFunction;
use super::SearchError;
use crate::grid::{enumerate_box, norm_product, w_witness, Grid, GridError, Witness};
use crate::matrix::{vec_sup_norm, RVector};
use crate::root_action::DiagElement;
use crate::scalar::RealScalar;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertifyParams {
    /// Levels `T` to certify.
    pub t_list: Vec<f64>,
    pub rate: RateFunction,
    /// Mesh steps per unit `log T` along each log coordinate.
    pub a_mesh: usize,
    /// Enumeration cap per box.
    pub cap: usize,
    /// Radius of the direct box around `y` used for near misses.
    pub refine_bound: f64,
}

impl Default for CertifyParams {
    fn default() -> Self {
        CertifyParams {
            t_list: vec![2.0, 4.0, 8.0],
            rate: RateFunction::log(),
            a_mesh: 6,
            cap: 200_000,
            refine_bound: 64.0,
        }
    }
}

/// A verified `(a, v)` at level `T`: `v` in `y`, `|a| < T`, `|a v| < T`,
/// `|v| <= T^d` and `0 < |N(v)| h(T^d) < 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelCertificate {
    pub t: f64,
    pub a: Vec<RealScalar>,
    /// Witness on `y`; `producer` holds `a`.
    pub witness: Witness,
    pub image_sup: RealScalar,
    /// `|N(v)| h(|v|)`.
    pub rated: RealScalar,
    pub source: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertifiedWitness {
    pub levels: Vec<LevelCertificate>,
    /// Levels with no certificate.
    pub missing: Vec<f64>,
    pub mesh_points: usize,
    pub capped_boxes: usize,
}

impl CertifiedWitness {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
    }
}

/// Logs of a diagonal element with `|a| < T` and `|a v| < T`: with
/// `m_i = min(log T, log T - log|v_i|)` it exists iff `sum m_i > 0`, and
/// `x_i = m_i - (sum m) / d` works.
pub(super) fn balancing(v: &[RealScalar], t: &RealScalar) -> Option<DiagElement> {
    let d = v.len();
    let lt = t.ln();
    let mut m = Vec::with_capacity(d);
    for vi in v {
        let a = vi.abs();
        if a.is_positive() != Some(true) {
            return None;
        }
        m.push((&lt - &a.ln()).min(&lt));
    }
    let s = m.iter().fold(RealScalar::zero(t.prec()), |acc, x| &acc + x);
    if !s.is_positive().unwrap_or(false) {
        return None;
    }
    let shift = s.div_int(d as i64);
    let logs: Vec<RealScalar> = m.iter().map(|x| x - &shift).collect();
    Some(DiagElement::from_log(&logs))
}

/// Full check of a level certificate from the grid and integer coordinates.
pub fn verify_level(y: &Grid, cert: &LevelCertificate, rate: &RateFunction) -> bool {
    let p = y.prec();
    let d = y.dim();
    let t = RealScalar::from_f64(cert.t, p);
    let w = Witness::from_coords(y, &cert.witness.integer_coords, None);
    let Ok(a) = DiagElement::new(cert.a.iter().map(|x| x.with_prec(p)).collect()) else {
        return false;
    };
    let av = a.apply_vec(&w.vector);
    let td = t.powi(d as i64);
    let n = norm_product(&w.vector).abs();
    n.is_positive() == Some(true)
        && a.norm().definitely_lt(&t)
        && vec_sup_norm(&av).definitely_lt(&t)
        && w.sup_norm.definitely_le(&td)
        && (&n * &rate.eval(&td)).definitely_lt(&RealScalar::one(p))
}

fn try_vector(
    y: &Grid,
    coords: &[i64],
    t: f64,
    rate: &RateFunction,
    source: &str,
) -> Option<LevelCertificate> {
    let p = y.prec();
    let tr = RealScalar::from_f64(t, p);
    let v: RVector = y.point(coords);
    let a = balancing(&v, &tr)?;
    let w = Witness::from_coords(y, coords, Some(a.entries().to_vec()));
    let rated = &w.abs_product * &rate.eval(&w.sup_norm);
    let cert = LevelCertificate {
        t,
        a: a.entries().to_vec(),
        image_sup: vec_sup_norm(&a.apply_vec(&v)),
        witness: w,
        rated,
        source: source.to_string(),
    };
    verify_level(y, &cert, rate).then_some(cert)
}

/// Trace-zero log points `l` on a mesh of step `log T / mesh` with `max l < log T`.
fn log_mesh(d: usize, t: f64, mesh: usize) -> Vec<Vec<f64>> {
    let lt = t.ln();
    let m = mesh.max(1) as i64;
    let step = lt / m as f64;
    let span = (d as i64 - 1) * m;
    let mut out = Vec::new();
    let mut k = vec![-span; d - 1];
    loop {
        let mut l: Vec<f64> = k.iter().map(|&x| x as f64 * step).collect();
        l.push(-l.iter().sum::<f64>());
        if l.iter().all(|&x| x < lt * (1.0 - 1e-9)) {
            out.push(l);
        }
        let mut i = 0;
        loop {
            if i == d - 1 {
                return out;
            }
            if k[i] < m {
                k[i] += 1;
                break;
            }
            k[i] = -span;
            i += 1;
        }
    }
}

/// Certify, for each level `T`, a diagonal `a` with `|a| < T` and a point of
/// `a y` in the box of radius `T` with `0 < |N| < 1 / h(T^d)`. A mesh of
/// diagonal elements is searched first; failing that, near misses in a direct
/// box around `y` are balanced onto the diagonal. Every returned level passes
/// an independent recomputation from integer coordinates.
pub fn certify_wr(y: &Grid, params: &CertifyParams) -> Result<CertifiedWitness, SearchError> {
    let d = y.dim();
    let p = y.prec();
    if params.t_list.iter().any(|&t| !(t > 1.0) || !t.is_finite()) {
        return Err(SearchError::Argument("levels must be finite and above 1".into()));
    }
    let mut out = CertifiedWitness {
        levels: Vec::new(),
        missing: Vec::new(),
        mesh_points: 0,
        capped_boxes: 0,
    };
    let zero = RealScalar::zero(p);
    for &t in &params.t_list {
        let tr = RealScalar::from_f64(t, p);
        let eps2 = RealScalar::one(p) / &params.rate.eval(&tr.powi(d as i64));
        let mut found: Option<LevelCertificate> = None;
        for l in log_mesh(d, t, params.a_mesh) {
            out.mesh_points += 1;
            let a = DiagElement::from_log_f64(&l, p);
            let ay = a.apply_grid(y)?;
            match w_witness(&ay, &tr, &zero, &eps2, params.cap) {
                Ok(ws) => {
                    if let Some(w) = ws.witness {
                        if let Some(c) = try_vector(y, &w.integer_coords, t, &params.rate, "mesh") {
                            found = Some(c);
                            break;
                        }
                    }
                }
                Err(GridError::CapExceeded { .. }) => out.capped_boxes += 1,
                Err(e) => return Err(e.into()),
            }
        }
        if found.is_none() {
            let td = t.powi(d as i32);
            let mut r = params.refine_bound.min(td);
            let cands = loop {
                match enumerate_box(y, &RealScalar::from_f64(r, p), params.cap) {
                    Ok(c) => break c,
                    Err(GridError::CapExceeded { .. }) if r > 1.0 => {
                        out.capped_boxes += 1;
                        r /= 2.0;
                    }
                    Err(GridError::CapExceeded { .. }) => break Vec::new(),
                    Err(e) => return Err(e.into()),
                }
            };
            let mut ranked: Vec<(f64, Vec<i64>)> = cands
                .into_iter()
                .filter_map(|c| {
                    let n = norm_product(&c.vector).abs();
                    (n.is_positive() == Some(true) && n.definitely_lt(&eps2)).then(|| (n.to_f64(), c.coords))
                })
                .collect();
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            found = ranked
                .iter()
                .find_map(|(_, c)| try_vector(y, c, t, &params.rate, "balanced"));
        }
        match found {
            Some(c) => out.levels.push(c),
            None => out.missing.push(t),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Lattice;

    #[test]
    fn mesh_respects_level() {
        let m = log_mesh(3, 4.0, 4);
        assert!(!m.is_empty());
        for l in &m {
            assert!(l.iter().sum::<f64>().abs() < 1e-12);
            assert!(l.iter().all(|&x| x < 4f64.ln()));
        }
    }

    #[test]
    fn planted_flat_vector_certifies() {
        // y = a0^-1 y' where y' contains (0.5, 0.5, 0.5) with product 1/8
        let p = 128;
        let sh: Vec<RealScalar> = [0.5, 0.5, 0.5].iter().map(|&x| RealScalar::from_f64(x, p)).collect();
        let y1 = Grid::new(Lattice::standard(3, p), sh).unwrap();
        let a0 = DiagElement::from_log_f64(&[1.0, 0.5, -1.5], p);
        let y = a0.inverse().apply_grid(&y1).unwrap();
        let params = CertifyParams {
            t_list: vec![8.0],
            rate: RateFunction::one(),
            ..Default::default()
        };
        let c = certify_wr(&y, &params).unwrap();
        assert!(c.is_complete(), "{:?}", c.missing);
        assert!(verify_level(&y, &c.levels[0], &params.rate));
    }
}
