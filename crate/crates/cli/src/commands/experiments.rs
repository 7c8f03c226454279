use serde_json::json;

use cassels::compact_orbit::{diophantine_test, fiber_density_probe, q_rational_points, stab_subgroup};
use cassels::matrix::RVector;
use cassels::recurrence::{
    horospherical_hitting, random_lattice, random_start_hitting, FlowSpec, HitConfig, HittingRecord,
    Target, TargetShape,
};
use cassels::scalar::RealScalar;

use super::engine;
use crate::spec::orbit;
use crate::table::{floats, ints, Table};
use crate::{CliError, DensityArgs, RecurrenceArgs, Report, RunConfig, UnitsArgs};

pub(super) fn recurrence(cfg: &RunConfig, a: &RecurrenceArgs) -> Result<Report, CliError> {
    let target = Target::cubic(cfg.precision).map_err(engine)?;
    let flow = FlowSpec::horospherical(3, a.t_max);
    let mut hit = match a.beta {
        Some(b) => HitConfig::from_beta(a.t_max, b).map_err(|e| CliError::Usage(e.to_string()))?,
        None => HitConfig::annulus(a.eps),
    };
    if a.ball {
        hit.shape = TargetShape::Ball;
    }
    let (recs, us): (Vec<HittingRecord>, Vec<Vec<f64>>) = match a.horo_grid {
        None => {
            let r = random_start_hitting(cfg.seed, a.starts, &target, &flow, &hit).map_err(engine)?;
            (r, Vec::new())
        }
        Some(n) => {
            let x = random_lattice(3, cfg.seed, 0, flow.required_prec().max(cfg.precision)).map_err(engine)?;
            let c = (n as f64 - 1.0) / 2.0;
            let grid: Vec<Vec<f64>> = (0..n * n)
                .map(|k| vec![(k / n) as f64 - c, (k % n) as f64 - c].into_iter().map(|x| x * a.horo_spacing).collect())
                .collect();
            let r = horospherical_hitting(&x, &grid, &target, a.t_max, &hit).map_err(engine)?;
            (r, grid)
        }
    };
    let mut t = Table::new(&["seed", "index", "u", "start_hash", "eps", "beta", "t_hit", "size", "verified"]);
    for (i, r) in recs.iter().enumerate() {
        t.push(vec![
            cfg.seed.to_string(),
            i.to_string(),
            us.get(i).map(|u| floats(u)).unwrap_or_default(),
            r.start_hash.clone(),
            format!("{}", r.eps),
            r.beta.map(|b| format!("{b}")).unwrap_or_default(),
            r.t_hit.map_or("-1".into(), |x| format!("{x}")),
            r.size.map(|x| format!("{x}")).unwrap_or_default(),
            r.verified.to_string(),
        ]);
    }
    let hits = recs.iter().filter(|r| r.verified).count();
    Ok(Report {
        table: t,
        result: json!({ "records": recs, "verified_hits": hits, "runs": recs.len() }),
        found: true,
        note: None,
    })
}

pub(super) fn density(cfg: &RunConfig, a: &DensityArgs) -> Result<Report, CliError> {
    let o = orbit(a.field.as_deref(), cfg.precision)?;
    let d = o.lattice.dim();
    if a.y.len() != d {
        return Err(CliError::Usage(format!("--y needs {d} coordinates")));
    }
    let ys: RVector = a.y.iter().map(|&x| RealScalar::from_f64(x, cfg.precision)).collect();
    let w = o.lattice.basis().mul_vec(&ys);
    let verdict = diophantine_test(&o.lattice, &w, a.k, a.c, a.q_max, a.l).map_err(engine)?;
    let case = serde_json::to_value(verdict.case).expect("serializable");
    let case = case.as_str().unwrap_or_default().to_string();
    let mut t = Table::new(&["Q", "mesh", "orbit_size", "covering_estimate", "case"]);
    let mut probes = Vec::new();
    for &q in &a.q_list {
        let p = fiber_density_probe(&o, &a.y, q, a.mesh, cfg.cap_points).map_err(engine)?;
        t.push(vec![
            format!("{q}"),
            p.mesh.to_string(),
            p.orbit_size.to_string(),
            format!("{}", p.covering_estimate),
            case.clone(),
        ]);
        probes.push(p);
    }
    Ok(Report {
        table: t,
        result: json!({ "verdict": verdict, "probes": probes }),
        found: true,
        note: None,
    })
}

pub(super) fn units(cfg: &RunConfig, a: &UnitsArgs) -> Result<Report, CliError> {
    let o = orbit(a.field.as_deref(), cfg.precision)?;
    let st = &o.stabilizer;
    let mut t = Table::new(&["kind", "index", "coords", "value", "logs"]);
    let coords = |e: &cassels::compact_orbit::FieldElement| {
        e.coords.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
    };
    for (i, u) in st.fundamental.iter().enumerate() {
        let logs: Vec<f64> = o.field.embed_all(u, 128).iter().map(|x| x.abs().ln().to_f64()).collect();
        t.push(vec!["fundamental".into(), i.to_string(), coords(u), o.field.norm(u).to_string(), floats(&logs)]);
    }
    for (i, g) in st.generators.iter().enumerate() {
        t.push(vec!["generator".into(), i.to_string(), coords(g), o.field.norm(g).to_string(), floats(&st.log_basis[i])]);
    }
    t.push(vec!["regulator".into(), String::new(), String::new(), format!("{}", st.regulator), String::new()]);
    let mut subgroups = Vec::new();
    if let Some(q) = a.q {
        if q == 0 {
            return Err(CliError::Usage("--q must be positive".into()));
        }
        for (i, p) in q_rational_points(o.field.degree(), q).iter().enumerate() {
            let b1 = stab_subgroup(&o, p, q).map_err(engine)?;
            let rows: Vec<String> = b1.exponent_lattice.iter().map(|r| ints(r)).collect();
            t.push(vec![
                format!("stabilizer_q{q}"),
                i.to_string(),
                ints(&b1.shift_numerators),
                b1.index.to_string(),
                rows.join(";"),
            ]);
            subgroups.push(b1);
        }
    }
    Ok(Report {
        table: t,
        result: json!({ "field": o.field, "stabilizer": st, "subgroups": subgroups }),
        found: true,
        note: None,
    })
}
