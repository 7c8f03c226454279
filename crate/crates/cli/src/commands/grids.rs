use serde_json::json;

use cassels::grid::{w_witness, Grid, Witness};
use cassels::search::{certify_wr, CaseTag, guided_witness, verify_level, CertifyParams, GuidedParams, SearchError};

use super::{engine, rate};
use crate::spec::{grid, number};
use crate::table::{ints, num, Table};
use crate::{CertifyArgs, CliError, Report, RunConfig, WitnessArgs};

const WITNESS_HEADER: [&str; 8] = ["kind", "level", "coords", "sup_norm", "abs_product", "rated", "source", "verified"];

fn witness_row(kind: &str, level: String, w: &Witness, rated: String, source: &str, verified: bool) -> Vec<String> {
    vec![
        kind.into(),
        level,
        ints(&w.integer_coords),
        num(&w.sup_norm),
        num(&w.abs_product),
        rated,
        source.into(),
        verified.to_string(),
    ]
}

pub(super) fn certify(cfg: &RunConfig, a: &CertifyArgs) -> Result<Report, CliError> {
    let (y, _) = grid(&a.grid, a.field.as_deref(), cfg.precision)?;
    let params = CertifyParams {
        t_list: a.t_list.clone(),
        rate: rate(&a.rate)?,
        a_mesh: a.a_mesh,
        cap: cfg.cap_points,
        refine_bound: a.refine_bound,
    };
    let r = certify_wr(&y, &params).map_err(engine)?;
    let mut t = Table::new(&WITNESS_HEADER);
    for lvl in &r.levels {
        let ok = lvl.witness.verify(&y) && verify_level(&y, lvl, &params.rate);
        t.push(witness_row("level", format!("{}", lvl.t), &lvl.witness, num(&lvl.rated), &lvl.source, ok));
    }
    for m in &r.missing {
        t.push(vec![
            "missing".into(),
            format!("{m}"),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            "false".into(),
        ]);
    }
    let found = !r.levels.is_empty();
    Ok(Report {
        table: t,
        result: serde_json::to_value(&r).expect("serializable"),
        found,
        note: (!found).then(|| "no level certified".into()),
    })
}

pub(super) fn witness(cfg: &RunConfig, a: &WitnessArgs) -> Result<Report, CliError> {
    let prec = cfg.precision;
    let (y, orbit) = grid(&a.grid, a.field.as_deref(), prec)?;
    if a.guided {
        let orbit = orbit.ok_or_else(|| CliError::Usage("--guided needs a fiber: grid".into()))?;
        let params = GuidedParams {
            rate: rate(&a.rate)?,
            t_max: a.t_max,
            beta: a.beta,
            theta: number(&a.theta)?.approx(64).to_f64(),
            cap: cfg.cap_points,
            ..GuidedParams::default()
        };
        return guided(&y, &orbit, &params);
    }
    let theta = number(&a.theta)?.approx(prec);
    let eps1 = number(&a.eps1)?.approx(prec);
    let eps2 = number(&a.eps2)?.approx(prec);
    let s = w_witness(&y, &theta, &eps1, &eps2, cfg.cap_points).map_err(engine)?;
    let mut t = Table::new(&WITNESS_HEADER);
    if let Some(w) = &s.witness {
        let ok = w.verify(&y)
            && w.sup_norm.definitely_lt(&theta)
            && w.abs_product.definitely_gt(&eps1)
            && w.abs_product.definitely_lt(&eps2);
        t.push(witness_row("window", String::new(), w, String::new(), "enumeration", ok));
    }
    let found = s.witness.is_some();
    Ok(Report {
        table: t,
        result: json!({
            "witness": s.witness,
            "undecided": s.undecided,
            "ambiguous": s.ambiguous,
            "examined": s.examined,
        }),
        found,
        note: (!found).then(|| {
            if s.undecided {
                "only undecided candidates in the window".into()
            } else {
                "no grid vector in the window".into()
            }
        }),
    })
}

fn case_label(c: &CaseTag) -> String {
    match c {
        CaseTag::Diophantine => "diophantine".into(),
        CaseTag::TorsionSmall { q, z } => format!("torsion_small q={q} z={}", ints(z)),
        CaseTag::TorsionLarge { q, z } => format!("torsion_large q={q} z={}", ints(z)),
    }
}

fn guided(y: &Grid, orbit: &cassels::compact_orbit::CompactOrbit, params: &GuidedParams) -> Result<Report, CliError> {
    let mut t = Table::new(&WITNESS_HEADER);
    match guided_witness(y, orbit, params) {
        Ok(g) => {
            let ok = g.witness.verify(y) && verify_level(y, &g.level, &params.rate);
            t.push(witness_row(
                &case_label(&g.case),
                format!("{}", g.level.t),
                &g.witness,
                num(&g.level.rated),
                &g.route,
                ok,
            ));
            Ok(Report {
                table: t,
                result: json!({ "params": params, "witness": g }),
                found: true,
                note: None,
            })
        }
        Err(SearchError::NoFind { stage, trace }) => Ok(Report {
            table: t,
            result: json!({ "params": params, "no_find": stage, "trace": trace }),
            found: false,
            note: Some(format!("no witness; last stage {stage}")),
        }),
        Err(e) => Err(engine(e)),
    }
}
