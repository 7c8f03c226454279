use serde_json::json;

use cassels::baker::{character_approx, near_target_product, LogPair, MIN_CERTIFICATE_BOUND};
use cassels::compact_orbit::SubgroupB1;
use cassels::root_action::RootIndex;
use cassels::scalar::{RealScalar, DEFAULT_PRECISION};
use cassels::search::{direct_scan, RateFunction};

use crate::spec::{number, orbit};
use crate::table::{ints, num, Table};
use crate::{BakerArgs, CliError, Command, Report, RunConfig, ScanArgs};

mod experiments;
mod grids;

pub(crate) fn dispatch(cfg: &RunConfig) -> Result<Report, CliError> {
    match &cfg.command {
        Command::Scan(a) => scan(a),
        Command::Certify(a) => grids::certify(cfg, a),
        Command::Witness(a) => grids::witness(cfg, a),
        Command::Recurrence(a) => experiments::recurrence(cfg, a),
        Command::Baker(a) => baker(cfg, a),
        Command::Density(a) => experiments::density(cfg, a),
        Command::Units(a) => experiments::units(cfg, a),
    }
}

pub(crate) fn rate(s: &str) -> Result<RateFunction, CliError> {
    s.parse().map_err(|e: cassels::search::SearchError| CliError::Usage(e.to_string()))
}

pub(crate) fn engine<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Engine(e.to_string())
}

fn scan(a: &ScanArgs) -> Result<Report, CliError> {
    let inputs = [number(&a.u)?, number(&a.v)?, number(&a.alpha)?, number(&a.beta)?];
    let r = rate(&a.rate)?;
    let res = direct_scan(inputs, a.q_max, &r).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut t = Table::new(&["q", "value", "rated", "running_min", "verified"]);
    for rec in &res.records {
        t.push(vec![rec.q.to_string(), num(&rec.value), num(&rec.rated), "true".into(), "true".into()]);
    }
    for q in &res.undecided {
        t.push(vec![q.to_string(), String::new(), String::new(), "false".into(), "false".into()]);
    }
    let found = !res.records.is_empty();
    Ok(Report {
        table: t,
        result: json!({
            "q_max": res.q_max,
            "rate": r.to_string(),
            "records": res.records.len(),
            "zero_hits": res.zero_hits,
            "zero_examples": res.zero_examples,
            "undecided": res.undecided,
        }),
        found,
        note: (!found).then(|| "no positive value in range".into()),
    })
}

fn baker(cfg: &RunConfig, a: &BakerArgs) -> Result<Report, CliError> {
    let prec = cfg.precision.max(DEFAULT_PRECISION);
    let v = &a.values;
    let (targets, m, q, pair) = match &a.character {
        Some(_) if v.len() != 2 => return Err(CliError::Usage("--character takes exactly T M".into())),
        Some(_) => (&v[0], &v[1], None, None),
        None if v.len() < 4 => return Err(CliError::Usage("baker needs L1 L2 T M [Q]".into())),
        None => (&v[2], &v[3], v.get(4), Some((&v[0], &v[1]))),
    };
    let m: f64 = number(m)?.approx(64).to_f64();
    let q: u64 = match q {
        None => 1,
        Some(s) => s.parse().map_err(|_| CliError::Usage(format!("bad q {s:?}")))?,
    };
    let ts = targets
        .split(',')
        .map(|s| number(s).map(|x| x.approx(prec)))
        .collect::<Result<Vec<RealScalar>, _>>()?;
    let mut table = Table::new(&["t", "M", "q", "l1", "l2", "s", "error", "bound", "verified"]);
    let mut results = Vec::new();
    let c = RealScalar::from_f64(a.bound_constant, prec);
    let row = |t: &RealScalar, q: u64, l1: String, l2: String, s: &RealScalar, err: &RealScalar| {
        let bound = &(&c * t).mul_int(q as i64) / &RealScalar::from_f64(m, prec);
        vec![
            num(t),
            format!("{m}"),
            q.to_string(),
            l1,
            l2,
            num(s),
            num(err),
            num(&bound),
            err.definitely_le(&bound).to_string(),
        ]
    };
    match pair {
        Some((l1, l2)) => {
            let p = LogPair::from_exact(&number(l1)?, &number(l2)?, prec, MIN_CERTIFICATE_BOUND).map_err(engine)?;
            for t in &ts {
                let r = near_target_product(&p, t, m, q, a.eta_cap).map_err(engine)?;
                table.push(row(t, q, r.l1.to_string(), r.l2.to_string(), &r.value, &r.error));
                results.push(serde_json::to_value(&r).expect("serializable"));
            }
        }
        None => {
            let alpha: RootIndex = a
                .character
                .as_deref()
                .unwrap_or_default()
                .parse()
                .map_err(|e: cassels::root_action::RootError| CliError::Usage(e.to_string()))?;
            let o = orbit(a.field.as_deref(), prec)?;
            let full = SubgroupB1::full(o.stabilizer.rank());
            for t in &ts {
                let r = character_approx(&o, &full, alpha, t, m, a.eta_cap).map_err(engine)?;
                let (l1, rest) = r.b_exponents.split_first().map_or((0, &[][..]), |(x, r)| (*x, r));
                table.push(row(t, r.q, l1.to_string(), ints(rest), &r.value, &r.error));
                results.push(json!({
                    "b_exponents": r.b_exponents,
                    "log_norm": r.log_norm,
                    "pair": r.pair,
                    "certified_bound": r.certified_bound,
                    "ratio": r.ratio(),
                }));
            }
        }
    }
    Ok(Report {
        table,
        result: json!({ "products": results }),
        found: true,
        note: None,
    })
}
