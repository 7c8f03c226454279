use std::path::Path;

use cassels::compact_orbit::{build_compact_point, CompactOrbit, TotallyRealField, DEFAULT_UNIT_BOUND};
use cassels::grid::{cassels_grid_exact, parse_cassels_spec, Grid, GridJson};
use cassels::matrix::RVector;
use cassels::scalar::{ExactReal, IntPoly};

use crate::CliError;

pub fn number(s: &str) -> Result<ExactReal, CliError> {
    ExactReal::parse(s).map_err(|e| CliError::Usage(format!("bad number {s:?}: {e}")))
}

/// Polynomial coefficients, constant term first.
pub fn field(coeffs: Option<&str>) -> Result<TotallyRealField, CliError> {
    match coeffs {
        None => Ok(TotallyRealField::conductor7()),
        Some(s) => {
            let c = s
                .split(',')
                .map(|t| t.trim().parse::<i64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::Usage(format!("bad polynomial {s:?}")))?;
            TotallyRealField::new(IntPoly::from_i64(&c)).map_err(|e| CliError::Usage(e.to_string()))
        }
    }
}

pub fn orbit(coeffs: Option<&str>, prec: u32) -> Result<CompactOrbit, CliError> {
    build_compact_point(&field(coeffs)?, prec, DEFAULT_UNIT_BOUND).map_err(|e| CliError::Engine(e.to_string()))
}

/// A grid given as `cassels:u,v,alpha,beta`, `fiber:y1,...,yd` (shift in
/// lattice coordinates over the compact point) or `json:PATH`. Fiber grids
/// also return their compact orbit.
pub fn grid(spec: &str, field_coeffs: Option<&str>, prec: u32) -> Result<(Grid, Option<CompactOrbit>), CliError> {
    if spec.starts_with("cassels:") {
        let [u, v, a, b] = parse_cassels_spec(spec).map_err(|e| CliError::Usage(e.to_string()))?;
        return Ok((cassels_grid_exact(&u, &v, &a, &b, prec), None));
    }
    if let Some(body) = spec.strip_prefix("fiber:") {
        let o = orbit(field_coeffs, prec)?;
        let y = body.split(',').map(number).collect::<Result<Vec<_>, _>>()?;
        if y.len() != o.lattice.dim() {
            return Err(CliError::Usage(format!("fiber shift needs {} coordinates", o.lattice.dim())));
        }
        let ys: RVector = y.iter().map(|x| x.approx(prec)).collect();
        let shift = o.lattice.basis().mul_vec(&ys);
        let g = Grid::new(o.lattice.clone(), shift).map_err(|e| CliError::Engine(e.to_string()))?;
        return Ok((g, Some(o)));
    }
    if let Some(path) = spec.strip_prefix("json:") {
        let text = std::fs::read_to_string(Path::new(path)).map_err(|e| CliError::Usage(format!("{path}: {e}")))?;
        let j: GridJson = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{path}: {e}")))?;
        let g = Grid::from_json(&j, prec).map_err(|e| CliError::Usage(e.to_string()))?;
        return Ok((g, None));
    }
    Err(CliError::Usage(format!(
        "grid must be cassels:u,v,alpha,beta, fiber:y1,..,yd or json:PATH, got {spec:?}"
    )))
}
