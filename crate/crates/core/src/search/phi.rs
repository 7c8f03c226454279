use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::root_action::{DiagElement, RootIndex};
use crate::scalar::RealScalar;

/// Roots expanded (`alpha(a) > 1`) and contracted (`alpha(a) < 1`) by a regular element.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhiSplit {
    pub plus: Vec<RootIndex>,
    pub minus: Vec<RootIndex>,
}

/// Partition of all roots by `alpha(a)` against 1; an element with some
/// `alpha(a) = 1` (or undecided) is rejected with that root.
pub fn phi_split(a: &DiagElement) -> Result<PhiSplit, SearchError> {
    let d = a.dim();
    let one = RealScalar::one(a.prec());
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for alpha in RootIndex::all(d) {
        let v = a.root_value(alpha);
        if v.definitely_gt(&one) {
            plus.push(alpha);
        } else if v.definitely_lt(&one) {
            minus.push(alpha);
        } else {
            return Err(SearchError::NonRegular(alpha));
        }
    }
    Ok(PhiSplit { plus, minus })
}
