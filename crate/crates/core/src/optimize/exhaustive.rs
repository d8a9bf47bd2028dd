use std::time::Instant;

use rayon::prelude::*;

use super::report::{CostRow, CurvePoint, SearchMethod, SearchReport};
use super::{decode_options, options_to_design, CostFunction, Evaluator};
use crate::design::{design_count, enumerate_designs};
use crate::error::{Error, Result};
use crate::model::Model;

/// Largest length scanned without `force` (38^4 = 2,085,136 designs).
pub const EXHAUSTIVE_GUARD: usize = 4;

/// Global minimum of Ψ over every design of `n` units, scanned in
/// lexicographic order so the first minimum found is the smallest string.
pub fn exhaustive_search(model: &Model, cost: &CostFunction, n: usize, force: bool) -> Result<SearchReport> {
    if n > EXHAUSTIVE_GUARD && !force {
        return Err(Error::Guard {
            n,
            limit: EXHAUSTIVE_GUARD,
        });
    }
    let start = Instant::now();
    let evaluator = Evaluator::new(model, cost)?;
    let (best, evaluations) = scan(&evaluator, n, true)?;
    let curve = vec![CurvePoint {
        n_units: n,
        design: best.1,
        psi: best.0,
        evaluations,
    }];
    Ok(SearchReport::new(
        SearchMethod::Exhaustive,
        model,
        cost,
        curve,
        start.elapsed().as_secs_f64(),
    ))
}

/// Ψ of every design of `n` units, in lexicographic order. Evaluated in
/// parallel; the row order does not depend on scheduling.
pub fn cost_table(model: &Model, cost: &CostFunction, n: usize, force: bool) -> Result<Vec<CostRow>> {
    // Validates n and applies the enumeration guard.
    enumerate_designs(n, force)?;
    let evaluator = Evaluator::new(model, cost)?;
    let count = u64::try_from(design_count(n))
        .map_err(|_| Error::InvalidSearch(format!("38^{n} designs cannot be tabulated")))?;
    (0..count)
        .into_par_iter()
        .map_init(
            || vec![0u8; n],
            |buf, i| {
                decode_options(i, buf);
                Ok(CostRow {
                    design: options_to_design(buf).to_string(),
                    psi: evaluator.evaluate_options(buf)?,
                })
            },
        )
        .collect()
}

/// Sequential scan of all designs of length `n`.
pub(super) fn scan(evaluator: &Evaluator, n: usize, force: bool) -> Result<((f64, String), u64)> {
    let mut best: Option<(f64, crate::design::ActuatorDesign)> = None;
    let mut evaluations = 0u64;
    for design in enumerate_designs(n, force)? {
        let psi = evaluator.evaluate(&design)?;
        evaluations += 1;
        if best.as_ref().is_none_or(|(b, _)| psi < *b) {
            best = Some((psi, design));
        }
    }
    debug_assert_eq!(evaluations as u128, design_count(n));
    let (psi, design) = best.ok_or_else(|| Error::Internal("empty design space".into()))?;
    Ok(((psi, design.to_string()), evaluations))
}
