use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::exhaustive::scan;
use super::report::{CurvePoint, SearchMethod, SearchReport};
use super::{CostFunction, Evaluator};
use crate::design::{design_count, ActuatorDesign, DEFAULT_MAX_UNITS};
use crate::error::{Error, Result};
use crate::model::Model;

/// Best of `budget` uniformly drawn designs of `n` units. A budget covering
/// the whole space scans it instead.
pub fn random_search(model: &Model, cost: &CostFunction, n: usize, budget: u64, seed: u64) -> Result<SearchReport> {
    if budget == 0 {
        return Err(Error::InvalidSearch("budget must be at least 1".into()));
    }
    if n == 0 || n > DEFAULT_MAX_UNITS {
        return Err(Error::InvalidSearch(format!("n must be between 1 and {DEFAULT_MAX_UNITS} (got {n})")));
    }
    let start = Instant::now();
    let evaluator = Evaluator::new(model, cost)?;
    let space = design_count(n);
    let enumerated = budget as u128 >= space;
    let (psi, design, evaluations) = if enumerated {
        let ((psi, design), evaluations) = scan(&evaluator, n, true)?;
        (psi, design, evaluations)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = (f64::INFINITY, u128::MAX);
        for _ in 0..budget {
            let index = rng.random_range(0..space);
            let design = ActuatorDesign::from_lex_index(n, index).expect("index in range");
            let psi = evaluator.evaluate(&design)?;
            if psi < best.0 || (psi == best.0 && index < best.1) {
                best = (psi, index);
            }
        }
        let design = ActuatorDesign::from_lex_index(n, best.1).expect("index in range");
        (best.0, design.to_string(), budget)
    };
    let curve = vec![CurvePoint {
        n_units: n,
        design,
        psi,
        evaluations,
    }];
    Ok(
        SearchReport::new(SearchMethod::Random, model, cost, curve, start.elapsed().as_secs_f64())
            .with_random(budget, seed, enumerated),
    )
}
