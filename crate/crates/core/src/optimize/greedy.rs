use std::time::Instant;

use rayon::prelude::*;

use super::report::{CurvePoint, SearchMethod, SearchReport};
use super::{decode_options, options_to_design, CostFunction, Evaluator};
use crate::design::{design_count, DEFAULT_MAX_UNITS};
use crate::error::{Error, Result};
use crate::model::Model;

/// Largest super-cell the greedy search accepts.
pub const MAX_SUPER_CELL_UNITS: usize = 3;

/// Best-first greedy search: each iteration appends the super-cell of `n_u`
/// units that minimizes Ψ of the whole design, without revisiting the prefix.
///
/// Candidates are scanned in parallel; ties resolve to the smallest design
/// string, so the result does not depend on scheduling.
pub fn greedy_search(model: &Model, cost: &CostFunction, n_u: usize, n_s_max: usize) -> Result<SearchReport> {
    if !(1..=MAX_SUPER_CELL_UNITS).contains(&n_u) {
        return Err(Error::InvalidSearch(format!(
            "super-cell size n_u must be between 1 and {MAX_SUPER_CELL_UNITS} (got {n_u})"
        )));
    }
    if n_s_max == 0 || n_u * n_s_max > DEFAULT_MAX_UNITS {
        return Err(Error::InvalidSearch(format!(
            "n_u * n_s_max must be between 1 and {DEFAULT_MAX_UNITS} (got {n_u} * {n_s_max})"
        )));
    }
    let start = Instant::now();
    let evaluator = Evaluator::new(model, cost)?;
    let candidates = design_count(n_u) as u64;
    let mut prefix: Vec<u8> = Vec::with_capacity(n_u * n_s_max);
    let mut curve = Vec::with_capacity(n_s_max);
    for _ in 0..n_s_max {
        let base = prefix.len();
        let (psi, index) = (0..candidates)
            .into_par_iter()
            .map_init(
                || {
                    let mut buf = prefix.clone();
                    buf.resize(base + n_u, 0);
                    buf
                },
                |buf, i| {
                    decode_options(i, &mut buf[base..]);
                    evaluator.evaluate_options(buf).map(|psi| (psi, i))
                },
            )
            .try_reduce(|| (f64::INFINITY, u64::MAX), |a, b| Ok(better(a, b)))?;
        if index == u64::MAX {
            return Err(Error::Internal("no candidate produced a finite cost".into()));
        }
        prefix.resize(base + n_u, 0);
        decode_options(index, &mut prefix[base..]);
        curve.push(CurvePoint {
            n_units: prefix.len(),
            design: options_to_design(&prefix).to_string(),
            psi,
            evaluations: candidates,
        });
    }
    Ok(SearchReport::new(
        SearchMethod::Greedy,
        model,
        cost,
        curve,
        start.elapsed().as_secs_f64(),
    )
    .with_greedy(n_u, n_s_max))
}

/// Lower Ψ wins; equal Ψ goes to the smaller candidate index.
fn better(a: (f64, u64), b: (f64, u64)) -> (f64, u64) {
    match a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)) {
        std::cmp::Ordering::Greater => b,
        _ => a,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::{exhaustive_search, TargetSet};

    fn cost() -> CostFunction {
        CostFunction::target_error(TargetSet::new(vec![[12.0, -3.0, 40.0], [-8.0, 6.0, 55.0]]).unwrap())
    }

    #[test]
    fn rejects_bad_parameters() {
        let m = Model::default();
        assert!(matches!(greedy_search(&m, &cost(), 0, 1), Err(Error::InvalidSearch(_))));
        assert!(matches!(greedy_search(&m, &cost(), 4, 1), Err(Error::InvalidSearch(_))));
        assert!(matches!(greedy_search(&m, &cost(), 3, 6), Err(Error::InvalidSearch(_))));
        assert!(matches!(greedy_search(&m, &cost(), 2, 0), Err(Error::InvalidSearch(_))));
    }

    #[test]
    fn single_iteration_is_exhaustive() {
        let m = Model::default();
        for n in 1..=2 {
            let g = greedy_search(&m, &cost(), n, 1).unwrap();
            let e = exhaustive_search(&m, &cost(), n, false).unwrap();
            assert_eq!(g.best.design, e.best.design);
            assert_eq!(g.best.psi, e.best.psi);
            assert_eq!(g.total_evaluations, e.total_evaluations);
        }
    }

    #[test]
    fn each_iteration_extends_the_prefix_optimally() {
        let m = Model::default();
        let c = cost();
        let report = greedy_search(&m, &c, 1, 4).unwrap();
        assert_eq!(report.total_evaluations, 4 * 38);
        let ev = Evaluator::new(&m, &c).unwrap();
        for w in report.curve.windows(2) {
            let prefix: crate::design::ActuatorDesign = w[0].design.parse().unwrap();
            assert!(w[1].design.starts_with(&w[0].design[..w[0].design.len() - 1]));
            for o in 0..38u8 {
                let mut options: Vec<u8> = prefix.units().iter().map(|s| s.option_index() as u8).collect();
                options.push(o);
                assert!(ev.evaluate_options(&options).unwrap() >= w[1].psi);
            }
        }
    }

    #[test]
    fn tie_break_prefers_smaller_index() {
        assert_eq!(better((1.0, 5), (1.0, 3)), (1.0, 3));
        assert_eq!(better((0.5, 5), (1.0, 3)), (0.5, 5));
    }
}
