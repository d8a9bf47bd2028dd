use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::CostFunction;
use crate::error::Result;
use crate::model::Model;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    Greedy,
    Exhaustive,
    Random,
}

impl std::fmt::Display for SearchMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SearchMethod::Greedy => "greedy",
            SearchMethod::Exhaustive => "exhaustive",
            SearchMethod::Random => "random",
        })
    }
}

/// Best design found at one actuator length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n_units: usize,
    pub design: String,
    pub psi: f64,
    pub evaluations: u64,
}

/// One row of a full cost table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub design: String,
    pub psi: f64,
}

pub fn write_cost_table<W: Write>(rows: &[CostRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cost_table<R: Read>(reader: R) -> Result<Vec<CostRow>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<Vec<CostRow>, _>>()?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub method: SearchMethod,
    pub cost: CostFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_u: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_s_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Set when a random search fell back to scanning every design.
    #[serde(default)]
    pub enumerated: bool,
    /// Ψ against the number of units, one point per iteration.
    pub curve: Vec<CurvePoint>,
    /// Lowest Ψ over the curve; the shortest design wins ties.
    pub best: CurvePoint,
    pub total_evaluations: u64,
    pub calibration_checksum: String,
    pub wall_time_s: f64,
}

impl SearchReport {
    pub(crate) fn new(
        method: SearchMethod,
        model: &Model,
        cost: &CostFunction,
        curve: Vec<CurvePoint>,
        wall_time_s: f64,
    ) -> SearchReport {
        let best = curve
            .iter()
            .fold(None::<&CurvePoint>, |best, p| match best {
                Some(b) if b.psi <= p.psi => Some(b),
                _ => Some(p),
            })
            .expect("a search visits at least one length")
            .clone();
        SearchReport {
            method,
            cost: cost.clone(),
            n_u: None,
            n_s_max: None,
            budget: None,
            seed: None,
            enumerated: false,
            total_evaluations: curve.iter().map(|p| p.evaluations).sum(),
            curve,
            best,
            calibration_checksum: model.calibration.checksum(),
            wall_time_s,
        }
    }

    pub(crate) fn with_greedy(mut self, n_u: usize, n_s_max: usize) -> SearchReport {
        self.n_u = Some(n_u);
        self.n_s_max = Some(n_s_max);
        self
    }

    pub(crate) fn with_random(mut self, budget: u64, seed: u64, enumerated: bool) -> SearchReport {
        self.budget = Some(budget);
        self.seed = Some(seed);
        self.enumerated = enumerated;
        self
    }

    /// The report without its timing, for comparing runs.
    pub fn untimed(&self) -> SearchReport {
        SearchReport {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<SearchReport> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes the Ψ curve as `n_units,design,psi,evaluations`.
    pub fn write_curve_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for p in &self.curve {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_curve_csv<R: Read>(reader: R) -> Result<Vec<CurvePoint>> {
        let mut r = csv::Reader::from_reader(reader);
        Ok(r.deserialize().collect::<std::result::Result<Vec<CurvePoint>, _>>()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::greedy_search;

    #[test]
    fn round_trips() {
        let model = Model::default();
        let report = greedy_search(&model, &CostFunction::max_deployment(), 1, 3).unwrap();
        let back = SearchReport::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
        let mut buf = Vec::new();
        report.write_curve_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("n_units,design,psi,evaluations\n"));
        assert_eq!(SearchReport::read_curve_csv(buf.as_slice()).unwrap(), report.curve);
        assert_eq!(report.calibration_checksum, model.calibration.checksum());
    }

    #[test]
    fn cost_table_round_trip() {
        let rows = vec![
            CostRow {
                design: "[2//3;4//6]".into(),
                psi: 0.125,
            },
            CostRow {
                design: "[K\\\\]".into(),
                psi: -1.5,
            },
        ];
        let mut buf = Vec::new();
        write_cost_table(&rows, &mut buf).unwrap();
        assert_eq!(read_cost_table(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn best_prefers_shorter_on_ties() {
        let p = |n, psi| CurvePoint {
            n_units: n,
            design: String::new(),
            psi,
            evaluations: 1,
        };
        let r = SearchReport::new(
            SearchMethod::Greedy,
            &Model::default(),
            &CostFunction::max_bend(),
            vec![p(1, 0.5), p(2, 0.2), p(3, 0.2)],
            0.0,
        );
        assert_eq!(r.best.n_units, 2);
        assert_eq!(r.total_evaluations, 3);
    }
}
