//! Cost functions and inverse design over the discrete design space.

mod exhaustive;
mod greedy;
mod random;
mod report;

pub use exhaustive::{cost_table, exhaustive_search, EXHAUSTIVE_GUARD};
pub use greedy::{greedy_search, MAX_SUPER_CELL_UNITS};
pub use random::random_search;
pub use report::{read_cost_table, write_cost_table, CostRow, CurvePoint, SearchMethod, SearchReport};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::calibration::Branch;
use crate::design::{ActuatorDesign, Depth, ModuleSpec, OPTIONS_PER_UNIT};
use crate::diagram::{build_state_diagram, NodeKind, StateDiagram};
use crate::error::{Error, Result};
use crate::geometry::{unit_transform, RigidTransform, TipVector};
use crate::model::Model;

/// Target tip positions in the base-cap frame, in millimetres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct TargetSet {
    targets: Vec<[f64; 3]>,
}

impl TargetSet {
    pub fn new(targets: Vec<[f64; 3]>) -> Result<TargetSet> {
        if targets.is_empty() {
            return Err(Error::Contract("a target set needs at least one target".into()));
        }
        if let Some(i) = targets.iter().position(|t| t.iter().any(|x| !x.is_finite())) {
            return Err(Error::Contract(format!("target {} is not finite", i + 1)));
        }
        Ok(TargetSet { targets })
    }

    pub fn targets(&self) -> &[[f64; 3]] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Mean distance of the targets from the origin.
    pub fn mean_radius_mm(&self) -> f64 {
        self.targets.iter().map(|t| vec3(t).norm()).sum::<f64>() / self.targets.len() as f64
    }
}

impl TryFrom<Vec<[f64; 3]>> for TargetSet {
    type Error = Error;

    fn try_from(targets: Vec<[f64; 3]>) -> Result<Self> {
        TargetSet::new(targets)
    }
}

impl From<TargetSet> for Vec<[f64; 3]> {
    fn from(t: TargetSet) -> Self {
        t.targets
    }
}

fn vec3(a: &[f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

/// Which diagram nodes count as reachable configurations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigSet {
    /// Stable states at 0 kPa only.
    StableOnly,
    /// Stable states, pre-snap configurations and the two range extremes.
    #[default]
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum CostVariant {
    /// Mean over targets of the closest reachable tip distance, in units of h.
    TargetError { targets: TargetSet },
    /// Negated largest bend angle in degrees.
    MaxBend,
    /// Negated largest normalized deployment.
    MaxDeployment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    pub variant: CostVariant,
    pub config_set: ConfigSet,
    /// Targets must be met in order along one decreasing-pressure sweep.
    pub monotone: bool,
}

impl CostFunction {
    pub fn target_error(targets: TargetSet) -> CostFunction {
        CostFunction {
            variant: CostVariant::TargetError { targets },
            config_set: ConfigSet::default(),
            monotone: false,
        }
    }

    pub fn max_bend() -> CostFunction {
        CostFunction {
            variant: CostVariant::MaxBend,
            config_set: ConfigSet::default(),
            monotone: false,
        }
    }

    pub fn max_deployment() -> CostFunction {
        CostFunction {
            variant: CostVariant::MaxDeployment,
            config_set: ConfigSet::default(),
            monotone: false,
        }
    }

    pub fn with_config_set(mut self, config_set: ConfigSet) -> CostFunction {
        self.config_set = config_set;
        self
    }

    pub fn with_monotone(mut self, monotone: bool) -> Result<CostFunction> {
        if monotone && !matches!(self.variant, CostVariant::TargetError { .. }) {
            return Err(Error::InvalidSearch(
                "the monotone-pressure constraint only applies to the target_error cost".into(),
            ));
        }
        self.monotone = monotone;
        Ok(self)
    }

    pub fn name(&self) -> &'static str {
        match self.variant {
            CostVariant::TargetError { .. } => "target_error",
            CostVariant::MaxBend => "max_bend",
            CostVariant::MaxDeployment => "max_deployment",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.monotone && !matches!(self.variant, CostVariant::TargetError { .. }) {
            return Err(Error::InvalidSearch(
                "the monotone-pressure constraint only applies to the target_error cost".into(),
            ));
        }
        if let CostVariant::TargetError { targets } = &self.variant {
            TargetSet::new(targets.targets.clone())?;
        }
        Ok(())
    }

    /// Ψ from the tips of every diagram node, indexed like `diagram.nodes`.
    fn psi(&self, diagram: &StateDiagram, tips: &[Vector3<f64>], h_mm: f64) -> Result<f64> {
        let included: Vec<usize> = (0..tips.len())
            .filter(|&i| self.includes(diagram.nodes[i].kind))
            .collect();
        if included.is_empty() {
            return Err(Error::Internal("empty configuration set".into()));
        }
        match &self.variant {
            CostVariant::MaxBend => Ok(-included
                .iter()
                .map(|&i| TipVector::from_vector(tips[i], h_mm).theta_act_deg)
                .fold(f64::NEG_INFINITY, f64::max)),
            CostVariant::MaxDeployment => Ok(-included
                .iter()
                .map(|&i| tips[i].norm() / h_mm)
                .fold(f64::NEG_INFINITY, f64::max)),
            CostVariant::TargetError { targets } => {
                let targets: Vec<Vector3<f64>> = targets.targets.iter().map(vec3).collect();
                let sum = if self.monotone {
                    monotone_sum(diagram, tips, &targets, |k| self.includes(k))
                } else {
                    targets
                        .iter()
                        .map(|t| {
                            included
                                .iter()
                                .map(|&i| (tips[i] - t).norm())
                                .fold(f64::INFINITY, f64::min)
                        })
                        .sum()
                };
                Ok(sum / (targets.len() as f64 * h_mm))
            }
        }
    }

    fn includes(&self, kind: NodeKind) -> bool {
        match self.config_set {
            ConfigSet::All => true,
            ConfigSet::StableOnly => kind == NodeKind::Stable,
        }
    }
}

/// Nodes met, in order, by a single decreasing-pressure sweep that starts in
/// each stable state at the highest pressure it can be held at.
pub fn monotone_chains(diagram: &StateDiagram) -> Vec<Vec<usize>> {
    let n_stable = diagram.stable_states.len();
    let max_inflation = diagram.nodes.len() - 2;
    let max_deflation = diagram.nodes.len() - 1;
    let presnap = |from, inflate: bool| {
        diagram.transitions.iter().position(|t| {
            t.from == from && (t.direction == crate::diagram::Direction::Inflate) == inflate
        })
    };
    diagram
        .stable_states
        .iter()
        .enumerate()
        .map(|(si, &s)| {
            let mut chain = vec![presnap(s, true).map_or(max_inflation, |t| n_stable + t), si];
            let mut cur = s;
            while let Some(t) = presnap(cur, false) {
                chain.push(n_stable + t);
                cur = diagram.transitions[t].to;
            }
            chain.push(max_deflation);
            chain
        })
        .collect()
}

fn monotone_sum(
    diagram: &StateDiagram,
    tips: &[Vector3<f64>],
    targets: &[Vector3<f64>],
    include: impl Fn(NodeKind) -> bool,
) -> f64 {
    let mut best = f64::INFINITY;
    for chain in monotone_chains(diagram) {
        let chain: Vec<usize> = chain.into_iter().filter(|&i| include(diagram.nodes[i].kind)).collect();
        if chain.is_empty() {
            continue;
        }
        // acc[j]: best cost with the latest target matched at chain position ≤ j.
        let mut acc = vec![0.0; chain.len()];
        for t in targets {
            let mut run = f64::INFINITY;
            for (j, &node) in chain.iter().enumerate() {
                run = run.min(acc[j]);
                acc[j] = run + (tips[node] - t).norm();
            }
        }
        best = best.min(acc.into_iter().fold(f64::INFINITY, f64::min));
    }
    best
}

/// Ψ of one design, evaluated through the full configuration cloud.
pub fn evaluate_design(design: &ActuatorDesign, model: &Model, cost: &CostFunction) -> Result<f64> {
    cost.validate()?;
    let diagram = build_state_diagram(design, &model.calibration);
    let tips = diagram
        .nodes
        .iter()
        .map(|n| Ok(model.pose(design, &diagram, n.state, n.pressure_kpa)?.tip.vector()))
        .collect::<Result<Vec<_>>>()?;
    cost.psi(&diagram, &tips, model.h_mm())
}

/// Target error Ψ of a design.
pub fn target_error(
    design: &ActuatorDesign,
    model: &Model,
    targets: &TargetSet,
    config_set: ConfigSet,
    monotone: bool,
) -> Result<f64> {
    let cost = CostFunction::target_error(targets.clone())
        .with_config_set(config_set)
        .with_monotone(monotone)?;
    evaluate_design(design, model, &cost)
}

struct CompiledDiagram {
    diagram: StateDiagram,
    bit_of_depth: [Option<u8>; 3],
    // (state mask, pressure slot) per node
    nodes: Vec<(u8, usize)>,
}

/// Ψ evaluator with unit transforms precomputed at every node pressure, for
/// fast scans over many designs. Agrees with [`evaluate_design`] exactly.
pub struct Evaluator {
    cost: CostFunction,
    h_mm: f64,
    pressures: Vec<f64>,
    table: Vec<Option<RigidTransform>>,
    diagrams: Vec<CompiledDiagram>,
}

impl Evaluator {
    pub fn new(model: &Model, cost: &CostFunction) -> Result<Evaluator> {
        cost.validate()?;
        let cal = &model.calibration;
        let (lo, hi) = cal.pressure_range();
        let mut pressures = vec![0.0, lo, hi];
        for d in Depth::ALL {
            let t = cal.thresholds(d);
            pressures.extend([t.p_plus_kpa, t.p_minus_kpa]);
        }
        pressures.sort_by(f64::total_cmp);
        pressures.dedup();

        let mut table = Vec::with_capacity(pressures.len() * OPTIONS_PER_UNIT * 2);
        for &p in &pressures {
            for option in 0..OPTIONS_PER_UNIT {
                let spec = ModuleSpec::from_option_index(option).expect("option in range");
                for branch in [Branch::S0, Branch::S1] {
                    let branch = if spec.depth().is_none() { Branch::S0 } else { branch };
                    let t = cal
                        .kinematics_at(spec.kind(), branch, p, model.extrapolation)
                        .ok()
                        .map(|kin| unit_transform(spec, &kin, &cal.constants, model.order));
                    table.push(t);
                }
            }
        }

        let diagrams = (0u8..8)
            .map(|mask| {
                let depths: Vec<Depth> = Depth::ALL.into_iter().filter(|d| mask >> d.index() & 1 == 1).collect();
                let diagram = StateDiagram::for_depths(&depths, cal);
                let mut bit_of_depth = [None; 3];
                for (bit, d) in depths.iter().enumerate() {
                    bit_of_depth[d.index()] = Some(bit as u8);
                }
                let nodes = diagram
                    .nodes
                    .iter()
                    .map(|n| {
                        let slot = pressures.iter().position(|&p| p == n.pressure_kpa).expect("node pressure is tabulated");
                        let mask = n.state.bits().iter().enumerate().fold(0u8, |m, (i, &b)| m | (u8::from(b) << i));
                        (mask, slot)
                    })
                    .collect();
                CompiledDiagram {
                    diagram,
                    bit_of_depth,
                    nodes,
                }
            })
            .collect();

        Ok(Evaluator {
            cost: cost.clone(),
            h_mm: model.h_mm(),
            pressures,
            table,
            diagrams,
        })
    }

    pub fn cost(&self) -> &CostFunction {
        &self.cost
    }

    /// Ψ of the design given by per-unit option indices (see [`ModuleSpec::option_index`]).
    pub fn evaluate_options(&self, options: &[u8]) -> Result<f64> {
        let mut mask = 0u8;
        for &o in options {
            if let Some(d) = ModuleSpec::from_option_index(o as usize).and_then(|s| s.depth()) {
                mask |= 1 << d.index();
            }
        }
        let cd = &self.diagrams[mask as usize];
        let mut unit_bits: [Option<u8>; crate::design::DEFAULT_MAX_UNITS] = [None; crate::design::DEFAULT_MAX_UNITS];
        if options.len() > unit_bits.len() {
            return Err(Error::Contract(format!("designs are limited to {} units", unit_bits.len())));
        }
        for (k, &o) in options.iter().enumerate() {
            unit_bits[k] = ModuleSpec::from_option_index(o as usize)
                .ok_or_else(|| Error::Contract(format!("option index {o} out of range")))?
                .depth()
                .and_then(|d| cd.bit_of_depth[d.index()]);
        }
        let mut tips = Vec::with_capacity(cd.nodes.len());
        for (i, &(state, slot)) in cd.nodes.iter().enumerate() {
            if !self.cost.includes(cd.diagram.nodes[i].kind) {
                tips.push(Vector3::zeros());
                continue;
            }
            let mut acc = RigidTransform::identity();
            for (k, &o) in options.iter().enumerate() {
                let branch = unit_bits[k].map_or(0, |b| (state >> b & 1) as usize);
                let t = self.table[(slot * OPTIONS_PER_UNIT + o as usize) * 2 + branch].as_ref().ok_or_else(|| {
                    Error::Internal(format!(
                        "no tabulated kinematics for option {o} on branch s{branch} at {} kPa",
                        self.pressures[slot]
                    ))
                })?;
                acc = acc.compose(t);
            }
            tips.push(acc.translation);
        }
        self.cost.psi(&cd.diagram, &tips, self.h_mm)
    }

    pub fn evaluate(&self, design: &ActuatorDesign) -> Result<f64> {
        let options: Vec<u8> = design.units().iter().map(|s| s.option_index() as u8).collect();
        self.evaluate_options(&options)
    }
}

/// Writes the base-38 digits of `index` into `out`, most significant first.
pub(crate) fn decode_options(mut index: u64, out: &mut [u8]) {
    for slot in out.iter_mut().rev() {
        *slot = (index % OPTIONS_PER_UNIT as u64) as u8;
        index /= OPTIONS_PER_UNIT as u64;
    }
}

pub(crate) fn options_to_design(options: &[u8]) -> ActuatorDesign {
    ActuatorDesign::new(
        options
            .iter()
            .map(|&o| ModuleSpec::from_option_index(o as usize).expect("option in range"))
            .collect(),
    )
    .expect("non-empty design within the unit limit")
}
