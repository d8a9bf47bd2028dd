//! Shortest pressure programs between configurations.
//!
//! The search runs over (panel state, held pressure) pairs. Held pressures are
//! restricted to a finite candidate set: 0, just beyond each threshold, each
//! threshold itself and the range extremes. A program is ranked by its number of
//! events first and by its total pressure swing second.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::design::ActuatorDesign;
use crate::diagram::{build_state_diagram, DiagramNode, PanelState, StateDiagram};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::simulate::{simulate_on, PressureEvent};

/// Upper bound on the overshoot past a threshold used to trigger a snap.
pub const SNAP_MARGIN_KPA: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub enum PlanGoal {
    /// A panel state, held at 0 kPa.
    Stable(PanelState),
    /// A panel state held at a given pressure, such as a diagram node.
    Node { state: PanelState, pressure_kpa: f64 },
    /// Any diagram node whose tip lies within `tolerance_mm` of `target_mm`.
    Tip { target_mm: [f64; 3], tolerance_mm: f64 },
}

impl PlanGoal {
    pub fn node(node: &DiagramNode) -> PlanGoal {
        PlanGoal::Node {
            state: node.state,
            pressure_kpa: node.pressure_kpa,
        }
    }

    /// Parses `s01` (stable state) or a node label such as `s11@p3-`, `s01@0` or `s00@max-`.
    pub fn parse(text: &str, diagram: &StateDiagram) -> Option<PlanGoal> {
        let text = text.trim();
        if text.contains('@') {
            return diagram
                .nodes
                .iter()
                .find(|n| n.label(diagram) == text)
                .map(PlanGoal::node);
        }
        PanelState::parse(text, diagram.width()).map(PlanGoal::Stable)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub events: Vec<PressureEvent>,
    pub final_state: String,
    pub final_pressure_kpa: f64,
    pub total_swing_kpa: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Cost {
    events: u32,
    swing: f64,
}

impl Cost {
    fn cmp(&self, other: &Cost) -> Ordering {
        self.events.cmp(&other.events).then(self.swing.total_cmp(&other.swing))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Entry {
    cost: Cost,
    state: PanelState,
    at: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Reversed for a min-heap; ties broken on (state, candidate) for determinism.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .cmp(&self.cost)
            .then_with(|| other.state.cmp(&self.state))
            .then_with(|| other.at.cmp(&self.at))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Overshoot used past each threshold: at most [`SNAP_MARGIN_KPA`], and at most
/// half the smallest gap between distinct thresholds, 0 and the range ends.
pub fn snap_margin(diagram: &StateDiagram) -> f64 {
    let mut levels: Vec<f64> = diagram.p_plus.iter().chain(&diagram.p_minus).copied().collect();
    levels.extend([0.0, diagram.pressure_range.0, diagram.pressure_range.1]);
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let gap = levels.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    SNAP_MARGIN_KPA.min(gap / 2.0)
}

fn candidates(diagram: &StateDiagram) -> Vec<f64> {
    let eps = snap_margin(diagram);
    let mut c = vec![0.0, diagram.pressure_range.0, diagram.pressure_range.1];
    for i in 0..diagram.width() {
        c.extend([
            diagram.p_plus[i],
            diagram.p_plus[i] + eps,
            diagram.p_minus[i],
            diagram.p_minus[i] - eps,
        ]);
    }
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

fn step(diagram: &StateDiagram, state: PanelState, from: f64, to: f64) -> PanelState {
    diagram.crossings(state, from, to).last().map_or(state, |t| t.to)
}

/// Finds the cheapest program of pressure extrema that takes `design` from
/// `from` at 0 kPa to `goal`. The result is replayed before being returned.
pub fn plan_path(design: &ActuatorDesign, model: &Model, goal: &PlanGoal, from: PanelState) -> Result<Plan> {
    let diagram = build_state_diagram(design, &model.calibration);
    plan_on(design, &diagram, model, goal, from)
}

pub(crate) fn plan_on(
    design: &ActuatorDesign,
    diagram: &StateDiagram,
    model: &Model,
    goal: &PlanGoal,
    from: PanelState,
) -> Result<Plan> {
    if from.width() != diagram.width() {
        return Err(Error::Contract(format!(
            "start state {from} has {} bits but {design} has {} distinct depths",
            from.width(),
            diagram.width()
        )));
    }
    let (lo, hi) = diagram.pressure_range;
    let targets: Vec<(PanelState, f64)> = match goal {
        PlanGoal::Stable(s) => vec![(*s, 0.0)],
        PlanGoal::Node { state, pressure_kpa } => vec![(*state, *pressure_kpa)],
        PlanGoal::Tip { target_mm, tolerance_mm } => {
            let mut nearest = f64::INFINITY;
            let mut hits = Vec::new();
            for node in &diagram.nodes {
                let tip = model.pose(design, diagram, node.state, node.pressure_kpa)?.tip;
                let dist = (0..3).map(|k| (tip.d[k] - target_mm[k]).powi(2)).sum::<f64>().sqrt();
                nearest = nearest.min(dist);
                if dist <= *tolerance_mm {
                    hits.push((node.state, node.pressure_kpa));
                }
            }
            if hits.is_empty() {
                return Err(Error::Unreachable(format!(
                    "no configuration of {design} lies within {tolerance_mm} mm of the target (nearest {nearest:.3} mm)"
                )));
            }
            hits
        }
    };
    for (state, p) in &targets {
        if state.width() != diagram.width() {
            return Err(Error::Contract(format!("goal state {state} does not fit {design}")));
        }
        if !(lo..=hi).contains(p) {
            return Err(Error::Contract(format!(
                "goal pressure {p} kPa is outside the calibrated range [{lo}, {hi}] kPa"
            )));
        }
    }

    let mut cand = candidates(diagram);
    for &(_, p) in &targets {
        if !cand.contains(&p) {
            cand.push(p);
        }
    }
    let zero = cand.iter().position(|&p| p == 0.0).expect("0 is a candidate");
    let is_goal = |s: PanelState, at: usize| targets.iter().any(|&(gs, gp)| gs == s && cand[at] == gp);

    let mut best: HashMap<(PanelState, usize), Cost> = HashMap::new();
    let mut prev: HashMap<(PanelState, usize), (PanelState, usize)> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let start = Cost { events: 0, swing: 0.0 };
    best.insert((from, zero), start);
    heap.push(Entry {
        cost: start,
        state: from,
        at: zero,
    });
    let mut reached = None;
    while let Some(Entry { cost, state, at }) = heap.pop() {
        if best.get(&(state, at)).is_some_and(|c| c.cmp(&cost) == Ordering::Less) {
            continue;
        }
        if is_goal(state, at) {
            reached = Some((state, at, cost));
            break;
        }
        for (next_at, &q) in cand.iter().enumerate() {
            if next_at == at {
                continue;
            }
            let next = step(diagram, state, cand[at], q);
            let c = Cost {
                events: cost.events + 1,
                swing: cost.swing + (q - cand[at]).abs(),
            };
            let key = (next, next_at);
            if best.get(&key).is_none_or(|old| c.cmp(old) == Ordering::Less) {
                best.insert(key, c);
                prev.insert(key, (state, at));
                heap.push(Entry {
                    cost: c,
                    state: next,
                    at: next_at,
                });
            }
        }
    }
    let Some((state, at, cost)) = reached else {
        return Err(Error::Unreachable(format!(
            "{design} cannot reach the goal from {from} with any pressure program"
        )));
    };

    let mut pressures = Vec::new();
    let mut key = (state, at);
    while key != (from, zero) {
        pressures.push(cand[key.1]);
        key = prev[&key];
    }
    pressures.reverse();
    let events: Vec<PressureEvent> = pressures.into_iter().map(PressureEvent::new).collect();

    let replay = simulate_on(design, diagram, model, &events, from)?;
    let last = replay.final_sample();
    if last.state != state || last.pressure_kpa != cand[at] {
        return Err(Error::Internal(format!(
            "plan for {design} replays to {}@{} instead of {state}@{}",
            last.state, last.pressure_kpa, cand[at]
        )));
    }
    Ok(Plan {
        events,
        final_state: state.bit_string(),
        final_pressure_kpa: cand[at],
        total_swing_kpa: cost.swing,
    })
}
