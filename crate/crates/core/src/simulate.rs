//! Quasi-static replay of pressure histories.
//!
//! A history is a list of extremum events: the pressure is driven
//! monotonically from its current value to each event's target in turn,
//! starting from 0 kPa. Thresholds crossed on the way fire in crossing order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::calibration::Extrapolation;
use crate::design::ActuatorDesign;
use crate::diagram::{build_state_diagram, PanelState, StateDiagram};
use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, TipVector};
use crate::model::Model;

/// Pressure extremum the input is driven to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureEvent {
    pub target_kpa: f64,
}

impl PressureEvent {
    pub fn new(target_kpa: f64) -> PressureEvent {
        PressureEvent { target_kpa }
    }
}

impl From<f64> for PressureEvent {
    fn from(target_kpa: f64) -> Self {
        PressureEvent { target_kpa }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    /// Initial configuration at 0 kPa.
    Start,
    /// Just before a snap, on the old state.
    PreSnap,
    /// Just after a snap, on the new state.
    PostSnap,
    /// At an event's target pressure.
    Extremum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// 0 for the start sample, otherwise the 1-based event that produced it.
    pub event_index: usize,
    pub kind: SampleKind,
    pub pressure_kpa: f64,
    pub state: PanelState,
    pub tip: TipVector,
    pub caps: Vec<RigidTransform>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub design: ActuatorDesign,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn final_state(&self) -> PanelState {
        self.samples.last().expect("trajectory has a start sample").state
    }

    pub fn final_sample(&self) -> &Sample {
        self.samples.last().expect("trajectory has a start sample")
    }
}

fn sample(
    model: &Model,
    design: &ActuatorDesign,
    diagram: &StateDiagram,
    event_index: usize,
    kind: SampleKind,
    state: PanelState,
    pressure_kpa: f64,
) -> Result<Sample> {
    let pose = model.pose(design, diagram, state, pressure_kpa)?;
    Ok(Sample {
        event_index,
        kind,
        pressure_kpa,
        state,
        tip: pose.tip,
        caps: pose.caps,
    })
}

/// Replays `events` from `initial` at 0 kPa, sampling the pose at every fired
/// transition (before and after the snap) and at every event extremum.
pub fn simulate_path(
    design: &ActuatorDesign,
    model: &Model,
    events: &[PressureEvent],
    initial: PanelState,
) -> Result<Trajectory> {
    let diagram = build_state_diagram(design, &model.calibration);
    simulate_on(design, &diagram, model, events, initial)
}

pub(crate) fn simulate_on(
    design: &ActuatorDesign,
    diagram: &StateDiagram,
    model: &Model,
    events: &[PressureEvent],
    initial: PanelState,
) -> Result<Trajectory> {
    if initial.width() != diagram.width() {
        return Err(Error::Contract(format!(
            "initial state {initial} has {} bits but {design} has {} distinct depths",
            initial.width(),
            diagram.width()
        )));
    }
    let (lo, hi) = diagram.pressure_range;
    let mut state = initial;
    let mut pressure = 0.0;
    let mut samples = vec![sample(model, design, diagram, 0, SampleKind::Start, state, pressure)?];
    for (i, event) in events.iter().enumerate() {
        let index = i + 1;
        let mut target = event.target_kpa;
        if !target.is_finite() {
            return Err(Error::Contract(format!("event {index} has a non-finite target")));
        }
        if target < lo || target > hi {
            match model.extrapolation {
                Extrapolation::Clamp => target = target.clamp(lo, hi),
                Extrapolation::Strict => {
                    return Err(Error::Contract(format!(
                        "event {index} targets {target} kPa, outside the calibrated range [{lo}, {hi}] kPa"
                    )))
                }
            }
        }
        for t in diagram.crossings(state, pressure, target) {
            samples.push(sample(model, design, diagram, index, SampleKind::PreSnap, t.from, t.pressure_kpa)?);
            samples.push(sample(model, design, diagram, index, SampleKind::PostSnap, t.to, t.pressure_kpa)?);
            state = t.to;
        }
        pressure = target;
        samples.push(sample(model, design, diagram, index, SampleKind::Extremum, state, pressure)?);
    }
    Ok(Trajectory {
        design: design.clone(),
        samples,
    })
}

/// One CSV row of a trajectory export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub event_index: usize,
    pub pressure_kpa: f64,
    pub state_bits: String,
    pub d_x_mm: f64,
    pub d_y_mm: f64,
    pub d_z_mm: f64,
    pub theta_act_deg: f64,
    pub deployment: f64,
}

impl From<&Sample> for TrajectoryRow {
    fn from(s: &Sample) -> Self {
        TrajectoryRow {
            event_index: s.event_index,
            pressure_kpa: s.pressure_kpa,
            state_bits: s.state.bit_string(),
            d_x_mm: s.tip.d[0],
            d_y_mm: s.tip.d[1],
            d_z_mm: s.tip.d[2],
            theta_act_deg: s.tip.theta_act_deg,
            deployment: s.tip.deployment,
        }
    }
}

pub fn write_trajectory_csv<W: Write>(trajectory: &Trajectory, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in &trajectory.samples {
        w.serialize(TrajectoryRow::from(s))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(reader: R) -> Result<Vec<TrajectoryRow>> {
    let mut r = csv::ReaderBuilder::new().from_reader(reader);
    let rows = r.deserialize().collect::<std::result::Result<Vec<TrajectoryRow>, _>>()?;
    Ok(rows)
}

/// Rigid pose of one cap in the JSON export: row-major rotation and translation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapPose {
    pub rotation: [[f64; 3]; 3],
    pub translation_mm: [f64; 3],
}

impl From<&RigidTransform> for CapPose {
    fn from(t: &RigidTransform) -> Self {
        let m = t.rotation.matrix();
        CapPose {
            rotation: [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ],
            translation_mm: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleJson {
    pub event_index: usize,
    pub kind: SampleKind,
    pub pressure_kpa: f64,
    pub state: String,
    pub tip: TipVector,
    pub caps: Vec<CapPose>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryJson {
    pub design: String,
    pub depths_mm: Vec<u8>,
    pub samples: Vec<SampleJson>,
}

impl TrajectoryJson {
    pub fn from_trajectory(t: &Trajectory) -> TrajectoryJson {
        TrajectoryJson {
            design: t.design.to_string(),
            depths_mm: t.design.depths().iter().map(|d| d.mm()).collect(),
            samples: t
                .samples
                .iter()
                .map(|s| SampleJson {
                    event_index: s.event_index,
                    kind: s.kind,
                    pressure_kpa: s.pressure_kpa,
                    state: s.state.bit_string(),
                    tip: s.tip,
                    caps: s.caps.iter().map(CapPose::from).collect(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::parse_design;

    fn events(ps: &[f64]) -> Vec<PressureEvent> {
        ps.iter().copied().map(PressureEvent::new).collect()
    }

    fn run(design: &str, ps: &[f64]) -> Trajectory {
        let design = parse_design(design).unwrap();
        let width = design.depths().len();
        simulate_path(&design, &Model::default(), &events(ps), PanelState::all_folded(width)).unwrap()
    }

    #[test]
    fn single_unit_pops_above_threshold() {
        let t = run("[3//1]", &[30.0, 0.0]);
        assert_eq!(t.final_state().to_string(), "s1");
        let t = run("[3//1]", &[26.1, 0.0]);
        assert_eq!(t.final_state().to_string(), "s0");
    }

    #[test]
    fn single_unit_full_cycle() {
        let t = run("[3//1]", &[30.0, -25.0, 0.0]);
        assert_eq!(t.final_state().to_string(), "s0");
        let peak = t
            .samples
            .iter()
            .filter(|s| s.state.get(0))
            .map(|s| s.tip.theta_act_deg)
            .fold(0.0, f64::max);
        assert!((peak - 21.7).abs() < 1e-9, "{peak}");
        let pre = t.samples.iter().find(|s| s.kind == SampleKind::PreSnap && s.pressure_kpa == -21.2).unwrap();
        assert!((pre.tip.theta_act_deg - 21.7).abs() < 1e-9);
    }

    #[test]
    fn two_depth_path_to_s01() {
        let t = run("[2//3;4//6]", &[34.8 + 0.5, -16.0 - 0.5]);
        assert_eq!(t.final_state().to_string(), "s01");
        let kinds: Vec<SampleKind> = t.samples.iter().map(|s| s.kind).collect();
        use SampleKind::*;
        assert_eq!(
            kinds,
            vec![Start, PreSnap, PostSnap, PreSnap, PostSnap, Extremum, PreSnap, PostSnap, Extremum]
        );
    }

    #[test]
    fn empty_history_is_rest() {
        let t = run("[2//3;4//6]", &[]);
        assert_eq!(t.samples.len(), 1);
        assert_eq!(t.samples[0].kind, SampleKind::Start);
    }

    #[test]
    fn repeated_event_is_idempotent() {
        let once = run("[2//3;3\\\\1;4//6]", &[30.0]);
        let twice = run("[2//3;3\\\\1;4//6]", &[30.0, 30.0]);
        assert_eq!(once.final_state(), twice.final_state());
    }

    #[test]
    fn out_of_range_events() {
        let design = parse_design("[3//1]").unwrap();
        let model = Model::default();
        let err = simulate_path(&design, &model, &events(&[60.0]), PanelState::all_folded(1)).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        let clamp = model.with_extrapolation(Extrapolation::Clamp);
        let t = simulate_path(&design, &clamp, &events(&[60.0]), PanelState::all_folded(1)).unwrap();
        assert_eq!(t.final_sample().pressure_kpa, 45.0);
        assert!(simulate_path(&design, &clamp, &events(&[f64::NAN]), PanelState::all_folded(1)).is_err());
        assert!(simulate_path(&design, &clamp, &[], PanelState::all_folded(2)).is_err());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let t = run("[4\\\\2;3//6;4\\\\2]", &[36.0, -21.2, -30.0, 0.0]);
        let mut buf = Vec::new();
        write_trajectory_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "event_index,pressure_kpa,state_bits,d_x_mm,d_y_mm,d_z_mm,theta_act_deg,deployment\n"
        ));
        let rows = read_trajectory_csv(buf.as_slice()).unwrap();
        let expected: Vec<TrajectoryRow> = t.samples.iter().map(TrajectoryRow::from).collect();
        assert_eq!(rows, expected);

        let json = serde_json::to_string(&TrajectoryJson::from_trajectory(&t)).unwrap();
        let back: TrajectoryJson = serde_json::from_str(&json).unwrap();
        assert_eq!(back, TrajectoryJson::from_trajectory(&t));
        assert_eq!(back.samples[0].caps.len(), 3);
    }
}
