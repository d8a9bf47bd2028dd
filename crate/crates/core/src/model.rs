use crate::calibration::{Branch, Calibration, Extrapolation};
use crate::design::ActuatorDesign;
use crate::diagram::{PanelState, StateDiagram};
use crate::error::{Error, Result};
use crate::geometry::{actuator_pose, ActuatorPose, TransformOrder, UnitKinematics};

/// Calibration plus the modelling switches that affect every evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub calibration: Calibration,
    pub order: TransformOrder,
    pub extrapolation: Extrapolation,
}

impl Model {
    pub fn new(calibration: Calibration) -> Model {
        Model {
            calibration,
            order: TransformOrder::default(),
            extrapolation: Extrapolation::default(),
        }
    }

    pub fn with_order(mut self, order: TransformOrder) -> Model {
        self.order = order;
        self
    }

    pub fn with_extrapolation(mut self, extrapolation: Extrapolation) -> Model {
        self.extrapolation = extrapolation;
        self
    }

    pub fn h_mm(&self) -> f64 {
        self.calibration.constants.h_mm
    }

    /// Per-unit kinematics with every unit following its depth's panel bit.
    pub fn unit_kinematics(
        &self,
        design: &ActuatorDesign,
        diagram: &StateDiagram,
        state: PanelState,
        pressure_kpa: f64,
    ) -> Result<Vec<UnitKinematics>> {
        if state.width() != diagram.width() {
            return Err(Error::Contract(format!(
                "state {state} does not match a diagram with {} depths",
                diagram.width()
            )));
        }
        design
            .units()
            .iter()
            .map(|spec| {
                let branch = match spec.depth() {
                    None => Branch::S0,
                    Some(depth) => {
                        let bit = diagram.bit_of(depth).ok_or_else(|| {
                            Error::Contract(format!("depth {depth} of {design} is missing from the diagram"))
                        })?;
                        Branch::from_bit(state.get(bit))
                    }
                };
                self.calibration
                    .kinematics_at(spec.kind(), branch, pressure_kpa, self.extrapolation)
            })
            .collect()
    }

    pub fn pose(
        &self,
        design: &ActuatorDesign,
        diagram: &StateDiagram,
        state: PanelState,
        pressure_kpa: f64,
    ) -> Result<ActuatorPose> {
        let kins = self.unit_kinematics(design, diagram, state, pressure_kpa)?;
        actuator_pose(design, &kins, &self.calibration.constants, self.order)
    }
}

impl Default for Model {
    fn default() -> Self {
        Model::new(Calibration::default_table())
    }
}
