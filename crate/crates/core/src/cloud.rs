//! Reachable tip configurations of a design: one point per state-diagram node.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::design::ActuatorDesign;
use crate::diagram::{build_state_diagram, DiagramNode, NodeKind, PressureRegime, StateDiagram};
use crate::error::Result;
use crate::geometry::TipVector;
use crate::model::Model;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    pub tip: TipVector,
    pub state_bits: String,
    pub label: String,
    pub pressure_kpa: f64,
    pub provenance: NodeKind,
    pub regime: PressureRegime,
}

impl CloudPoint {
    pub fn is_stable(&self) -> bool {
        self.provenance == NodeKind::Stable
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationCloud {
    pub design: String,
    pub points: Vec<CloudPoint>,
}

pub fn cloud_point(model: &Model, design: &ActuatorDesign, diagram: &StateDiagram, node: &DiagramNode) -> Result<CloudPoint> {
    let pose = model.pose(design, diagram, node.state, node.pressure_kpa)?;
    Ok(CloudPoint {
        tip: pose.tip,
        state_bits: node.state.bit_string(),
        label: node.label(diagram),
        pressure_kpa: node.pressure_kpa,
        provenance: node.kind,
        regime: node.regime(),
    })
}

/// Evaluates the actuator pose at every node of the design's state diagram.
pub fn configuration_cloud(design: &ActuatorDesign, model: &Model) -> Result<ConfigurationCloud> {
    let diagram = build_state_diagram(design, &model.calibration);
    let points = diagram
        .nodes
        .iter()
        .map(|node| cloud_point(model, design, &diagram, node))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConfigurationCloud {
        design: design.to_string(),
        points,
    })
}

/// One CSV row of a cloud export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudRow {
    pub design_string: String,
    pub state_bits: String,
    pub keypoint_label: String,
    pub theta_act_deg: f64,
    pub deployment: f64,
}

pub fn read_cloud_csv<R: Read>(reader: R) -> Result<Vec<CloudRow>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<Vec<CloudRow>, _>>()?)
}

/// Writes clouds as CSV rows `design_string,state_bits,keypoint_label,theta_act_deg,deployment`.
pub struct CloudCsvWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CloudCsvWriter<W> {
    pub fn new(writer: W) -> Self {
        CloudCsvWriter {
            inner: csv::Writer::from_writer(writer),
        }
    }

    pub fn write(&mut self, cloud: &ConfigurationCloud) -> Result<()> {
        for p in &cloud.points {
            self.inner.serialize(CloudRow {
                design_string: cloud.design.clone(),
                state_bits: p.state_bits.clone(),
                keypoint_label: p.label.clone(),
                theta_act_deg: p.tip.theta_act_deg,
                deployment: p.tip.deployment,
            })?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| crate::error::Error::Io(e.into_error()))
    }
}
