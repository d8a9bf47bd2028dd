//! Design and simulation of multi-modal fluidic actuators built from stacked
//! Kresling modules with bistable panels.
//!
//! The crate covers unit kinematics and their composition ([`geometry`]),
//! keypoint calibrations ([`calibration`]), pressure-driven state diagrams
//! ([`diagram`]), pressure-path replay and planning ([`simulate`], [`plan`]),
//! the combinatorial design space ([`design`], [`cloud`]) and inverse design
//! by greedy super-cell search ([`optimize`]).

pub mod calibration;
pub mod cloud;
pub mod design;
pub mod diagram;
pub mod error;
pub mod geometry;
pub mod model;
pub mod optimize;
pub mod plan;
pub mod simulate;

pub use calibration::{Branch, Calibration, CalibrationError, Extrapolation};
pub use cloud::{configuration_cloud, ConfigurationCloud};
pub use design::{enumerate_designs, parse_design, ActuatorDesign, Chirality, Depth, Face, ModuleKind, ModuleSpec};
pub use diagram::{build_state_diagram, PanelState, StateDiagram};
pub use error::{Error, Result};
pub use geometry::{actuator_pose, unit_transform, RigidTransform, TipVector, TransformOrder, UnitKinematics};
pub use model::Model;
pub use optimize::{exhaustive_search, greedy_search, random_search, CostFunction, SearchReport, TargetSet};
pub use plan::{plan_path, Plan, PlanGoal};
pub use simulate::{simulate_path, PressureEvent, Trajectory};
