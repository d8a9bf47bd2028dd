//! Rigid-transform kinematics of single modules and their bottom-up
//! composition into actuator poses.
//!
//! Conventions: millimetres and degrees, base cap at the origin with +z along
//! the undeformed actuator axis, face 1 of the first unit on +x.

use std::ops::Mul;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::design::{ActuatorDesign, ModuleSpec};
use crate::error::{Error, Result};

/// Geometric constants of the module family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleConstants {
    /// Undeformed module height.
    pub h_mm: f64,
    /// Hexagon edge length.
    pub l_mm: f64,
    /// Undeformed relative rotation of the two caps.
    pub alpha_deg: f64,
}

impl Default for ModuleConstants {
    fn default() -> Self {
        ModuleConstants {
            h_mm: 24.0,
            l_mm: 30.0,
            alpha_deg: 30.0,
        }
    }
}

/// Order in which a unit's tilt and twist are applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformOrder {
    /// Tilt, then twist about the tilted axis; the bend angle equals the calibrated θ.
    #[default]
    TiltFirst,
    /// Twist, then tilt; the lean azimuth is carried around by the twist.
    TwistFirst,
}

/// Proper rigid motion `x -> R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn apply(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let r = self.rotation.inverse();
        RigidTransform {
            rotation: r,
            translation: -(r * self.translation),
        }
    }

    /// Largest deviation of `RᵀR` from the identity, plus `|det R - 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        let m = self.rotation.matrix();
        let gram = m.transpose() * m - Matrix3::identity();
        gram.amax() + (m.determinant() - 1.0).abs()
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

/// Kinematic state of one unit relative to its undeformed geometry.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct UnitKinematics {
    /// Axial displacement of the top cap.
    pub u_z_mm: f64,
    /// Bend angle of the top cap.
    pub theta_deg: f64,
    /// Twist added to the undeformed cap rotation.
    pub phi_deg: f64,
}

impl UnitKinematics {
    pub fn new(u_z_mm: f64, theta_deg: f64, phi_deg: f64) -> Self {
        UnitKinematics {
            u_z_mm,
            theta_deg,
            phi_deg,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u_z_mm.is_finite() && self.theta_deg.is_finite() && self.phi_deg.is_finite()
    }
}

/// Base-to-tip vector of an actuator with its derived metrics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TipVector {
    pub d: [f64; 3],
    /// Angle between `d` and +z, in `[0, 180]`.
    pub theta_act_deg: f64,
    /// `||d|| / h`.
    pub deployment: f64,
}

impl TipVector {
    pub fn from_vector(d: Vector3<f64>, h_mm: f64) -> TipVector {
        let norm = d.norm();
        let theta_act_deg = if norm > 0.0 {
            (d.z / norm).clamp(-1.0, 1.0).acos().to_degrees()
        } else {
            0.0
        };
        TipVector {
            d: [d.x, d.y, d.z],
            theta_act_deg,
            deployment: norm / h_mm,
        }
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.d[0], self.d[1], self.d[2])
    }

    pub fn norm(&self) -> f64 {
        self.vector().norm()
    }
}

/// Lean azimuth of a spec in degrees: opposite the modified panel. Kresling units
/// carry no face and use the face-1 convention (only relevant for a nonzero Kresling bend).
fn lean_azimuth_deg(spec: ModuleSpec) -> f64 {
    spec.face().map_or(0.0, |f| f.azimuth_deg()) + 180.0
}

/// Bottom-cap to top-cap transform of a single unit.
pub fn unit_transform(
    spec: ModuleSpec,
    kin: &UnitKinematics,
    constants: &ModuleConstants,
    order: TransformOrder,
) -> RigidTransform {
    let psi = lean_azimuth_deg(spec).to_radians();
    // Tilting about (-sin ψ, cos ψ, 0) by +θ carries +z toward azimuth ψ.
    let axis = Unit::new_unchecked(Vector3::new(-psi.sin(), psi.cos(), 0.0));
    let tilt = Rotation3::from_axis_angle(&axis, kin.theta_deg.to_radians());
    let twist = Rotation3::from_axis_angle(
        &Vector3::z_axis(),
        (spec.chirality().sign() * (constants.alpha_deg + kin.phi_deg)).to_radians(),
    );
    let rotation = match order {
        TransformOrder::TiltFirst => tilt * twist,
        TransformOrder::TwistFirst => twist * tilt,
    };
    let translation = rotation * Vector3::new(0.0, 0.0, constants.h_mm + kin.u_z_mm);
    RigidTransform::new(rotation, translation)
}

/// Per-cap poses (cap k+1 relative to the base) and the tip vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ActuatorPose {
    pub caps: Vec<RigidTransform>,
    pub tip: TipVector,
}

/// Accumulates unit transforms bottom-up so upper units inherit the twist and tilt below them.
pub fn actuator_pose(
    design: &ActuatorDesign,
    kins: &[UnitKinematics],
    constants: &ModuleConstants,
    order: TransformOrder,
) -> Result<ActuatorPose> {
    if kins.len() != design.len() {
        return Err(Error::Contract(format!(
            "design has {} units but {} kinematic states were supplied",
            design.len(),
            kins.len()
        )));
    }
    if let Some(k) = kins.iter().position(|k| !k.is_finite()) {
        return Err(Error::Contract(format!("kinematics of unit {} are not finite", k + 1)));
    }
    let mut caps = Vec::with_capacity(design.len());
    let mut acc = RigidTransform::identity();
    for (spec, kin) in design.units().iter().zip(kins) {
        acc = acc.compose(&unit_transform(*spec, kin, constants, order));
        caps.push(acc);
    }
    let tip = TipVector::from_vector(acc.translation, constants.h_mm);
    Ok(ActuatorPose { caps, tip })
}
