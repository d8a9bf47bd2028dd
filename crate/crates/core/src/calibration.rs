//! Per-kind pressure thresholds and kinematic keypoints, with validation and
//! piecewise-linear interpolation along each panel-state branch.
//!
//! The on-disk format is TOML; see `data/default_calibration.toml` and the
//! README for the grammar.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::design::{Depth, ModuleKind};
use crate::error::{Error, Result};
use crate::geometry::{ModuleConstants, UnitKinematics};

/// The calibration shipped with the crate.
pub const DEFAULT_CALIBRATION_TOML: &str = include_str!("../data/default_calibration.toml");

/// Largest bend an s0 keypoint may carry.
pub const S0_BEND_LIMIT_DEG: f64 = 3.0;

/// Panel state of a single unit: folded in or popped out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    S0,
    S1,
}

impl Branch {
    pub fn from_bit(bit: bool) -> Branch {
        if bit {
            Branch::S1
        } else {
            Branch::S0
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::S0 => "s0",
            Branch::S1 => "s1",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What to do with a pressure outside a branch's keypoints.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extrapolation {
    #[default]
    Strict,
    Clamp,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub pressure_kpa: f64,
    pub state: Branch,
    pub u_z_mm: f64,
    pub theta_deg: f64,
    pub phi_deg: f64,
}

impl Keypoint {
    pub fn kinematics(&self) -> UnitKinematics {
        UnitKinematics::new(self.u_z_mm, self.theta_deg, self.phi_deg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub p_plus_kpa: f64,
    pub p_minus_kpa: f64,
}

/// Validated data for one module kind. Branch keypoints are sorted by pressure.
#[derive(Clone, Debug, PartialEq)]
pub struct KindTable {
    pub kind: ModuleKind,
    pub thresholds: Option<Thresholds>,
    pub note: Option<String>,
    s0: Vec<Keypoint>,
    s1: Vec<Keypoint>,
}

impl KindTable {
    pub fn branch(&self, branch: Branch) -> &[Keypoint] {
        match (self.kind, branch) {
            (ModuleKind::Kresling, _) | (_, Branch::S0) => &self.s0,
            (_, Branch::S1) => &self.s1,
        }
    }

    /// Covered pressure range of a branch.
    pub fn branch_range(&self, branch: Branch) -> (f64, f64) {
        let kps = self.branch(branch);
        (kps[0].pressure_kpa, kps[kps.len() - 1].pressure_kpa)
    }

    /// Contact clip: the largest bend among this kind's keypoints.
    pub fn theta_max_deg(&self) -> f64 {
        self.s0
            .iter()
            .chain(&self.s1)
            .map(|k| k.theta_deg)
            .fold(0.0, f64::max)
    }

    /// Largest slope of any kinematic component along a branch, per kPa.
    pub fn lipschitz_bound(&self, branch: Branch) -> f64 {
        self.branch(branch)
            .windows(2)
            .map(|w| {
                let dp = w[1].pressure_kpa - w[0].pressure_kpa;
                [
                    w[1].u_z_mm - w[0].u_z_mm,
                    w[1].theta_deg - w[0].theta_deg,
                    w[1].phi_deg - w[0].phi_deg,
                ]
                .iter()
                .map(|dv| (dv / dp).abs())
                .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    fn all_keypoints(&self) -> impl Iterator<Item = &Keypoint> {
        self.s0.iter().chain(&self.s1)
    }
}

/// Validated keypoint table for all four module kinds.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub constants: ModuleConstants,
    kinds: [KindTable; 4],
}

/// Load or validation failure, naming the offending field.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("calibration document is not valid TOML or does not match the schema: {0}")]
    Schema(String),
    #[error("calibration is missing kinds: {}", .0.join(", "))]
    MissingKinds(Vec<String>),
    #[error("unknown kind `{0}` (expected kresling, delta2, delta3, delta4)")]
    UnknownKind(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("could not read calibration file {path}: {message}")]
    Io { path: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> CalibrationError {
    CalibrationError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationDoc {
    h_mm: f64,
    l_mm: f64,
    alpha_deg: f64,
    kinds: BTreeMap<String, KindDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KindDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_plus_kpa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_minus_kpa: Option<f64>,
    keypoints: Vec<Keypoint>,
}

fn kind_from_key(key: &str) -> Option<ModuleKind> {
    ModuleKind::ALL.into_iter().find(|k| k.key() == key)
}

fn slot(kind: ModuleKind) -> usize {
    match kind {
        ModuleKind::Kresling => 0,
        ModuleKind::Bistable(d) => 1 + d.index(),
    }
}

fn finite(field: &str, value: f64) -> std::result::Result<f64, CalibrationError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(invalid(field, "must be a finite number"))
    }
}

fn has_keypoint(kps: &[Keypoint], pressure: f64) -> bool {
    kps.iter().any(|k| k.pressure_kpa == pressure)
}

fn validate_kind(kind: ModuleKind, doc: KindDoc) -> std::result::Result<KindTable, CalibrationError> {
    let prefix = format!("kinds.{}", kind.key());
    for (i, kp) in doc.keypoints.iter().enumerate() {
        let f = format!("{prefix}.keypoints[{i}]");
        finite(&format!("{f}.pressure_kpa"), kp.pressure_kpa)?;
        finite(&format!("{f}.u_z_mm"), kp.u_z_mm)?;
        finite(&format!("{f}.theta_deg"), kp.theta_deg)?;
        finite(&format!("{f}.phi_deg"), kp.phi_deg)?;
        if kp.theta_deg < 0.0 {
            return Err(invalid(format!("{f}.theta_deg"), "bend angle must be non-negative"));
        }
        match kp.state {
            Branch::S0 if kp.theta_deg > S0_BEND_LIMIT_DEG => {
                return Err(invalid(
                    format!("{f}.theta_deg"),
                    format!("s0 keypoints must bend at most {S0_BEND_LIMIT_DEG}°"),
                ))
            }
            Branch::S1 if kind != ModuleKind::Kresling && kp.theta_deg <= 0.0 => {
                return Err(invalid(format!("{f}.theta_deg"), "s1 keypoints must have a positive bend"))
            }
            _ => {}
        }
    }

    let split = |branch: Branch| -> std::result::Result<Vec<Keypoint>, CalibrationError> {
        let mut kps: Vec<Keypoint> = doc.keypoints.iter().copied().filter(|k| k.state == branch).collect();
        kps.sort_by(|a, b| a.pressure_kpa.total_cmp(&b.pressure_kpa));
        if let Some(w) = kps.windows(2).find(|w| w[0].pressure_kpa == w[1].pressure_kpa) {
            return Err(invalid(
                format!("{prefix}.keypoints"),
                format!("duplicate {branch} keypoint at {} kPa; pressures must be strictly monotone", w[0].pressure_kpa),
            ));
        }
        Ok(kps)
    };
    let s0 = split(Branch::S0)?;
    let s1 = split(Branch::S1)?;

    let thresholds = match kind {
        ModuleKind::Kresling => {
            if doc.p_plus_kpa.is_some() || doc.p_minus_kpa.is_some() {
                return Err(invalid(&prefix, "Kresling modules carry no snapping thresholds"));
            }
            if !s1.is_empty() {
                return Err(invalid(format!("{prefix}.keypoints"), "Kresling modules carry only s0 keypoints"));
            }
            if !has_keypoint(&s0, 0.0) {
                return Err(invalid(format!("{prefix}.keypoints"), "missing s0 keypoint at 0 kPa"));
            }
            if s0.first().is_none_or(|k| k.pressure_kpa >= 0.0) {
                return Err(invalid(format!("{prefix}.keypoints"), "missing s0 keypoint at maximum deflation"));
            }
            if s0.last().is_none_or(|k| k.pressure_kpa <= 0.0) {
                return Err(invalid(format!("{prefix}.keypoints"), "missing s0 keypoint at maximum inflation"));
            }
            None
        }
        ModuleKind::Bistable(_) => {
            let p_plus = doc
                .p_plus_kpa
                .ok_or_else(|| invalid(format!("{prefix}.p_plus_kpa"), "missing"))?;
            let p_minus = doc
                .p_minus_kpa
                .ok_or_else(|| invalid(format!("{prefix}.p_minus_kpa"), "missing"))?;
            finite(&format!("{prefix}.p_plus_kpa"), p_plus)?;
            finite(&format!("{prefix}.p_minus_kpa"), p_minus)?;
            if p_plus <= 0.0 {
                return Err(invalid(format!("{prefix}.p_plus_kpa"), "p_plus must be positive"));
            }
            if p_minus >= 0.0 {
                return Err(invalid(format!("{prefix}.p_minus_kpa"), "p_minus must be negative"));
            }
            let kp_field = format!("{prefix}.keypoints");
            for (branch, kps, p) in [
                (Branch::S0, &s0, 0.0),
                (Branch::S0, &s0, p_plus),
                (Branch::S0, &s0, p_minus),
                (Branch::S1, &s1, 0.0),
                (Branch::S1, &s1, p_plus),
                (Branch::S1, &s1, p_minus),
            ] {
                if !has_keypoint(kps, p) {
                    return Err(invalid(&kp_field, format!("missing {branch} keypoint at {p} kPa")));
                }
            }
            if s0.last().unwrap().pressure_kpa > p_plus {
                return Err(invalid(&kp_field, "s0 keypoints cannot lie above p_plus (the panel has snapped out)"));
            }
            if s1.first().unwrap().pressure_kpa < p_minus {
                return Err(invalid(&kp_field, "s1 keypoints cannot lie below p_minus (the panel has snapped back)"));
            }
            if s0.first().unwrap().pressure_kpa >= p_minus {
                return Err(invalid(&kp_field, "missing s0 keypoint at maximum deflation (below p_minus)"));
            }
            if s1.last().unwrap().pressure_kpa <= p_plus {
                return Err(invalid(&kp_field, "missing s1 keypoint at maximum inflation (above p_plus)"));
            }
            Some(Thresholds {
                p_plus_kpa: p_plus,
                p_minus_kpa: p_minus,
            })
        }
    };
    Ok(KindTable {
        kind,
        thresholds,
        note: doc.note,
        s0,
        s1,
    })
}

impl Calibration {
    /// Parses and validates a TOML calibration document.
    pub fn from_toml_str(text: &str) -> std::result::Result<Calibration, CalibrationError> {
        let doc: CalibrationDoc = toml::from_str(text).map_err(|e| CalibrationError::Schema(e.to_string()))?;
        Self::from_doc(doc)
    }

    pub fn from_path(path: impl AsRef<Path>) -> std::result::Result<Calibration, CalibrationError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CalibrationError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    /// The shipped calibration.
    pub fn default_table() -> Calibration {
        Self::from_toml_str(DEFAULT_CALIBRATION_TOML).expect("shipped calibration is valid")
    }

    fn from_doc(mut doc: CalibrationDoc) -> std::result::Result<Calibration, CalibrationError> {
        let constants = ModuleConstants {
            h_mm: finite("h_mm", doc.h_mm)?,
            l_mm: finite("l_mm", doc.l_mm)?,
            alpha_deg: finite("alpha_deg", doc.alpha_deg)?,
        };
        if constants.h_mm <= 0.0 {
            return Err(invalid("h_mm", "must be positive"));
        }
        if constants.l_mm <= 0.0 {
            return Err(invalid("l_mm", "must be positive"));
        }
        if let Some(unknown) = doc.kinds.keys().find(|k| kind_from_key(k).is_none()) {
            return Err(CalibrationError::UnknownKind(unknown.clone()));
        }
        let missing: Vec<String> = ModuleKind::ALL
            .iter()
            .filter(|k| !doc.kinds.contains_key(k.key()))
            .map(|k| k.key().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(CalibrationError::MissingKinds(missing));
        }
        let mut tables = Vec::with_capacity(4);
        for kind in ModuleKind::ALL {
            let kind_doc = doc.kinds.remove(kind.key()).expect("checked above");
            tables.push(validate_kind(kind, kind_doc)?);
        }
        let kinds: [KindTable; 4] = tables.try_into().expect("four kinds");
        let cal = Calibration { constants, kinds };
        cal.check_ordering()?;
        cal.check_coverage()?;
        Ok(cal)
    }

    fn check_ordering(&self) -> std::result::Result<(), CalibrationError> {
        for pair in Depth::ALL.windows(2) {
            let (lo, hi) = (self.thresholds(pair[0]), self.thresholds(pair[1]));
            if lo.p_plus_kpa >= hi.p_plus_kpa {
                return Err(invalid(
                    format!("kinds.delta{}.p_plus_kpa", pair[1].mm()),
                    format!(
                        "p_plus must increase strictly with depth (p_plus({}) = {} >= p_plus({}) = {})",
                        pair[0], lo.p_plus_kpa, pair[1], hi.p_plus_kpa
                    ),
                ));
            }
            if lo.p_minus_kpa <= hi.p_minus_kpa {
                return Err(invalid(
                    format!("kinds.delta{}.p_minus_kpa", pair[1].mm()),
                    format!(
                        "p_minus must decrease strictly with depth (p_minus({}) = {} <= p_minus({}) = {})",
                        pair[0], lo.p_minus_kpa, pair[1], hi.p_minus_kpa
                    ),
                ));
            }
        }
        Ok(())
    }

    fn check_coverage(&self) -> std::result::Result<(), CalibrationError> {
        let (p_min, p_max) = self.pressure_range();
        let top = self.thresholds(Depth::D4).p_plus_kpa;
        let bottom = self.thresholds(Depth::D4).p_minus_kpa;
        if p_max <= top {
            return Err(invalid(
                "kinds",
                format!("every branch active at high pressure must extend above the largest p_plus ({top} kPa); common range ends at {p_max} kPa"),
            ));
        }
        if p_min >= bottom {
            return Err(invalid(
                "kinds",
                format!("every s0 branch must extend below the most negative p_minus ({bottom} kPa); common range starts at {p_min} kPa"),
            ));
        }
        Ok(())
    }

    pub fn kind(&self, kind: ModuleKind) -> &KindTable {
        &self.kinds[slot(kind)]
    }

    pub fn thresholds(&self, depth: Depth) -> Thresholds {
        self.kinds[1 + depth.index()].thresholds.expect("bistable kinds have thresholds")
    }

    /// Pressure range covered by every kind: from the deepest common deflation
    /// keypoint to the highest common inflation keypoint.
    pub fn pressure_range(&self) -> (f64, f64) {
        let p_min = self
            .kinds
            .iter()
            .map(|k| k.branch_range(Branch::S0).0)
            .fold(f64::NEG_INFINITY, f64::max);
        let p_max = self
            .kinds
            .iter()
            .map(|k| match k.kind {
                ModuleKind::Kresling => k.branch_range(Branch::S0).1,
                ModuleKind::Bistable(_) => k.branch_range(Branch::S1).1,
            })
            .fold(f64::INFINITY, f64::min);
        (p_min, p_max)
    }

    /// Kinematics of a unit of `kind` on `branch` at `pressure`, interpolated
    /// linearly between keypoints. Kresling units ignore the branch.
    pub fn kinematics_at(
        &self,
        kind: ModuleKind,
        branch: Branch,
        pressure: f64,
        mode: Extrapolation,
    ) -> Result<UnitKinematics> {
        let table = self.kind(kind);
        let kps = table.branch(branch);
        let (lo, hi) = table.branch_range(branch);
        let p = if pressure.is_nan() || pressure < lo || pressure > hi {
            match mode {
                Extrapolation::Clamp if !pressure.is_nan() => pressure.clamp(lo, hi),
                _ => {
                    return Err(Error::Extrapolation {
                        kind: kind.to_string(),
                        branch: table_branch_name(kind, branch),
                        pressure,
                        min: lo,
                        max: hi,
                    })
                }
            }
        } else {
            pressure
        };
        // First keypoint at or above p.
        let i = kps.partition_point(|k| k.pressure_kpa < p);
        if kps[i].pressure_kpa == p {
            return Ok(kps[i].kinematics());
        }
        let (a, b) = (&kps[i - 1], &kps[i]);
        let t = (p - a.pressure_kpa) / (b.pressure_kpa - a.pressure_kpa);
        let lerp = |x: f64, y: f64| x + t * (y - x);
        Ok(UnitKinematics::new(
            lerp(a.u_z_mm, b.u_z_mm),
            lerp(a.theta_deg, b.theta_deg),
            lerp(a.phi_deg, b.phi_deg),
        ))
    }

    /// Serializes back to the TOML schema. Keypoints come out grouped by branch and sorted by pressure.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_doc()).expect("calibration serializes")
    }

    fn to_doc(&self) -> CalibrationDoc {
        let kinds = self
            .kinds
            .iter()
            .map(|k| {
                (
                    k.kind.key().to_string(),
                    KindDoc {
                        note: k.note.clone(),
                        p_plus_kpa: k.thresholds.map(|t| t.p_plus_kpa),
                        p_minus_kpa: k.thresholds.map(|t| t.p_minus_kpa),
                        keypoints: k.all_keypoints().copied().collect(),
                    },
                )
            })
            .collect();
        CalibrationDoc {
            h_mm: self.constants.h_mm,
            l_mm: self.constants.l_mm,
            alpha_deg: self.constants.alpha_deg,
            kinds,
        }
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn checksum(&self) -> String {
        Sha256::digest(self.to_toml_string().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Copy with every keypoint replaced by `f(kind, keypoint)`, revalidated.
    pub fn map_keypoints(
        &self,
        mut f: impl FnMut(ModuleKind, &Keypoint) -> Keypoint,
    ) -> std::result::Result<Calibration, CalibrationError> {
        let mut doc = self.to_doc();
        for (key, kind_doc) in doc.kinds.iter_mut() {
            let kind = kind_from_key(key).expect("known kind");
            for kp in kind_doc.keypoints.iter_mut() {
                *kp = f(kind, kp);
            }
        }
        Self::from_doc(doc)
    }
}

fn table_branch_name(kind: ModuleKind, branch: Branch) -> &'static str {
    match kind {
        ModuleKind::Kresling => "s0",
        _ => branch.name(),
    }
}

/// Builder used by tests and tools to assemble calibrations programmatically.
#[derive(Clone, Debug)]
pub struct CalibrationBuilder {
    doc: CalibrationDoc,
}

impl CalibrationBuilder {
    pub fn new(constants: ModuleConstants) -> Self {
        CalibrationBuilder {
            doc: CalibrationDoc {
                h_mm: constants.h_mm,
                l_mm: constants.l_mm,
                alpha_deg: constants.alpha_deg,
                kinds: BTreeMap::new(),
            },
        }
    }

    pub fn kind(
        mut self,
        kind: ModuleKind,
        thresholds: Option<Thresholds>,
        keypoints: Vec<Keypoint>,
    ) -> Self {
        self.doc.kinds.insert(
            kind.key().to_string(),
            KindDoc {
                note: None,
                p_plus_kpa: thresholds.map(|t| t.p_plus_kpa),
                p_minus_kpa: thresholds.map(|t| t.p_minus_kpa),
                keypoints,
            },
        );
        self
    }

    pub fn build(self) -> std::result::Result<Calibration, CalibrationError> {
        Calibration::from_doc(self.doc)
    }
}
