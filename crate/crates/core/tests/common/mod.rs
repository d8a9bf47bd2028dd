#![allow(dead_code)]

use kresling_core::calibration::{Branch, CalibrationBuilder, Keypoint, Thresholds};
use kresling_core::design::{ActuatorDesign, Depth, ModuleKind, ModuleSpec};
use kresling_core::geometry::ModuleConstants;
use kresling_core::{Calibration, UnitKinematics};
use rand::Rng;

fn kp(pressure_kpa: f64, state: Branch, u_z_mm: f64, theta_deg: f64, phi_deg: f64) -> Keypoint {
    Keypoint {
        pressure_kpa,
        state,
        u_z_mm,
        theta_deg,
        phi_deg,
    }
}

/// A calibration with random thresholds, ordered across depths, and random
/// kinematics at every required keypoint.
pub fn random_calibration(rng: &mut impl Rng) -> Calibration {
    let mut p_plus = [0.0; 3];
    let mut p_minus = [0.0; 3];
    p_plus[0] = rng.random_range(8.0..20.0);
    p_minus[0] = -rng.random_range(6.0..18.0);
    for i in 1..3 {
        p_plus[i] = p_plus[i - 1] + rng.random_range(1.0..10.0);
        p_minus[i] = p_minus[i - 1] - rng.random_range(1.0..8.0);
    }
    let p_max = p_plus[2] + rng.random_range(2.0..10.0);
    let p_min = p_minus[2] - rng.random_range(2.0..10.0);

    let mut builder = CalibrationBuilder::new(ModuleConstants::default()).kind(
        ModuleKind::Kresling,
        None,
        vec![
            kp(p_min, Branch::S0, -rng.random_range(8.0..16.0), 0.0, rng.random_range(0.0..12.0)),
            kp(0.0, Branch::S0, 0.0, 0.0, 0.0),
            kp(p_max, Branch::S0, rng.random_range(2.0..8.0), 0.0, -rng.random_range(0.0..6.0)),
        ],
    );
    for (i, depth) in Depth::ALL.into_iter().enumerate() {
        let (pp, pm) = (p_plus[i], p_minus[i]);
        let s0_bend = |rng: &mut dyn rand::RngCore| rng.random_range(0.0..3.0);
        let s1_bend = |rng: &mut dyn rand::RngCore| rng.random_range(0.5..30.0);
        let keypoints = vec![
            kp(p_min, Branch::S0, -rng.random_range(8.0..16.0), s0_bend(rng), rng.random_range(0.0..12.0)),
            kp(pm, Branch::S0, -rng.random_range(2.0..8.0), s0_bend(rng), rng.random_range(0.0..6.0)),
            kp(0.0, Branch::S0, 0.0, 0.0, 0.0),
            kp(pp, Branch::S0, rng.random_range(0.5..4.0), s0_bend(rng), -rng.random_range(0.0..3.0)),
            kp(pm, Branch::S1, -rng.random_range(2.0..8.0), s1_bend(rng), rng.random_range(0.0..6.0)),
            kp(0.0, Branch::S1, rng.random_range(0.0..1.0), s1_bend(rng), rng.random_range(0.0..1.0)),
            kp(pp, Branch::S1, rng.random_range(1.0..5.0), s1_bend(rng), -rng.random_range(0.0..3.0)),
            kp(p_max, Branch::S1, rng.random_range(3.0..8.0), s1_bend(rng), -rng.random_range(0.0..6.0)),
        ];
        builder = builder.kind(
            ModuleKind::Bistable(depth),
            Some(Thresholds {
                p_plus_kpa: pp,
                p_minus_kpa: pm,
            }),
            keypoints,
        );
    }
    builder.build().expect("random calibration is valid")
}

pub fn random_design(rng: &mut impl Rng, n: usize) -> ActuatorDesign {
    ActuatorDesign::new(
        (0..n)
            .map(|_| ModuleSpec::from_option_index(rng.random_range(0..38)).unwrap())
            .collect(),
    )
    .unwrap()
}

/// Random per-unit kinematics; Kresling units never bend.
pub fn random_kinematics(rng: &mut impl Rng, design: &ActuatorDesign) -> Vec<UnitKinematics> {
    design
        .units()
        .iter()
        .map(|spec| {
            let theta = if spec.depth().is_some() { rng.random_range(0.0..30.0) } else { 0.0 };
            UnitKinematics::new(rng.random_range(-14.0..8.0), theta, rng.random_range(-12.0..12.0))
        })
        .collect()
}

/// Target points scattered around the workspace of an `n`-unit actuator.
pub fn random_targets(rng: &mut impl Rng, n: usize, count: usize) -> Vec<[f64; 3]> {
    let h = 24.0 * n as f64;
    (0..count)
        .map(|_| {
            [
                rng.random_range(-0.4 * h..0.4 * h),
                rng.random_range(-0.4 * h..0.4 * h),
                rng.random_range(0.4 * h..1.2 * h),
            ]
        })
        .collect()
}

/// Rotation of a vector about z by `deg` degrees.
pub fn rotate_z(d: [f64; 3], deg: f64) -> [f64; 3] {
    let (s, c) = deg.to_radians().sin_cos();
    [c * d[0] - s * d[1], s * d[0] + c * d[1], d[2]]
}

pub fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn norm(a: [f64; 3]) -> f64 {
    distance(a, [0.0; 3])
}
