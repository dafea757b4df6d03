//! Rigid formation geometry for unicycles.
//!
//! A child holding a constant body-frame offset `(x̄, ȳ)` from a parent moving
//! with `(v, ω)` can only respect the no-slip constraint if its heading is
//! offset by `θ̄ = atan2(ω x̄, v - ω ȳ)`. The resulting desired configuration
//! `ḡ = (θ̄, x̄, ȳ)` places the child on its adjoint orbit `g_parent · ḡ`.

use log::warn;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::LeaderProfile;
use crate::se2::{Pose, Rotation, Twist};

/// Below this magnitude `(ω x̄, v - ω ȳ)` is treated as the `atan2(0, 0)` singularity.
pub const SINGULAR_EPS: f64 = 1e-12;

/// Allowed lateral adjoint speed before a configuration is declared infeasible.
pub const LATERAL_TOL: f64 = 1e-9;

/// Relative tolerance of the speed-ratio constancy test.
pub const RATIO_RTOL: f64 = 1e-9;

/// Constant body-frame offset `(x̄, ȳ)` of a child in its parent's frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct FormationOffset {
    pub x_bar: f64,
    pub y_bar: f64,
}

impl FormationOffset {
    pub fn new(x_bar: f64, y_bar: f64) -> Self {
        FormationOffset { x_bar, y_bar }
    }

    pub fn vector(&self) -> Vector2<f64> {
        Vector2::new(self.x_bar, self.y_bar)
    }

    /// Velocity of the offset point in the parent's frame, `ν + ω J p̄`.
    fn carried_velocity(&self, v: f64, omega: f64) -> (f64, f64) {
        (v - omega * self.y_bar, omega * self.x_bar)
    }
}

impl From<[f64; 2]> for FormationOffset {
    fn from(a: [f64; 2]) -> Self {
        FormationOffset::new(a[0], a[1])
    }
}

impl From<FormationOffset> for [f64; 2] {
    fn from(o: FormationOffset) -> Self {
        [o.x_bar, o.y_bar]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FormationClass {
    StrictRigidBody,
    WeakRigidBody,
    Parallel,
    TranslationalLine,
}

impl FormationClass {
    /// Whether a formation of class `self` also meets the objective `declared`.
    ///
    /// Parallel and straight-line formations are special strict formations.
    pub fn satisfies(&self, declared: FormationClass) -> bool {
        use FormationClass::*;
        match declared {
            WeakRigidBody => true,
            StrictRigidBody => matches!(self, StrictRigidBody | Parallel | TranslationalLine),
            other => *self == other,
        }
    }
}

impl std::fmt::Display for FormationClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FormationClass::StrictRigidBody => "StrictRigidBody",
            FormationClass::WeakRigidBody => "WeakRigidBody",
            FormationClass::Parallel => "Parallel",
            FormationClass::TranslationalLine => "TranslationalLine",
        };
        f.write_str(s)
    }
}

/// `θ̄ = atan2(ω x̄, v - ω ȳ)`, the heading offset that keeps the offset point
/// moving along its own body axis.
pub fn heading_offset(offset: &FormationOffset, v: f64, omega: f64) -> Result<f64> {
    let (a, b) = offset.carried_velocity(v, omega);
    if a.hypot(b) <= SINGULAR_EPS {
        return Err(singular(offset, v, omega));
    }
    Ok(b.atan2(a))
}

/// Time derivative of [`heading_offset`] along a speed profile.
pub fn heading_offset_rate(
    offset: &FormationOffset,
    v: f64,
    omega: f64,
    dv: f64,
    domega: f64,
) -> Result<f64> {
    let (a, b) = offset.carried_velocity(v, omega);
    let denom = a * a + b * b;
    if denom.sqrt() <= SINGULAR_EPS {
        return Err(singular(offset, v, omega));
    }
    let a_dot = dv - domega * offset.y_bar;
    let b_dot = domega * offset.x_bar;
    Ok((a * b_dot - b * a_dot) / denom)
}

fn singular(offset: &FormationOffset, v: f64, omega: f64) -> Error {
    Error::SingularTask {
        x_bar: offset.x_bar,
        y_bar: offset.y_bar,
        v,
        omega,
    }
}

/// `ḡ = (θ̄, x̄, ȳ)`.
pub fn desired_config(offset: &FormationOffset, theta_bar: f64) -> Pose {
    Pose::from_parts(Rotation::from_angle(theta_bar), offset.vector())
}

/// `(Ad_{ḡ⁻¹} ξ_parent)^∨ + (θ̄̇, 0, 0)`, with the lateral component verified
/// to vanish and then zeroed.
pub fn adjoint_velocity(config: &Pose, parent_twist: &Twist, theta_bar_rate: f64) -> Result<Twist> {
    let mut t = config.inverse().adjoint(parent_twist);
    if !(t.vy.abs() < LATERAL_TOL) {
        return Err(Error::InfeasibleConfiguration { lateral: t.vy });
    }
    t.omega += theta_bar_rate;
    t.vy = 0.0;
    Ok(t)
}

/// `ḡᵢⱼ = ḡ₀ᵢ⁻¹ ḡ₀ⱼ`: the configuration of `j` seen from `i` when both sit on
/// their orbits around a common vehicle.
pub fn compose_offsets(parent_config: &Pose, child_config: &Pose) -> Pose {
    parent_config.relative(child_config)
}

/// `g̃ = g_parent · ḡ`.
pub fn adjoint_orbit_pose(parent_pose: &Pose, config: &Pose) -> Pose {
    parent_pose.compose(config)
}

/// Classifies the formation produced by root-frame offsets under a leader profile,
/// sampling the profile at every step of the horizon.
///
/// `resolved` holds each follower's offset resolved into the root frame.
pub fn classify(
    resolved: &[FormationOffset],
    profile: &LeaderProfile,
    horizon: f64,
    step: f64,
) -> Result<FormationClass> {
    let samples: Vec<(f64, f64)> = LeaderProfile::sample_times(horizon, step)
        .map(|t| (profile.v0(t), profile.omega0(t)))
        .collect();

    for &(v, omega) in &samples {
        for o in resolved {
            heading_offset(o, v, omega)?;
        }
    }

    if samples.iter().all(|&(_, omega)| omega == 0.0) {
        return Ok(FormationClass::TranslationalLine);
    }
    let all_zero_x = resolved.iter().all(|o| o.x_bar.abs() <= SINGULAR_EPS);
    let some_y = resolved.iter().any(|o| o.y_bar.abs() > SINGULAR_EPS);
    if all_zero_x && some_y {
        return Ok(FormationClass::Parallel);
    }
    if all_zero_x {
        warn!("all formation offsets are zero; treating the coincident formation as strict");
        return Ok(FormationClass::StrictRigidBody);
    }

    let (v_ref, w_ref) = samples[0];
    let constant_ratio = samples.iter().all(|&(v, omega)| {
        // v/ω = v_ref/ω_ref without dividing by a possibly vanishing ω.
        let scale = (v * w_ref)
            .abs()
            .max((v_ref * omega).abs())
            .max(f64::MIN_POSITIVE);
        (v * w_ref - v_ref * omega).abs() <= RATIO_RTOL * scale
    });
    Ok(if constant_ratio {
        FormationClass::StrictRigidBody
    } else {
        FormationClass::WeakRigidBody
    })
}
