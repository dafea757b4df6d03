//! Two-stage forward-motion tracking.
//!
//! Stage one shapes a virtual velocity `u = -k₁σ(p_err) + v_ref R_ref e₁`; the
//! commanded speed is `‖u‖` and the intermediate attitude `𝓡` is the rotation
//! whose first column is `u/‖u‖`. Stage two steers the heading onto `𝓡` with
//! `ω = -k₂σ((R₀₁ - R₀₁ᵀ)^∨) + ϖ`, where `R₀₁ = 𝓡ᵀR` and `ϖ` is the angular
//! rate of `𝓡`.

use log::warn;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{Input, VehicleState};
use crate::se2::{quarter_turn, wrap_angle, Pose, Rotation};

/// `‖u‖` at or below this is treated as a degenerate direction.
pub const DEGENERATE_EPS: f64 = 1e-9;

/// Bounded, sign-preserving shaping function, applied componentwise to vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Saturation {
    #[default]
    Tanh,
    /// `x / √(1 + x²)`
    Algebraic,
}

impl Saturation {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Saturation::Tanh => x.tanh(),
            Saturation::Algebraic => x / (1.0 + x * x).sqrt(),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Saturation::Tanh => {
                let c = x.cosh();
                1.0 / (c * c)
            }
            Saturation::Algebraic => (1.0 + x * x).powf(-1.5),
        }
    }

    pub fn apply_vec(&self, v: &Vector2<f64>) -> Vector2<f64> {
        v.map(|x| self.apply(x))
    }

    /// Diagonal Jacobian applied to `w`: `Dσ(v) · w`.
    pub fn derivative_vec(&self, v: &Vector2<f64>, w: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new(self.derivative(v.x) * w.x, self.derivative(v.y) * w.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingGains {
    /// Position gain, m/s.
    pub k1: f64,
    /// Heading gain, rad/s.
    pub k2: f64,
}

impl TrackingGains {
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        let gains = TrackingGains { k1, k2 };
        gains.check()?;
        Ok(gains)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(Error::validation("gains.k1", "must be positive"));
        }
        if !(self.k2 > 0.0 && self.k2.is_finite()) {
            return Err(Error::validation("gains.k2", "must be positive"));
        }
        Ok(())
    }

    /// Upper bound on `‖k₁σ(p)‖` with componentwise saturation.
    pub fn position_authority(&self) -> f64 {
        self.k1 * std::f64::consts::SQRT_2
    }

    /// Forward-motion guard: `‖u‖ ≥ v_min - k₁√2 > 0` for a direct child of a
    /// target whose speed never drops below `v_min`.
    pub fn guarantees_forward_motion(&self, v_min: f64) -> bool {
        self.position_authority() < v_min
    }
}

/// What a vehicle tracks.
///
/// `position`/`velocity` describe the tracked point. `heading`, `speed`,
/// `speed_rate` and `turn_rate` describe the feed-forward velocity
/// `speed · heading · e₁` and its time derivative. For a unicycle target the
/// two coincide; see [`Reference::unicycle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
    pub heading: Rotation,
    pub speed: f64,
    pub speed_rate: f64,
    pub turn_rate: f64,
}

impl Reference {
    pub fn unicycle(pose: &Pose, v: f64, omega: f64, dv: f64) -> Self {
        Reference {
            position: pose.position,
            velocity: v * pose.rotation.x_axis(),
            heading: pose.rotation,
            speed: v,
            speed_rate: dv,
            turn_rate: omega,
        }
    }

    pub fn feedforward(&self) -> Vector2<f64> {
        self.speed * self.heading.x_axis()
    }

    /// `d/dt (speed · heading · e₁)`.
    pub fn feedforward_rate(&self) -> Vector2<f64> {
        self.speed_rate * self.heading.x_axis()
            + self.speed * self.turn_rate * self.heading.y_axis()
    }
}

/// Tracking diagnostics at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackingError {
    /// `p_self - p_ref`.
    pub p01: Vector2<f64>,
    /// `𝓡ᵀ R_self`.
    pub r01: Rotation,
    pub theta01: f64,
    pub lyapunov: f64,
    /// `Δ = v (R_self - 𝓡) e₁`, the coupling the heading error injects into
    /// the position loop.
    pub perturbation: Vector2<f64>,
}

/// `u = -k₁σ(p_self - p_ref) + v_ref R_ref e₁`.
pub fn virtual_control(
    p_self: &Vector2<f64>,
    reference: &Reference,
    gains: &TrackingGains,
    sat: Saturation,
) -> Vector2<f64> {
    let p01 = p_self - reference.position;
    -gains.k1 * sat.apply_vec(&p01) + reference.feedforward()
}

/// `v = ‖u‖`.
pub fn speed_from_virtual(u: &Vector2<f64>) -> Result<f64> {
    let norm = u.norm();
    if norm <= DEGENERATE_EPS {
        return Err(Error::DegenerateDirection { norm });
    }
    Ok(norm)
}

/// Rotation with first column `u/‖u‖` and second column `J u/‖u‖`.
pub fn intermediate_attitude(u: &Vector2<f64>) -> Result<Rotation> {
    speed_from_virtual(u)?;
    Ok(Rotation::from_direction(u))
}

/// `u̇ = -k₁ Dσ(p₀₁) ṗ₀₁ + d/dt(v_ref R_ref e₁)` with `ṗ₀₁ = v_self - v_ref`.
pub fn virtual_control_rate(
    p01: &Vector2<f64>,
    v_self_world: &Vector2<f64>,
    reference: &Reference,
    gains: &TrackingGains,
    sat: Saturation,
) -> Vector2<f64> {
    let p01_dot = v_self_world - reference.velocity;
    -gains.k1 * sat.derivative_vec(p01, &p01_dot) + reference.feedforward_rate()
}

/// Angular rate of the intermediate attitude: `(𝓡ᵀ𝓡̇)^∨ = (J u)ᵀ u̇ / ‖u‖²`.
pub fn intermediate_rate(u: &Vector2<f64>, u_dot: &Vector2<f64>) -> Result<f64> {
    let norm = speed_from_virtual(u)?;
    Ok(quarter_turn(u).dot(u_dot) / (norm * norm))
}

/// `ω = -k₂σ(2 sin θ₀₁) + ϖ` with `θ₀₁` the angle of `𝓡ᵀR_self`.
pub fn heading_control(
    r_self: &Rotation,
    r_intermediate: &Rotation,
    varpi: f64,
    gains: &TrackingGains,
    sat: Saturation,
) -> f64 {
    let r01 = r_intermediate.inverse() * *r_self;
    -gains.k2 * sat.apply(2.0 * r01.sin()) + varpi
}

/// `V = ½‖p₀₁‖² + tr(I₂ - R₀₁) = ½‖p₀₁‖² + 2(1 - cos θ₀₁)`.
pub fn lyapunov_value(err: &TrackingError) -> f64 {
    lyapunov(&err.p01, err.theta01)
}

fn lyapunov(p01: &Vector2<f64>, theta01: f64) -> f64 {
    0.5 * p01.norm_squared() + 2.0 * (1.0 - theta01.cos())
}

/// Controller output for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub input: Input,
    /// `d‖u‖/dt`, reported so children in a formation tree get an analytic speed rate.
    pub dv: f64,
    pub varpi: f64,
    pub attitude: Rotation,
    /// True when the degenerate-direction hold was used.
    pub held: bool,
    pub error: TrackingError,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Latch {
    attitude: Rotation,
    v: f64,
}

/// Tracking controller for one vehicle. Holds the last good intermediate
/// attitude and speed for the degenerate-direction fallback.
#[derive(Debug, Clone)]
pub struct TrackingController {
    pub gains: TrackingGains,
    pub saturation: Saturation,
    /// Hold the previous `𝓡` and `v` when `‖u‖ ≤ ε`; otherwise fail.
    pub hold_on_degenerate: bool,
    latch: Option<Latch>,
    started: bool,
}

impl TrackingController {
    pub fn new(gains: TrackingGains, saturation: Saturation, hold_on_degenerate: bool) -> Self {
        TrackingController {
            gains,
            saturation,
            hold_on_degenerate,
            latch: None,
            started: false,
        }
    }

    pub fn compute(&mut self, state: &VehicleState, reference: &Reference) -> Result<Command> {
        let pose = &state.pose;
        let sat = self.saturation;
        let p01 = pose.position - reference.position;
        let u = virtual_control(&pose.position, reference, &self.gains, sat);

        let (v, attitude, varpi, dv, held) = match speed_from_virtual(&u) {
            Ok(v) => {
                let attitude = Rotation::from_direction(&u);
                let v_self = v * pose.rotation.x_axis();
                let u_dot = virtual_control_rate(&p01, &v_self, reference, &self.gains, sat);
                let varpi = quarter_turn(&u).dot(&u_dot) / (v * v);
                let dv = u.dot(&u_dot) / v;
                (v, attitude, varpi, dv, false)
            }
            Err(e) if !self.hold_on_degenerate => return Err(e),
            Err(_) => {
                let latch = self.latch.unwrap_or(Latch {
                    attitude: reference.heading,
                    v: reference.speed,
                });
                (latch.v, latch.attitude, 0.0, 0.0, true)
            }
        };

        let omega = heading_control(&pose.rotation, &attitude, varpi, &self.gains, sat);
        let r01 = attitude.inverse() * pose.rotation;
        let theta01 = wrap_angle(pose.theta() - attitude.angle());
        if !self.started {
            self.started = true;
            if (theta01.abs() - std::f64::consts::PI).abs() < 1e-12 {
                warn!("initial heading error is π (tr(R01) = -2); convergence is not guaranteed");
            }
        }
        self.latch = Some(Latch { attitude, v });

        let error = TrackingError {
            p01,
            r01,
            theta01,
            lyapunov: lyapunov(&p01, theta01),
            perturbation: v * (pose.rotation.x_axis() - attitude.x_axis()),
        };
        Ok(Command {
            input: Input::new(v, omega),
            dv,
            varpi,
            attitude,
            held,
            error,
        })
    }
}

/// The closed-loop error system with the heading coupling removed:
/// `ṗ = -k₁σ(p)`, `θ̇ = -k₂σ(2 sin θ)`.
#[derive(Debug, Clone, Copy)]
pub struct ErrorSystem {
    pub gains: TrackingGains,
    pub saturation: Saturation,
}

impl ErrorSystem {
    pub fn rates(&self, p: &Vector2<f64>, theta: f64) -> (Vector2<f64>, f64) {
        (
            -self.gains.k1 * self.saturation.apply_vec(p),
            -self.gains.k2 * self.saturation.apply(2.0 * theta.sin()),
        )
    }

    /// One classical Runge–Kutta step.
    pub fn step(&self, p: &Vector2<f64>, theta: f64, h: f64) -> (Vector2<f64>, f64) {
        let (k1p, k1t) = self.rates(p, theta);
        let (k2p, k2t) = self.rates(&(p + 0.5 * h * k1p), theta + 0.5 * h * k1t);
        let (k3p, k3t) = self.rates(&(p + 0.5 * h * k2p), theta + 0.5 * h * k2t);
        let (k4p, k4t) = self.rates(&(p + h * k3p), theta + h * k3t);
        (
            p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
            theta + h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t),
        )
    }

    /// Lyapunov values at `t = 0, h, 2h, …, ⌊T/h⌋h`.
    pub fn lyapunov_trace(&self, p0: Vector2<f64>, theta0: f64, h: f64, horizon: f64) -> Vec<f64> {
        let n = crate::kinematics::step_count(horizon, h);
        let mut out = Vec::with_capacity(n + 1);
        let (mut p, mut theta) = (p0, theta0);
        out.push(lyapunov(&p, theta));
        for _ in 0..n {
            (p, theta) = self.step(&p, theta, h);
            out.push(lyapunov(&p, theta));
        }
        out
    }
}
