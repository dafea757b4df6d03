//! Unicycle plant `ṗ = v R e₁`, `Ṙ = R ω̂` and the leader's speed profile.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se2::{exp_twist, Pose, Twist};

/// Default integration step, seconds.
pub const DEFAULT_STEP: f64 = 0.01;

/// Commanded forward speed and turn rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Input {
    pub v: f64,
    pub omega: f64,
}

impl Input {
    pub fn new(v: f64, omega: f64) -> Self {
        Input { v, omega }
    }

    pub fn twist(&self) -> Twist {
        Twist::unicycle(self.v, self.omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub pose: Pose,
    /// Input applied over the most recent step.
    pub last_input: Input,
}

impl VehicleState {
    pub fn new(pose: Pose) -> Self {
        VehicleState {
            pose,
            last_input: Input::default(),
        }
    }

    /// Advances the vehicle by `h` seconds with `input` held constant.
    ///
    /// Uses the SE(2) exponential, so the result is exact for the held input
    /// and the lateral velocity is identically zero.
    pub fn step(&self, input: Input, h: f64) -> Result<VehicleState> {
        if !(input.v.is_finite() && input.omega.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite input (v = {}, omega = {})",
                input.v, input.omega
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step must be positive, got {h}"
            )));
        }
        Ok(VehicleState {
            pose: self.pose.compose(&exp_twist(&input.twist(), h)),
            last_input: input,
        })
    }
}

/// Body-lateral component `e₂ᵀ Rᵀ ṗ` of a world-frame velocity.
pub fn lateral_velocity(pose: &Pose, world_velocity: &Vector2<f64>) -> f64 {
    pose.rotation.unrotate(world_velocity).y
}

/// Scalar time signal with an analytic derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Signal {
    Constant {
        value: f64,
    },
    /// `values[k]` holds on `[breaks[k-1], breaks[k])`; `values.len() == breaks.len() + 1`.
    PiecewiseConstant {
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
    /// `offset + amplitude · sin(frequency · t + phase)`, frequency in rad/s.
    Sinusoid {
        offset: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl Signal {
    pub fn constant(value: f64) -> Self {
        Signal::Constant { value }
    }

    pub fn sinusoid(offset: f64, amplitude: f64, frequency: f64, phase: f64) -> Self {
        Signal::Sinusoid {
            offset,
            amplitude,
            frequency,
            phase,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Signal::Constant { value } => *value,
            Signal::PiecewiseConstant { breaks, values } => {
                let k = breaks.partition_point(|&b| b <= t);
                values[k.min(values.len() - 1)]
            }
            Signal::Sinusoid {
                offset,
                amplitude,
                frequency,
                phase,
            } => offset + amplitude * (frequency * t + phase).sin(),
        }
    }

    /// Time derivative. Jumps of a piecewise-constant signal are ignored.
    pub fn rate(&self, t: f64) -> f64 {
        match self {
            Signal::Constant { .. } | Signal::PiecewiseConstant { .. } => 0.0,
            Signal::Sinusoid {
                amplitude,
                frequency,
                phase,
                ..
            } => amplitude * frequency * (frequency * t + phase).cos(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Signal::Constant { .. } => true,
            Signal::PiecewiseConstant { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
            Signal::Sinusoid {
                amplitude,
                frequency,
                ..
            } => *amplitude == 0.0 || *frequency == 0.0,
        }
    }

    pub(crate) fn check(&self, path: &str) -> Result<()> {
        match self {
            Signal::Constant { value } => finite(*value, &format!("{path}.value")),
            Signal::PiecewiseConstant { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return Err(Error::validation(
                        format!("{path}.values"),
                        format!(
                            "expected {} values for {} breaks, got {}",
                            breaks.len() + 1,
                            breaks.len(),
                            values.len()
                        ),
                    ));
                }
                if breaks.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::validation(
                        format!("{path}.breaks"),
                        "breaks must be strictly increasing",
                    ));
                }
                for (k, b) in breaks.iter().enumerate() {
                    finite(*b, &format!("{path}.breaks[{k}]"))?;
                }
                for (k, v) in values.iter().enumerate() {
                    finite(*v, &format!("{path}.values[{k}]"))?;
                }
                Ok(())
            }
            Signal::Sinusoid {
                offset,
                amplitude,
                frequency,
                phase,
            } => {
                finite(*offset, &format!("{path}.offset"))?;
                finite(*amplitude, &format!("{path}.amplitude"))?;
                finite(*frequency, &format!("{path}.frequency"))?;
                finite(*phase, &format!("{path}.phase"))
            }
        }
    }
}

fn finite(x: f64, path: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(path, "must be finite"))
    }
}

/// How the leader's speed derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Derivatives {
    #[default]
    Analytic,
    /// Central difference with half-width `step`, for tabulated signals.
    FiniteDifference { step: f64 },
}

/// Leader speeds and their first derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LeaderSample {
    pub v: f64,
    pub omega: f64,
    pub dv: f64,
    pub domega: f64,
}

/// Time-parameterized leader speeds `v₀(t)`, `ω₀(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderProfile {
    pub v: Signal,
    pub omega: Signal,
    #[serde(default)]
    pub derivatives: Derivatives,
}

impl LeaderProfile {
    pub fn new(v: Signal, omega: Signal) -> Self {
        LeaderProfile {
            v,
            omega,
            derivatives: Derivatives::Analytic,
        }
    }

    pub fn constant(v: f64, omega: f64) -> Self {
        LeaderProfile::new(Signal::constant(v), Signal::constant(omega))
    }

    pub fn v0(&self, t: f64) -> f64 {
        self.v.value(t)
    }

    pub fn omega0(&self, t: f64) -> f64 {
        self.omega.value(t)
    }

    pub fn dv0(&self, t: f64) -> f64 {
        match self.derivatives {
            Derivatives::Analytic => self.v.rate(t),
            Derivatives::FiniteDifference { step } => central(&self.v, t, step),
        }
    }

    pub fn domega0(&self, t: f64) -> f64 {
        match self.derivatives {
            Derivatives::Analytic => self.omega.rate(t),
            Derivatives::FiniteDifference { step } => central(&self.omega, t, step),
        }
    }

    pub fn sample(&self, t: f64) -> LeaderSample {
        LeaderSample {
            v: self.v0(t),
            omega: self.omega0(t),
            dv: self.dv0(t),
            domega: self.domega0(t),
        }
    }

    /// Times `k·step` for `k = 0..=floor(horizon/step)`.
    pub fn sample_times(horizon: f64, step: f64) -> impl Iterator<Item = f64> {
        let n = step_count(horizon, step);
        (0..=n).map(move |k| k as f64 * step)
    }

    /// Checks that all four signals are finite and `v₀ > 0` at every step of the horizon.
    pub fn check_profile(&self, horizon: f64, step: f64) -> Result<()> {
        self.v.check("leader.v")?;
        self.omega.check("leader.omega")?;
        if let Derivatives::FiniteDifference { step: fd } = self.derivatives {
            if !(fd > 0.0 && fd.is_finite()) {
                return Err(Error::validation(
                    "leader.derivatives.step",
                    "finite-difference step must be positive",
                ));
            }
        }
        for t in Self::sample_times(horizon, step) {
            let s = self.sample(t);
            if !(s.v.is_finite() && s.omega.is_finite() && s.dv.is_finite() && s.domega.is_finite())
            {
                return Err(Error::validation(
                    "leader",
                    format!("profile is not finite at t = {t}"),
                ));
            }
            if !(s.v > 0.0) {
                return Err(Error::validation(
                    "leader.v",
                    format!("leader speed must stay positive, v0({t}) = {}", s.v),
                ));
            }
        }
        Ok(())
    }

    /// Smallest sampled `v₀` over the horizon.
    pub fn min_speed(&self, horizon: f64, step: f64) -> f64 {
        Self::sample_times(horizon, step)
            .map(|t| self.v0(t))
            .fold(f64::INFINITY, f64::min)
    }
}

fn central(signal: &Signal, t: f64, h: f64) -> f64 {
    (signal.value(t + h) - signal.value(t - h)) / (2.0 * h)
}

/// Number of whole steps in the horizon.
pub fn step_count(horizon: f64, step: f64) -> usize {
    // Guard against 200 / 0.01 landing a hair below 20000.
    (horizon / step + 1e-9).floor() as usize
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn rk4(pose: (f64, f64, f64), v: f64, omega: f64, t: f64, n: usize) -> (f64, f64, f64) {
        let f = |s: (f64, f64, f64)| (v * s.2.cos(), v * s.2.sin(), omega);
        let h = t / n as f64;
        let mut s = pose;
        for _ in 0..n {
            let k1 = f(s);
            let k2 = f((
                s.0 + 0.5 * h * k1.0,
                s.1 + 0.5 * h * k1.1,
                s.2 + 0.5 * h * k1.2,
            ));
            let k3 = f((
                s.0 + 0.5 * h * k2.0,
                s.1 + 0.5 * h * k2.1,
                s.2 + 0.5 * h * k2.2,
            ));
            let k4 = f((s.0 + h * k3.0, s.1 + h * k3.1, s.2 + h * k3.2));
            s.0 += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            s.1 += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            s.2 += h / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2);
        }
        s
    }

    #[test]
    fn straight_step() {
        let s = VehicleState::default()
            .step(Input::new(1.0, 0.0), 1.0)
            .unwrap();
        assert_eq!(s.pose.theta(), 0.0);
        assert!((s.pose.x() - 1.0).abs() < 1e-15);
        assert_eq!(s.pose.y(), 0.0);
        assert_eq!(s.last_input, Input::new(1.0, 0.0));
    }

    #[test]
    fn circle_closes() {
        let (v, omega, h) = (0.06, 0.05, 0.01);
        let n = (2.0 * PI / omega / h).round() as usize;
        let h = 2.0 * PI / omega / n as f64;
        let mut s = VehicleState::default();
        let mut max_r: f64 = 0.0;
        for _ in 0..n {
            s = s.step(Input::new(v, omega), h).unwrap();
            max_r = max_r.max((s.pose.position - Vector2::new(0.0, v / omega)).norm());
        }
        assert!(s.pose.position.norm() < 1e-6);
        assert!(s.pose.theta().abs() < 1e-6);
        assert!((max_r - 1.2).abs() < 1e-9);
    }

    #[test]
    fn step_matches_rk4() {
        let start = Pose::new(0.4, -1.0, 2.0);
        for &(v, omega, h) in &[(0.06, 0.05, 1.0), (1.3, -2.1, 0.7), (0.5, 0.0, 0.3)] {
            let s = VehicleState::new(start)
                .step(Input::new(v, omega), h)
                .unwrap();
            let (x, y, th) = rk4((start.x(), start.y(), start.theta()), v, omega, h, 1000);
            assert!((s.pose.x() - x).abs() < 1e-8);
            assert!((s.pose.y() - y).abs() < 1e-8);
            assert!((s.pose.theta() - crate::se2::wrap_angle(th)).abs() < 1e-8);
        }
    }

    #[test]
    fn step_rejects_bad_input() {
        let s = VehicleState::default();
        assert!(s.step(Input::new(f64::NAN, 0.0), 0.1).is_err());
        assert!(s.step(Input::new(0.1, f64::INFINITY), 0.1).is_err());
        assert!(s.step(Input::new(0.1, 0.0), 0.0).is_err());
    }

    #[test]
    fn lateral_velocity_cases() {
        let p = Pose::identity();
        assert_eq!(lateral_velocity(&p, &Vector2::new(1.0, 0.0)), 0.0);
        assert_eq!(lateral_velocity(&p, &Vector2::new(0.0, 1.0)), 1.0);

        let h = 0.01;
        let input = Input::new(0.3, 0.8);
        let mut prev = VehicleState::new(Pose::new(1.0, 0.5, -0.5));
        let mut cur = prev.step(input, h).unwrap();
        for _ in 0..500 {
            let next = cur.step(input, h).unwrap();
            let vel = (next.pose.position - prev.pose.position) / (2.0 * h);
            assert!(lateral_velocity(&cur.pose, &vel).abs() < 1e-6);
            prev = cur;
            cur = next;
        }
    }

    #[test]
    fn signals_and_rates() {
        let s = Signal::sinusoid(0.05, 0.02, 0.3, 0.1);
        let h = 1e-6;
        for &t in &[0.0, 1.3, 7.7] {
            let fd = (s.value(t + h) - s.value(t - h)) / (2.0 * h);
            assert!((s.rate(t) - fd).abs() < 1e-9);
        }
        let pc = Signal::PiecewiseConstant {
            breaks: vec![1.0, 2.0],
            values: vec![0.1, 0.2, 0.3],
        };
        assert_eq!(pc.value(0.5), 0.1);
        assert_eq!(pc.value(1.0), 0.2);
        assert_eq!(pc.value(5.0), 0.3);
        assert_eq!(pc.rate(1.5), 0.0);
    }

    #[test]
    fn finite_difference_fallback() {
        let mut p = LeaderProfile::new(
            Signal::constant(0.06),
            Signal::sinusoid(0.05, 0.02, 0.3, 0.0),
        );
        let exact = p.domega0(2.0);
        p.derivatives = Derivatives::FiniteDifference { step: 1e-4 };
        assert!((p.domega0(2.0) - exact).abs() < 1e-9);
    }

    #[test]
    fn profile_checks() {
        assert!(LeaderProfile::constant(0.06, 0.05)
            .check_profile(10.0, 0.01)
            .is_ok());
        let bad = LeaderProfile::new(
            Signal::sinusoid(0.01, 0.02, 1.0, 0.0),
            Signal::constant(0.0),
        );
        assert!(matches!(
            bad.check_profile(10.0, 0.01),
            Err(Error::Validation { ref path, .. }) if path == "leader.v"
        ));
    }

    #[test]
    fn step_count_is_robust() {
        assert_eq!(step_count(200.0, 0.01), 20000);
        assert_eq!(step_count(1.0, 0.3), 3);
    }
}
