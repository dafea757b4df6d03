//! Scenario documents: parsing, validation and initial conditions.

use std::f64::consts::PI;
use std::path::Path;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{classify, heading_offset, FormationClass};
use crate::kinematics::{step_count, LeaderProfile, Signal, VehicleState, DEFAULT_STEP};
use crate::network::{validate_tree, DirectedTree, Feedforward, ValidatedTree};
use crate::se2::Pose;
use crate::tracking::{Saturation, TrackingGains};

pub const DEFAULT_HORIZON: f64 = 200.0;

/// Heading and position, as written in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseConfig {
    pub theta: f64,
    pub x: f64,
    pub y: f64,
}

impl PoseConfig {
    pub fn pose(&self) -> Pose {
        Pose::new(self.theta, self.x, self.y)
    }

    fn check(&self, path: &str) -> Result<()> {
        for (name, value) in [("theta", self.theta), ("x", self.x), ("y", self.y)] {
            if !value.is_finite() {
                return Err(Error::validation(
                    format!("{path}.{name}"),
                    "must be finite",
                ));
            }
        }
        Ok(())
    }
}

impl From<Pose> for PoseConfig {
    fn from(p: Pose) -> Self {
        PoseConfig {
            theta: p.theta(),
            x: p.x(),
            y: p.y(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderConfig {
    #[serde(default)]
    pub initial: PoseConfig,
    pub v: Signal,
    pub omega: Signal,
    #[serde(default)]
    pub derivatives: crate::kinematics::Derivatives,
}

impl LeaderConfig {
    pub fn profile(&self) -> LeaderProfile {
        LeaderProfile {
            v: self.v.clone(),
            omega: self.omega.clone(),
            derivatives: self.derivatives,
        }
    }
}

/// Where followers start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Poses listed in `vehicles`.
    #[default]
    Explicit,
    /// On their adjoint orbits at `t = 0`, i.e. zero tracking error.
    OnOrbit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Guards {
    /// Require the gains to guarantee `v > 0` and reject anti-synchronized tasks.
    #[serde(default)]
    pub strict_forward: bool,
    /// Hold the last command when the virtual control vanishes instead of aborting.
    #[serde(default = "yes")]
    pub hold_on_degenerate: bool,
}

fn yes() -> bool {
    true
}

impl Default for Guards {
    fn default() -> Self {
        Guards {
            strict_forward: false,
            hold_on_degenerate: true,
        }
    }
}

/// Random displacement of every follower's initial pose, drawn from `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    /// Maximum position displacement, m (uniform on the disk).
    pub position: f64,
    /// Maximum heading displacement, rad (uniform).
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Error level (m and rad) below which a follower counts as converged.
    #[serde(default = "default_threshold")]
    pub convergence_threshold: f64,
    /// Trailing fraction of the horizon treated as steady state.
    #[serde(default = "default_window")]
    pub steady_window: f64,
}

fn default_threshold() -> f64 {
    1e-3
}

fn default_window() -> f64 {
    0.1
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            convergence_threshold: default_threshold(),
            steady_window: default_window(),
        }
    }
}

fn default_horizon() -> f64 {
    DEFAULT_HORIZON
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

/// A scenario as written, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    pub leader: LeaderConfig,
    #[serde(default)]
    pub placement: Placement,
    /// Initial poses of vehicles `1..n`, in index order.
    #[serde(default)]
    pub vehicles: Vec<PoseConfig>,
    pub tree: DirectedTree,
    pub gains: TrackingGains,
    #[serde(default)]
    pub saturation: Saturation,
    pub objective: FormationClass,
    #[serde(default)]
    pub guards: Guards,
    #[serde(default)]
    pub feedforward: Feedforward,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial_perturbation: Option<Perturbation>,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

/// A scenario that passed validation, with its derived data.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub tree: ValidatedTree,
    pub class: FormationClass,
    pub initial: Vec<VehicleState>,
}

impl Scenario {
    pub fn profile(&self) -> LeaderProfile {
        self.config.leader.profile()
    }

    pub fn n_vehicles(&self) -> usize {
        self.tree.len()
    }
}

/// Parses a scenario document. Unknown keys are rejected and errors carry the
/// path of the offending field.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::validation(path, e.into_inner().to_string())
    })
}

/// Parses and validates.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    parse_scenario(text)?.validate()
}

pub fn read_scenario_file(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text)
}

impl ScenarioConfig {
    /// Runs every check in order and builds the initial states.
    pub fn validate(self) -> Result<Scenario> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::validation("step", "must be positive"));
        }
        if !(self.horizon >= self.step && self.horizon.is_finite()) {
            return Err(Error::validation("horizon", "must be at least one step"));
        }
        let m = &self.metrics;
        if !(m.convergence_threshold > 0.0) {
            return Err(Error::validation(
                "metrics.convergence_threshold",
                "must be positive",
            ));
        }
        if !(m.steady_window > 0.0 && m.steady_window <= 1.0) {
            return Err(Error::validation(
                "metrics.steady_window",
                "must lie in (0, 1]",
            ));
        }
        self.gains.check()?;
        self.leader.initial.check("leader.initial")?;

        let tree = validate_tree(&self.tree)?;
        let n = tree.len();
        match self.placement {
            Placement::Explicit if self.vehicles.len() + 1 != n => {
                return Err(Error::validation(
                    "vehicles",
                    format!(
                        "tree has {n} vehicles, so {} follower poses are needed, got {}",
                        n - 1,
                        self.vehicles.len()
                    ),
                ));
            }
            Placement::OnOrbit if !self.vehicles.is_empty() => {
                return Err(Error::validation(
                    "vehicles",
                    "must be empty when placement is on_orbit",
                ));
            }
            _ => {}
        }
        for (k, p) in self.vehicles.iter().enumerate() {
            p.check(&format!("vehicles[{k}]"))?;
        }
        for (k, e) in self.tree.edges.iter().enumerate() {
            if !(e.offset.x_bar.is_finite() && e.offset.y_bar.is_finite()) {
                return Err(Error::validation(
                    format!("tree.edges[{k}].offset"),
                    "must be finite",
                ));
            }
        }

        let profile = self.leader.profile();
        profile.check_profile(self.horizon, self.step)?;

        // Every edge must stay away from the singular task along the whole horizon.
        let n_steps = step_count(self.horizon, self.step);
        for k in 0..=n_steps {
            let t = k as f64 * self.step;
            let resolved = tree.resolve(profile.v0(t), profile.omega0(t))?;
            if self.guards.strict_forward {
                for &node in &tree.order()[1..] {
                    let p = tree.parent(node).expect("follower has a parent");
                    let tw = resolved[p].1;
                    let theta_bar = heading_offset(&tree.offset(node), tw.vx, tw.omega)?;
                    if theta_bar.abs() > PI - 1e-12 {
                        return Err(Error::validation(
                            "tree",
                            format!(
                                "vehicle {node} would be anti-synchronized with vehicle {p} at t = {t}"
                            ),
                        ));
                    }
                }
            }
        }

        let resolved = tree.resolved_offsets(profile.v0(0.0), profile.omega0(0.0))?;
        let class = classify(&resolved[1..], &profile, self.horizon, self.step)?;
        if !class.satisfies(self.objective) {
            let reason = if self.objective == FormationClass::StrictRigidBody {
                "strict rigid-body motion needs a constant leader speed ratio v0/omega0".to_string()
            } else {
                format!("offsets and leader profile produce a {class} formation")
            };
            return Err(Error::validation(
                "objective",
                format!("{} is not achievable: {reason}", self.objective),
            ));
        }

        if self.guards.strict_forward {
            let v_min = profile.min_speed(self.horizon, self.step);
            let levels = tree.max_depth().max(1) as f64;
            if !(levels * self.gains.position_authority() < v_min) {
                return Err(Error::validation(
                    "gains.k1",
                    format!(
                        "forward-motion guard fails: {levels} level(s) x k1 x sqrt(2) = {} is not below min v0 = {v_min}",
                        levels * self.gains.position_authority()
                    ),
                ));
            }
        } else if !self
            .gains
            .guarantees_forward_motion(profile.min_speed(self.horizon, self.step))
        {
            warn!("gains do not guarantee forward motion; relying on the hold strategy");
        }

        let initial = self.initial_states(&tree, &profile)?;
        debug!("scenario valid: {n} vehicles, class {class}");
        Ok(Scenario {
            config: self,
            tree,
            class,
            initial,
        })
    }

    fn initial_states(
        &self,
        tree: &ValidatedTree,
        profile: &LeaderProfile,
    ) -> Result<Vec<VehicleState>> {
        let g0 = self.leader.initial.pose();
        let mut poses = vec![g0];
        match self.placement {
            Placement::Explicit => poses.extend(self.vehicles.iter().map(PoseConfig::pose)),
            Placement::OnOrbit => {
                let resolved = tree.resolve(profile.v0(0.0), profile.omega0(0.0))?;
                poses.extend(resolved[1..].iter().map(|(g, _)| g0.compose(g)));
            }
        }
        if let Some(pert) = self.initial_perturbation {
            if !(pert.position >= 0.0 && pert.heading >= 0.0) {
                return Err(Error::validation(
                    "initial_perturbation",
                    "bounds must be non-negative",
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            for pose in poses.iter_mut().skip(1) {
                let r = pert.position * rng.random::<f64>().sqrt();
                let phi = rng.random_range(-PI..PI);
                let dth = if pert.heading > 0.0 {
                    rng.random_range(-pert.heading..=pert.heading)
                } else {
                    0.0
                };
                *pose = Pose::new(
                    pose.theta() + dth,
                    pose.x() + r * phi.cos(),
                    pose.y() + r * phi.sin(),
                );
            }
        }
        Ok(poses.into_iter().map(VehicleState::new).collect())
    }
}
