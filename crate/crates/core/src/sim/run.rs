//! Closed-loop execution.

use log::info;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::FormationClass;
use crate::kinematics::{step_count, VehicleState};
use crate::network::Formation;
use crate::se2::{wrap_angle, Pose};

use super::scenario::Scenario;

/// One vehicle at one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VehicleRecord {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    /// Commanded speeds applied over the following step.
    pub v: f64,
    pub omega: f64,
    /// `‖p‖` of the tracking error (zero for the leader).
    pub err_p: f64,
    pub err_theta: f64,
    pub lyap: f64,
    /// Whether the command came from the hold latch.
    pub held: bool,
}

impl VehicleRecord {
    pub fn pose(&self) -> Pose {
        Pose::new(self.theta, self.x, self.y)
    }
}

/// Relative quantities of vehicles `i < j` at one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    pub d: f64,
    /// `R_iᵀ(p_j - p_i)`.
    pub px: f64,
    pub py: f64,
    /// `θ_j - θ_i`, wrapped.
    pub theta: f64,
}

impl PairRecord {
    pub fn between(i: usize, a: &Pose, j: usize, b: &Pose) -> Self {
        let rel = a.relative(b);
        PairRecord {
            i,
            j,
            d: (b.position - a.position).norm(),
            px: rel.x(),
            py: rel.y(),
            theta: wrap_angle(b.theta() - a.theta()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub vehicles: Vec<VehicleRecord>,
    pub pairs: Vec<PairRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub class: FormationClass,
    pub horizon: f64,
    pub step: f64,
    pub n_vehicles: usize,
    /// Parent of each vehicle, `None` for the leader.
    pub parents: Vec<Option<usize>>,
    pub frames: Vec<Frame>,
}

impl TrajectoryLog {
    pub fn final_poses(&self) -> Vec<Pose> {
        self.frames
            .last()
            .map(|f| f.vehicles.iter().map(VehicleRecord::pose).collect())
            .unwrap_or_default()
    }

    /// Index pairs `(i, j)`, `i < j`, in column order.
    pub fn pair_indices(&self) -> Vec<(usize, usize)> {
        pair_indices(self.n_vehicles)
    }
}

pub fn pair_indices(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

/// Simulates the scenario from its initial states over the whole horizon.
///
/// The leader is driven open loop by its profile and followers by the tree
/// controllers; inputs are held constant over each step and the plant is
/// advanced with the exact exponential.
pub fn run(scenario: &Scenario) -> Result<TrajectoryLog> {
    let cfg = &scenario.config;
    let profile = scenario.profile();
    let n = scenario.n_vehicles();
    let n_steps = step_count(cfg.horizon, cfg.step);
    let mut formation = Formation::new(
        scenario.tree.clone(),
        cfg.gains,
        cfg.saturation,
        cfg.guards.hold_on_degenerate,
        cfg.feedforward,
        cfg.step,
    );
    let pairs = pair_indices(n);
    let mut states: Vec<VehicleState> = scenario.initial.clone();
    let mut frames = Vec::with_capacity(n_steps + 1);

    for k in 0..=n_steps {
        let t = k as f64 * cfg.step;
        let abort = |e: Error| Error::RuntimeAbort {
            step: k,
            time: t,
            source: Box::new(e),
        };
        let commands = formation
            .command(&states, &profile.sample(t))
            .map_err(abort)?;

        let vehicles = states
            .iter()
            .zip(&commands)
            .map(|(s, c)| {
                let (err_p, err_theta, lyap, held) = match &c.follower {
                    Some(f) => (
                        f.command.error.p01.norm(),
                        f.command.error.theta01,
                        f.command.error.lyapunov,
                        f.command.held,
                    ),
                    None => (0.0, 0.0, 0.0, false),
                };
                VehicleRecord {
                    x: s.pose.x(),
                    y: s.pose.y(),
                    theta: s.pose.theta(),
                    v: c.input.v,
                    omega: c.input.omega,
                    err_p,
                    err_theta,
                    lyap,
                    held,
                }
            })
            .collect();
        let pair_records = pairs
            .iter()
            .map(|&(i, j)| PairRecord::between(i, &states[i].pose, j, &states[j].pose))
            .collect();
        frames.push(Frame {
            t,
            vehicles,
            pairs: pair_records,
        });

        if k < n_steps {
            states = states
                .iter()
                .zip(&commands)
                .map(|(s, c)| s.step(c.input, cfg.step))
                .collect::<Result<_>>()
                .map_err(abort)?;
        }
    }
    info!("ran {} steps for {n} vehicles", n_steps);

    Ok(TrajectoryLog {
        class: scenario.class,
        horizon: cfg.horizon,
        step: cfg.step,
        n_vehicles: n,
        parents: (0..n).map(|v| scenario.tree.parent(v)).collect(),
        frames,
    })
}
