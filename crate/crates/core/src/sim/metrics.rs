//! Aggregate figures of a run.

use serde::Serialize;

use crate::geometry::FormationClass;

use super::run::TrajectoryLog;
use super::scenario::{MetricsConfig, PoseConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleSummary {
    pub id: usize,
    /// Mean commanded speed over the steady window.
    pub steady_v: f64,
    pub steady_omega: f64,
    pub min_v: f64,
    /// Largest `‖p‖` over the steady window.
    pub steady_max_err_p: f64,
    pub final_pose: PoseConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSummary {
    pub i: usize,
    pub j: usize,
    /// Mean distance over the steady window.
    pub steady_distance: f64,
    /// `max d - min d` over the steady window.
    pub distance_variation: f64,
    pub steady_px: f64,
    pub steady_py: f64,
    pub steady_theta: f64,
    /// Largest range of `px`, `py` over the steady window.
    pub offset_variation: f64,
}

/// Field order is the key order of the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub class: FormationClass,
    pub horizon: f64,
    pub step: f64,
    pub rows: usize,
    pub steady_window_start: f64,
    pub min_v: f64,
    pub max_abs_omega: f64,
    /// First time after which every follower error stays below the threshold.
    pub convergence_time: Option<f64>,
    /// Fraction of steps over which the summed follower Lyapunov value did not increase.
    pub lyapunov_monotone_fraction: f64,
    pub held_steps: usize,
    pub vehicles: Vec<VehicleSummary>,
    pub pairs: Vec<PairSummary>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn range(xs: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    });
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

pub fn metrics(log: &TrajectoryLog, cfg: &MetricsConfig) -> Summary {
    let frames = &log.frames;
    let rows = frames.len();
    let t_end = frames.last().map_or(0.0, |f| f.t);
    let window_start = t_end - cfg.steady_window * log.horizon;
    let first = frames
        .partition_point(|f| f.t < window_start - 1e-9)
        .min(rows.saturating_sub(1));
    let steady = &frames[first..];

    let all = || frames.iter().flat_map(|f| f.vehicles.iter());
    let min_v = all().map(|r| r.v).fold(f64::INFINITY, f64::min);
    let max_abs_omega = all().map(|r| r.omega.abs()).fold(0.0, f64::max);
    let held_steps = frames
        .iter()
        .filter(|f| f.vehicles.iter().any(|r| r.held))
        .count();

    let thr = cfg.convergence_threshold;
    let converged = |k: usize| {
        frames[k]
            .vehicles
            .iter()
            .all(|r| r.err_p < thr && r.err_theta.abs() < thr)
    };
    let convergence_time = match (0..rows).rev().find(|&k| !converged(k)) {
        None => Some(0.0),
        Some(k) if k + 1 < rows => Some(frames[k + 1].t),
        Some(_) => None,
    };

    let total_v: Vec<f64> = frames
        .iter()
        .map(|f| f.vehicles.iter().map(|r| r.lyap).sum())
        .collect();
    let lyapunov_monotone_fraction = if total_v.len() < 2 {
        1.0
    } else {
        let ok = total_v.windows(2).filter(|w| w[1] <= w[0]).count();
        ok as f64 / (total_v.len() - 1) as f64
    };

    let vehicles = (0..log.n_vehicles)
        .map(|id| VehicleSummary {
            id,
            steady_v: mean(steady.iter().map(|f| f.vehicles[id].v)),
            steady_omega: mean(steady.iter().map(|f| f.vehicles[id].omega)),
            min_v: frames
                .iter()
                .map(|f| f.vehicles[id].v)
                .fold(f64::INFINITY, f64::min),
            steady_max_err_p: steady
                .iter()
                .map(|f| f.vehicles[id].err_p)
                .fold(0.0, f64::max),
            final_pose: frames
                .last()
                .map(|f| PoseConfig::from(f.vehicles[id].pose()))
                .unwrap_or_default(),
        })
        .collect();

    let pairs = log
        .pair_indices()
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| PairSummary {
            i,
            j,
            steady_distance: mean(steady.iter().map(|f| f.pairs[k].d)),
            distance_variation: range(steady.iter().map(|f| f.pairs[k].d)),
            steady_px: mean(steady.iter().map(|f| f.pairs[k].px)),
            steady_py: mean(steady.iter().map(|f| f.pairs[k].py)),
            steady_theta: mean(steady.iter().map(|f| f.pairs[k].theta)),
            offset_variation: range(steady.iter().map(|f| f.pairs[k].px))
                .max(range(steady.iter().map(|f| f.pairs[k].py))),
        })
        .collect();

    Summary {
        class: log.class,
        horizon: log.horizon,
        step: log.step,
        rows,
        steady_window_start: steady.first().map_or(0.0, |f| f.t),
        min_v,
        max_abs_omega,
        convergence_time,
        lyapunov_monotone_fraction,
        held_steps,
        vehicles,
        pairs,
    }
}
