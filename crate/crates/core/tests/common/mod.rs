#![allow(dead_code)]

use serde_json::{json, Value};

use se2form::sim::{self, Scenario, TrajectoryLog};

pub const BUNDLED_SCENARIO: &str = include_str!("../../scenarios/paper_sec5.json");

/// Root of `-(v - ω ȳ) sin a + ω x̄ cos a = 0` on `[lo, hi]` by bisection.
pub fn bisect_heading(x_bar: f64, y_bar: f64, v: f64, w: f64, mut lo: f64, mut hi: f64) -> f64 {
    let f = |a: f64| -(v - w * y_bar) * a.sin() + w * x_bar * a.cos();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn bundled_value() -> Value {
    serde_json::from_str(BUNDLED_SCENARIO).unwrap()
}

pub fn scenario(v: &Value) -> Scenario {
    sim::load_scenario(&v.to_string()).unwrap()
}

pub fn run_value(v: &Value) -> TrajectoryLog {
    sim::run(&scenario(v)).unwrap()
}

/// Leader with constant speeds at the origin, followers on their orbits.
pub fn on_orbit(v0: f64, w0: f64, edges: Value, n: usize, objective: &str) -> Value {
    json!({
        "horizon": 60.0,
        "step": 0.01,
        "leader": {
            "v": { "kind": "constant", "value": v0 },
            "omega": { "kind": "constant", "value": w0 }
        },
        "placement": "on_orbit",
        "tree": { "n_vehicles": n, "edges": edges },
        "gains": { "k1": 0.3, "k2": 0.3 },
        "objective": objective
    })
}

pub fn chain_edges() -> Value {
    json!([
        { "parent": 0, "child": 1, "offset": [-0.1, -0.1] },
        { "parent": 1, "child": 2, "offset": [0.0, 0.2] }
    ])
}

/// Largest `max - min` of the values returned by `f` over frames in `[t0, ∞)`.
pub fn variation(log: &TrajectoryLog, t0: f64, f: impl Fn(&sim::Frame) -> f64) -> f64 {
    let vals: Vec<f64> = log.frames.iter().filter(|fr| fr.t >= t0).map(f).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}
