//! Files written from a run: CSV trajectory, SVG panels, JSON summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

use super::format::fmt_g9;
use super::metrics::Summary;
use super::run::TrajectoryLog;
use super::svg::{Chart, Outline, Series};

pub const CSV_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Fixed leading CSV columns; pair columns follow.
pub const CSV_COLUMNS: [&str; 10] = [
    "t",
    "vid",
    "x",
    "y",
    "theta",
    "v",
    "omega",
    "err_p",
    "err_theta",
    "lyap",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExportFormat {
    Csv,
    Svg,
    Json,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(ExportFormat::Csv),
            "svg" => Ok(ExportFormat::Svg),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::InvalidArgument(format!(
                "unknown export format `{other}` (expected csv, svg or json)"
            ))),
        }
    }
}

/// Parses a comma-separated list such as `csv,svg,json`.
pub fn parse_formats(list: &str) -> Result<Vec<ExportFormat>> {
    let mut out = Vec::new();
    for item in list.split(',').filter(|s| !s.trim().is_empty()) {
        let f: ExportFormat = item.parse()?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    Ok(out)
}

pub fn csv_header(n_vehicles: usize) -> String {
    let mut cols: Vec<String> = CSV_COLUMNS.iter().map(|s| s.to_string()).collect();
    for (i, j) in super::run::pair_indices(n_vehicles) {
        cols.push(format!("d_{i}_{j}"));
        cols.push(format!("px_{i}_{j}"));
        cols.push(format!("py_{i}_{j}"));
    }
    cols.join(",")
}

/// One row per sample and vehicle. Pair columns repeat the sample's values on
/// every vehicle row.
pub fn to_csv(log: &TrajectoryLog) -> String {
    let mut s = String::with_capacity(log.frames.len() * log.n_vehicles * 160);
    s.push_str(&csv_header(log.n_vehicles));
    s.push('\n');
    for f in &log.frames {
        let mut pairs = String::new();
        for p in &f.pairs {
            let _ = write!(pairs, ",{},{},{}", fmt_g9(p.d), fmt_g9(p.px), fmt_g9(p.py));
        }
        for (vid, r) in f.vehicles.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{vid},{},{},{},{},{},{},{},{}{pairs}",
                fmt_g9(f.t),
                fmt_g9(r.x),
                fmt_g9(r.y),
                fmt_g9(r.theta),
                fmt_g9(r.v),
                fmt_g9(r.omega),
                fmt_g9(r.err_p),
                fmt_g9(r.err_theta),
                fmt_g9(r.lyap),
            );
        }
    }
    s
}

pub fn summary_json(summary: &Summary) -> Result<String> {
    let mut s = serde_json::to_string_pretty(summary)?;
    s.push('\n');
    Ok(s)
}

/// The five plot panels as `(file name, document)`.
pub fn svg_panels(log: &TrajectoryLog) -> Vec<(&'static str, String)> {
    let time_chart = |title: &str, y_label: &str, series: Vec<Series>| {
        let mut c = Chart::new(title, "t (s)", y_label);
        c.series = series;
        c.render()
    };
    let per_pair = |f: &dyn Fn(&super::run::PairRecord) -> f64| -> Vec<Series> {
        log.pair_indices()
            .iter()
            .enumerate()
            .map(|(k, (i, j))| Series {
                label: format!("d{i}{j}"),
                points: log
                    .frames
                    .iter()
                    .map(|fr| (fr.t, f(&fr.pairs[k])))
                    .collect(),
            })
            .collect()
    };
    let per_vehicle = |name: &str, f: &dyn Fn(&super::run::VehicleRecord) -> f64| -> Vec<Series> {
        (0..log.n_vehicles)
            .map(|v| Series {
                label: format!("{name}{v}"),
                points: log
                    .frames
                    .iter()
                    .map(|fr| (fr.t, f(&fr.vehicles[v])))
                    .collect(),
            })
            .collect()
    };

    let mut out = vec![
        (
            "distances.svg",
            time_chart("Relative distances", "distance (m)", per_pair(&|p| p.d)),
        ),
        (
            "headings.svg",
            time_chart(
                "Headings",
                "theta (rad)",
                per_vehicle("theta", &|r| r.theta),
            ),
        ),
        (
            "speeds.svg",
            time_chart("Linear speeds", "v (m/s)", per_vehicle("v", &|r| r.v)),
        ),
        (
            "turn_rates.svg",
            time_chart(
                "Angular speeds",
                "omega (rad/s)",
                per_vehicle("omega", &|r| r.omega),
            ),
        ),
    ];

    let mut traj = Chart::new("Trajectories", "x (m)", "y (m)");
    traj.equal_aspect = true;
    traj.series = (0..log.n_vehicles)
        .map(|v| Series {
            label: format!("vehicle {v}"),
            points: log
                .frames
                .iter()
                .map(|fr| (fr.vehicles[v].x, fr.vehicles[v].y))
                .collect(),
        })
        .collect();
    if log.n_vehicles > 1 {
        let snapshots = 6;
        let last = log.frames.len().saturating_sub(1);
        for k in 0..=snapshots {
            let fr = &log.frames[last * k / snapshots];
            traj.outlines.push(Outline {
                points: fr.vehicles.iter().map(|r| (r.x, r.y)).collect(),
            });
        }
    }
    out.push(("trajectories.svg", traj.render()));
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes the requested formats into `dir`, creating it if needed, and returns
/// the paths written.
pub fn export(
    log: &TrajectoryLog,
    summary: &Summary,
    formats: &[ExportFormat],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for f in formats {
        match f {
            ExportFormat::Csv => {
                let p = dir.join(CSV_FILE);
                write_file(&p, &to_csv(log))?;
                written.push(p);
            }
            ExportFormat::Json => {
                let p = dir.join(SUMMARY_FILE);
                write_file(&p, &summary_json(summary)?)?;
                written.push(p);
            }
            ExportFormat::Svg => {
                for (name, doc) in svg_panels(log) {
                    let p = dir.join(name);
                    write_file(&p, &doc)?;
                    written.push(p);
                }
            }
        }
    }
    Ok(written)
}
