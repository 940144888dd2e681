//! CSV export and the per-run manifest.
//!
//! Data files (report, users, density map, landscape, phase dump) are
//! written with deterministic float formatting and no timestamps, so
//! identical config and seed reproduce them byte for byte. Timing
//! information goes only into the manifest and the sweep aggregate,
//! which are explicitly allowed to vary between runs.

use crate::config::SystemConfig;
use crate::driver::RunReport;
use crate::error::Result;
use crate::grid::{DensityField, Grid};
use crate::ris::PhaseField;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

/// Shortest-roundtrip float formatting; empty for missing values.
fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render_report_csv(report: &RunReport) -> String {
    let mut out = String::from("# schema: report-v1\n");
    out.push_str(
        "kind,iteration,after_beamform,after_phase,after_density,sum_rate,worst_case_sum_rate,jammer_x,jammer_y,converged,iterations\n",
    );
    let _ = writeln!(
        out,
        "initial,0,,,,{},,,,,",
        report.initial_sum_rate
    );
    for rec in &report.trace {
        let _ = writeln!(
            out,
            "iteration,{},{},{},{},{},,,,,",
            rec.iteration, rec.after_beamform, rec.after_phase, rec.after_density, rec.after_density
        );
    }
    let (wc, jpos) = match &report.worst_case {
        Some(w) => (Some(w.metrics.sum_rate), w.jammer.position),
        None => (None, report.jammer.position),
    };
    let _ = writeln!(
        out,
        "summary,,,,,{},{},{},{},{},{}",
        report.metrics.sum_rate,
        fmt(wc),
        jpos[0],
        jpos[1],
        report.converged,
        report.iterations
    );
    out
}

pub fn write_report_csv(path: &Path, report: &RunReport) -> Result<()> {
    write_file(path, &render_report_csv(report))
}

pub fn render_users_csv(report: &RunReport) -> String {
    let mut out = String::from("# schema: users-v1\nk,gamma,rate,worst_case_gamma,worst_case_rate\n");
    for k in 0..report.metrics.gamma.len() {
        let (wg, wr) = match &report.worst_case {
            Some(w) => (Some(w.metrics.gamma[k]), Some(w.metrics.rates[k])),
            None => (None, None),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            k,
            report.metrics.gamma[k],
            report.metrics.rates[k],
            fmt(wg),
            fmt(wr)
        );
    }
    out
}

pub fn write_users_csv(path: &Path, report: &RunReport) -> Result<()> {
    write_file(path, &render_users_csv(report))
}

/// One row per cell; jammer coordinates ride in header comments so
/// plotting tools can overlay them.
pub fn render_density_map(
    grid: &Grid,
    rho: &DensityField,
    gain: &[f64],
    jammers: &[(&str, [f64; 2])],
) -> String {
    let mut out = String::from("# schema: density-map-v1\n");
    for (label, pos) in jammers {
        let _ = writeln!(out, "# jammer_{},{},{}", label, pos[0], pos[1]);
    }
    out.push_str("x,y,rho,gain\n");
    for (c, cell) in grid.cells.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            cell.center[0], cell.center[1], rho.rho[c], gain[c]
        );
    }
    out
}

pub fn write_density_map(
    path: &Path,
    grid: &Grid,
    rho: &DensityField,
    gain: &[f64],
    jammers: &[(&str, [f64; 2])],
) -> Result<()> {
    write_file(path, &render_density_map(grid, rho, gain, jammers))
}

pub fn render_landscape(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("# schema: jammer-landscape-v1\nj_x,j_y,lambda\n");
    for (x, y, lam) in rows {
        let _ = writeln!(out, "{x},{y},{lam}");
    }
    out
}

pub fn write_landscape(path: &Path, rows: &[(f64, f64, f64)]) -> Result<()> {
    write_file(path, &render_landscape(rows))
}

pub fn render_phase_dump(theta: &PhaseField) -> String {
    let mut out = String::from("# schema: phases-v1\ncell,element,re,im\n");
    for (c, t) in theta.theta.iter().enumerate() {
        for (n, x) in t.iter().enumerate() {
            let _ = writeln!(out, "{c},{n},{},{}", x.re, x.im);
        }
    }
    out
}

pub fn write_phase_dump(path: &Path, theta: &PhaseField) -> Result<()> {
    write_file(path, &render_phase_dump(theta))
}

/// One sweep job result; `sum_rate` is absent when the job failed and
/// the failure text lands in `status`.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub scheme: String,
    pub param: String,
    pub value: f64,
    pub seed: u64,
    pub sum_rate: Option<f64>,
    pub iterations: Option<usize>,
    pub wallclock_s: Option<f64>,
    pub status: String,
}

pub fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out =
        String::from("# schema: sweep-v1\nscheme,param,value,seed,sum_rate,iterations,wallclock,status\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.scheme,
            r.param,
            r.value,
            r.seed,
            fmt(r.sum_rate),
            r.iterations.map(|i| i.to_string()).unwrap_or_default(),
            fmt(r.wallclock_s),
            r.status
        );
    }
    out
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_file(path, &render_sweep_csv(rows))
}

/// Config echo, content hashes of the data files, and stage timings.
/// The only output allowed to differ between identical reruns.
pub fn write_manifest(
    path: &Path,
    config: &SystemConfig,
    report: &RunReport,
    data_files: &[(&str, &str)],
) -> Result<()> {
    use toml::value::{Table, Value};
    let mut hashes = Table::new();
    for (name, contents) in data_files {
        let mut hasher = Sha256::new();
        hasher.update(contents.as_bytes());
        hashes.insert(name.to_string(), Value::String(format!("{:x}", hasher.finalize())));
    }
    let mut timings = Table::new();
    let t = &report.timings;
    for (name, d) in [
        ("channel", t.channel),
        ("jammer", t.jammer),
        ("beamform", t.beamform),
        ("phase", t.phase),
        ("density", t.density),
        ("total", t.total),
    ] {
        timings.insert(name.into(), Value::Float(d.as_secs_f64()));
    }
    let config_value =
        Value::try_from(config).map_err(|e| crate::error::Error::Parse(e.to_string()))?;
    let mut root = Table::new();
    root.insert("hashes".into(), Value::Table(hashes));
    root.insert("timings_seconds".into(), Value::Table(timings));
    root.insert("config".into(), config_value);
    let out = toml::to_string_pretty(&Value::Table(root))
        .map_err(|e| crate::error::Error::Parse(e.to_string()))?;
    write_file(path, &out)
}
