//! Command-line interface and experiment orchestration.
//!
//! Subcommands: `run` (one optimization, full report files), `sweep`
//! (scheme x value x seed grid, aggregate CSV), `density-map`,
//! `jammer-landscape`, and `validate`. Thread count for sweeps comes
//! from the `ARIS_SIM_THREADS` environment variable.

use crate::config::{apply_override, ConfigFile, SystemConfig};
use crate::driver::{gain_field_for, run_scheme, RunReport, Scheme};
use crate::error::{Error, Result};
use crate::grid::{build_grid, uniform_density};
use crate::io;
use crate::jammer::JammerContext;
use crate::ris::random_phase_field;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use std::path::PathBuf;

pub const THREADS_ENV: &str = "ARIS_SIM_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "aris-sim",
    about = "Mean-field ARIS swarm anti-jamming simulator",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the alternating optimizer and write the report files.
    Run(RunArgs),
    /// Run a scheme x value x seed grid and write an aggregate CSV.
    Sweep(SweepArgs),
    /// Run once and export the converged density and gain per cell.
    DensityMap(RunArgs),
    /// Sample the jamming eigenvalue over the uncertainty disk.
    JammerLandscape(LandscapeArgs),
    /// Parse and validate a configuration, reporting every violation.
    Validate(ConfigArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// TOML config file; omitted fields take the built-in defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed override (applied after the config file).
    #[arg(long)]
    pub seed: Option<u64>,
    /// key=value overrides, e.g. --set p_jam_dbm=60.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<SystemConfig> {
        let mut config = match &self.config {
            Some(path) => ConfigFile::load(path)?.into_config(),
            None => SystemConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        for kv in &self.set {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("override '{kv}' is not KEY=VALUE")))?;
            apply_override(&mut config, key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Scheme to run: proposed, s1, s2, or s3.
    #[arg(long, default_value = "proposed")]
    pub scheme: String,
    /// Also write the per-cell RIS phases.
    #[arg(long)]
    pub dump_phases: bool,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Swept parameter: p_jam, epsilon, n_elements, q_uavs, or rho_max.
    #[arg(long)]
    pub param: String,
    /// Comma-separated values (p_jam in dBm).
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    /// Comma-separated schemes.
    #[arg(long, value_delimiter = ',', default_value = "proposed")]
    pub schemes: Vec<String>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
}

#[derive(Args, Debug)]
pub struct LandscapeArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Sample points per axis across the disk's bounding square.
    #[arg(long, default_value_t = 25)]
    pub samples: usize,
}

/// A validated sweep grid.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub seeds: Vec<u64>,
}

const SWEEPABLE: [&str; 5] = ["p_jam", "epsilon", "n_elements", "q_uavs", "rho_max"];

impl SweepSpec {
    pub fn new(param: &str, values: &[f64], schemes: &[String], seeds: &[u64]) -> Result<Self> {
        if !SWEEPABLE.contains(&param) {
            return Err(Error::Parse(format!(
                "unknown sweep parameter '{param}'; expected one of {SWEEPABLE:?}"
            )));
        }
        if values.is_empty() {
            return Err(Error::Parse("sweep needs at least one value".into()));
        }
        let mut sorted = seeds.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(Error::Parse("sweep seeds must be distinct".into()));
        }
        if seeds.is_empty() {
            return Err(Error::Parse("sweep needs at least one seed".into()));
        }
        let schemes = schemes
            .iter()
            .map(|s| {
                Scheme::parse(s).ok_or_else(|| Error::Parse(format!("unknown scheme '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        if schemes.is_empty() {
            return Err(Error::Parse("sweep needs at least one scheme".into()));
        }
        Ok(SweepSpec {
            param: param.to_string(),
            values: values.to_vec(),
            schemes,
            seeds: seeds.to_vec(),
        })
    }

    pub fn jobs(&self) -> Vec<(Scheme, f64, u64)> {
        let mut jobs = Vec::new();
        for &scheme in &self.schemes {
            for &value in &self.values {
                for &seed in &self.seeds {
                    jobs.push((scheme, value, seed));
                }
            }
        }
        jobs
    }
}

/// Runs the whole grid; failed jobs become error rows and the sweep
/// continues. Row order matches the job grid regardless of thread
/// interleaving.
pub fn run_sweep(base: &SystemConfig, spec: &SweepSpec) -> Result<Vec<io::SweepRow>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Parse(format!("{THREADS_ENV}='{v}' is not a thread count")))?;
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Parse(format!("thread pool: {e}")))?;
    let jobs = spec.jobs();
    let rows = pool.install(|| {
        jobs.par_iter()
            .map(|&(scheme, value, seed)| {
                let mut row = io::SweepRow {
                    scheme: scheme.label().to_string(),
                    param: spec.param.clone(),
                    value,
                    seed,
                    sum_rate: None,
                    iterations: None,
                    wallclock_s: None,
                    status: String::new(),
                };
                let result = (|| -> Result<RunReport> {
                    let mut config = base.clone();
                    apply_override(&mut config, &spec.param, &value.to_string())?;
                    config.seed = seed;
                    config.validate()?;
                    run_scheme(scheme, &config)
                })();
                match result {
                    Ok(report) => {
                        row.sum_rate = Some(report.reported_sum_rate());
                        row.iterations = Some(report.iterations);
                        row.wallclock_s = Some(report.timings.total.as_secs_f64());
                        row.status = "ok".into();
                    }
                    Err(e) => {
                        row.status = format!("error: {}", e.to_string().replace(['\n', ','], "; "));
                    }
                }
                row
            })
            .collect()
    });
    Ok(rows)
}

fn run_and_export(args: &RunArgs, with_report_files: bool) -> Result<()> {
    let config = args.config.resolve()?;
    let scheme = Scheme::parse(&args.scheme)
        .ok_or_else(|| Error::Parse(format!("unknown scheme '{}'", args.scheme)))?;
    let report = run_scheme(scheme, &config)?;
    let gain = gain_field_for(&config, &report)?;
    let grid = build_grid(&config);

    let mut jammers: Vec<(&str, [f64; 2])> = vec![
        ("estimate", config.jammer_estimate),
        ("defense", report.jammer.position),
    ];
    if let Some(wc) = &report.worst_case {
        jammers.push(("worst_case", wc.jammer.position));
    }
    let density_csv = io::render_density_map(&grid, &report.rho, &gain.g, &jammers);
    let mut files: Vec<(&str, String)> = vec![("density_map.csv", density_csv)];
    if with_report_files {
        files.push(("report.csv", io::render_report_csv(&report)));
        files.push(("users.csv", io::render_users_csv(&report)));
        if args.dump_phases {
            files.push(("phases.csv", io::render_phase_dump(&report.theta)));
        }
    }
    for (name, contents) in &files {
        std::fs::create_dir_all(&args.out)?;
        std::fs::write(args.out.join(name), contents)?;
    }
    let hashed: Vec<(&str, &str)> = files.iter().map(|(n, c)| (*n, c.as_str())).collect();
    io::write_manifest(&args.out.join("manifest.toml"), &config, &report, &hashed)?;
    Ok(())
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    run_and_export(args, true)
}

pub fn cmd_density_map(args: &RunArgs) -> Result<()> {
    run_and_export(args, false)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let spec = SweepSpec::new(&args.param, &args.values, &args.schemes, &args.seeds)?;
    let rows = run_sweep(&config, &spec)?;
    io::write_sweep_csv(&args.out.join("sweep.csv"), &rows)?;
    Ok(())
}

/// Samples the adversary's eigenvalue landscape at the initial defense
/// (uniform density, seeded random phases), which is exactly what the
/// pre-loop jammer optimization sees.
pub fn cmd_jammer_landscape(args: &LandscapeArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let grid = build_grid(&config);
    let scenario = config.scenario();
    let (channels, jlm) = crate::channel::generate_channels(&config, &grid, &scenario)?;
    let rho = uniform_density(&grid, config.uav_budget, config.rho_max)?;
    let theta = random_phase_field(&grid, config.ris_elements, config.seed);
    let ctx = JammerContext {
        theta: &theta,
        rho: &rho,
        channels: &channels,
        grid: &grid,
        jlm: &jlm,
    };
    let rows = ctx.landscape(config.jammer_estimate, config.epsilon, args.samples);
    io::write_landscape(&args.out.join("jammer_landscape.csv"), &rows)?;
    Ok(())
}

pub fn cmd_validate(args: &ConfigArgs) -> Result<()> {
    let config = args.resolve()?;
    println!(
        "config ok: M={} N={} K={} L={} grid={}x{} seed={}",
        config.bs_antennas,
        config.ris_elements,
        config.users,
        config.jammer_antennas,
        config.grid_dims[0],
        config.grid_dims[1],
        config.seed
    );
    Ok(())
}

/// Executes one parsed invocation; returns the process exit code.
pub fn dispatch(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::DensityMap(args) => cmd_density_map(args),
        Command::JammerLandscape(args) => cmd_jammer_landscape(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
