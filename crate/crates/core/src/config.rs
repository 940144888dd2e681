//! System configuration: the single source of truth for a run.
//!
//! Powers are stored in linear watts and channel gains in linear
//! scale. The dB/dBm values accepted in config files and CLI
//! overrides are converted exactly once, at parse time.

use crate::error::{Error, Result};
use crate::rng::{substream, STREAM_USERS};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Tuning knobs of the optimization algorithms. Values the reference
/// algorithms leave symbolic (step sizes, tolerances, iteration caps)
/// are pinned here.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Convergence threshold on the outer sum-rate improvement
    /// (bits/s/Hz).
    pub outer_tol: f64,
    /// Maximum outer alternating iterations.
    pub outer_max_iters: usize,
    /// Riemannian gradient-norm tolerance, relative to `1 + |R_sum|`.
    pub ris_tol: f64,
    /// Maximum inner iterations of the phase optimizer.
    pub ris_max_iters: usize,
    /// Phase-polish iteration budget used when scoring density
    /// candidates; 0 means reuse `ris_max_iters`. Candidate
    /// allocations start from unoptimised phases, so a budget below
    /// `ris_max_iters` biases scoring toward the incumbent density.
    pub density_polish_iters: usize,
    /// Stagnation tolerance of the phase optimizer: stop once the
    /// best available step gains no more than this (bits/s/Hz).
    pub ris_rate_tol: f64,
    /// Initial tangent-norm step of the phase line search.
    pub ris_initial_step: f64,
    /// Maximum step halvings before declaring stationarity.
    pub ris_max_halvings: usize,
    /// Initial step (meters) of the jammer interior gradient ascent.
    pub jam_step: f64,
    /// Finite-difference step (meters) for the covariance derivative.
    pub jam_fd_step: f64,
    /// Maximum jammer ascent iterations.
    pub jam_max_iters: usize,
    /// Bisection tolerance on the density water level.
    pub dtara_bisect_tol: f64,
    /// Use bisection instead of the exact sort-and-scan allocator.
    pub dtara_use_bisection: bool,
    /// Re-run the jammer optimizer against the converged defense
    /// (residual vulnerability) instead of evaluating against the
    /// initial-state worst case.
    pub reoptimize_jammer: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer_tol: 1e-3,
            outer_max_iters: 20,
            ris_tol: 1e-5,
            ris_max_iters: 2000,
            density_polish_iters: 0,
            ris_rate_tol: 1e-4,
            ris_initial_step: 1.0,
            ris_max_halvings: 30,
            jam_step: 0.5,
            jam_fd_step: 0.01,
            jam_max_iters: 100,
            dtara_bisect_tol: 1e-10,
            dtara_use_bisection: false,
            reoptimize_jammer: false,
        }
    }
}

/// All scalars of the system model plus scenario geometry and the run
/// seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    /// BS antenna count M.
    pub bs_antennas: usize,
    /// RIS elements per UAV, N.
    pub ris_elements: usize,
    /// Total UAV budget Q (real-valued; the mean-field model only
    /// constrains the density integral).
    pub uav_budget: f64,
    /// User count K.
    pub users: usize,
    /// Jammer antenna count L.
    pub jammer_antennas: usize,
    /// Deployment region size in meters per axis.
    pub region_size: [f64; 2],
    /// Grid cells per axis.
    pub grid_dims: [usize; 2],
    /// UAV altitude in meters.
    pub uav_altitude: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Reference channel power gain at 1 m (linear).
    pub beta: f64,
    /// Rician K-factor (linear).
    pub kappa: f64,
    /// BS power budget (watts).
    pub p_bs: f64,
    /// Jamming power (watts).
    pub p_jam: f64,
    /// Jammer position uncertainty radius (meters).
    pub epsilon: f64,
    /// Maximum UAV density (UAVs/m^2).
    pub rho_max: f64,
    /// Per-user noise power (watts).
    pub noise_power: f64,
    /// ULA element spacing in wavelengths.
    pub element_spacing: f64,
    /// BS horizontal position (meters).
    pub bs_position: [f64; 2],
    /// BS altitude (meters).
    pub bs_altitude: f64,
    /// Explicit user positions; when absent, users are drawn from the
    /// "users" substream inside the configured cluster disk.
    pub user_positions: Option<Vec<[f64; 2]>>,
    pub user_cluster_center: [f64; 2],
    pub user_cluster_radius: f64,
    /// Estimated jammer horizontal position.
    pub jammer_estimate: [f64; 2],
    /// Jammer altitude (meters); the reference model only states the
    /// horizontal position is uncertain, so the altitude is exposed
    /// as plain config.
    pub jammer_altitude: f64,
    /// Run seed; all substreams derive from it.
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            bs_antennas: 16,
            ris_elements: 50,
            uav_budget: 100.0,
            users: 4,
            jammer_antennas: 16,
            region_size: [200.0, 200.0],
            grid_dims: [20, 20],
            uav_altitude: 100.0,
            alpha: 2.2,
            beta: db_to_linear(-30.0),
            kappa: db_to_linear(10.0),
            p_bs: dbm_to_watt(40.0),
            p_jam: dbm_to_watt(50.0),
            epsilon: 30.0,
            rho_max: 0.05,
            noise_power: dbm_to_watt(-102.0),
            element_spacing: 0.5,
            bs_position: [0.0, 100.0],
            bs_altitude: 0.0,
            user_positions: None,
            user_cluster_center: [140.0, 100.0],
            user_cluster_radius: 40.0,
            jammer_estimate: [100.0, 40.0],
            jammer_altitude: 0.0,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

impl SystemConfig {
    pub fn area(&self) -> f64 {
        self.region_size[0] * self.region_size[1]
    }

    /// Checks every invariant and returns all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        need(self.bs_antennas >= 1, "M (bs_antennas) must be >= 1".into());
        need(self.ris_elements >= 1, "N (ris_elements) must be >= 1".into());
        need(self.users >= 1, "K (users) must be >= 1".into());
        need(
            self.jammer_antennas >= 1,
            "L (jammer_antennas) must be >= 1".into(),
        );
        need(
            self.grid_dims[0] >= 1 && self.grid_dims[1] >= 1,
            format!(
                "grid_dims must be >= 1 per axis, got {}x{}",
                self.grid_dims[0], self.grid_dims[1]
            ),
        );
        need(
            self.users <= self.bs_antennas,
            format!(
                "K exceeds M: zero-forcing needs K <= M, got K={} M={}",
                self.users, self.bs_antennas
            ),
        );
        need(
            self.region_size[0] > 0.0 && self.region_size[1] > 0.0,
            "region_size must be positive per axis".into(),
        );
        let capacity = self.rho_max * self.area();
        need(
            self.uav_budget <= capacity,
            format!(
                "Q exceeds density capacity {}: Q={} > rho_max*area",
                capacity, self.uav_budget
            ),
        );
        need(self.uav_budget >= 0.0, "Q (uav_budget) must be >= 0".into());
        need(self.epsilon >= 0.0, "epsilon must be >= 0".into());
        need(self.p_bs > 0.0, "p_bs must be > 0".into());
        need(self.p_jam > 0.0, "p_jam must be > 0".into());
        need(self.beta > 0.0, "beta must be > 0".into());
        need(self.kappa > 0.0, "kappa must be > 0".into());
        need(self.noise_power > 0.0, "noise_power must be > 0".into());
        need(self.rho_max > 0.0, "rho_max must be > 0".into());
        if let Some(ref ups) = self.user_positions {
            need(
                ups.len() == self.users,
                format!(
                    "user_positions has {} entries but K={}",
                    ups.len(),
                    self.users
                ),
            );
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }

    /// Resolved 3-D scenario geometry.
    pub fn scenario(&self) -> Scenario {
        let users = match &self.user_positions {
            Some(ups) => ups.iter().map(|p| [p[0], p[1], 0.0]).collect(),
            None => {
                let mut rng = substream(self.seed, STREAM_USERS);
                (0..self.users)
                    .map(|_| {
                        let r = self.user_cluster_radius * rng.gen::<f64>().sqrt();
                        let phi = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
                        [
                            self.user_cluster_center[0] + r * phi.cos(),
                            self.user_cluster_center[1] + r * phi.sin(),
                            0.0,
                        ]
                    })
                    .collect()
            }
        };
        Scenario {
            bs: [self.bs_position[0], self.bs_position[1], self.bs_altitude],
            users,
            jammer_estimate: [
                self.jammer_estimate[0],
                self.jammer_estimate[1],
                self.jammer_altitude,
            ],
        }
    }
}

/// Resolved 3-D positions of the fixed scenario actors.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub bs: [f64; 3],
    pub users: Vec<[f64; 3]>,
    pub jammer_estimate: [f64; 3],
}

/// On-disk config schema. Mirrors [`SystemConfig`] field names, with
/// powers in dBm and gains in dB; any omitted field takes its default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub bs_antennas: Option<usize>,
    pub ris_elements: Option<usize>,
    pub uav_budget: Option<f64>,
    pub users: Option<usize>,
    pub jammer_antennas: Option<usize>,
    pub region_size: Option<[f64; 2]>,
    pub grid_dims: Option<[usize; 2]>,
    pub uav_altitude: Option<f64>,
    pub alpha: Option<f64>,
    pub beta_db: Option<f64>,
    pub kappa_db: Option<f64>,
    pub p_bs_dbm: Option<f64>,
    pub p_jam_dbm: Option<f64>,
    pub epsilon: Option<f64>,
    pub rho_max: Option<f64>,
    pub noise_dbm: Option<f64>,
    pub element_spacing: Option<f64>,
    pub bs_position: Option<[f64; 2]>,
    pub bs_altitude: Option<f64>,
    pub user_positions: Option<Vec<[f64; 2]>>,
    pub user_cluster_center: Option<[f64; 2]>,
    pub user_cluster_radius: Option<f64>,
    pub jammer_estimate: Option<[f64; 2]>,
    pub jammer_altitude: Option<f64>,
    pub seed: Option<u64>,
    pub solver: Option<SolverConfig>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies the file on top of the Table-II defaults.
    pub fn into_config(self) -> SystemConfig {
        let mut c = SystemConfig::default();
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(
            bs_antennas,
            ris_elements,
            uav_budget,
            users,
            jammer_antennas,
            region_size,
            grid_dims,
            uav_altitude,
            alpha,
            epsilon,
            rho_max,
            element_spacing,
            bs_position,
            bs_altitude,
            user_cluster_center,
            user_cluster_radius,
            jammer_estimate,
            jammer_altitude,
            seed,
            solver
        );
        if let Some(v) = self.beta_db {
            c.beta = db_to_linear(v);
        }
        if let Some(v) = self.kappa_db {
            c.kappa = db_to_linear(v);
        }
        if let Some(v) = self.p_bs_dbm {
            c.p_bs = dbm_to_watt(v);
        }
        if let Some(v) = self.p_jam_dbm {
            c.p_jam = dbm_to_watt(v);
        }
        if let Some(v) = self.noise_dbm {
            c.noise_power = dbm_to_watt(v);
        }
        if self.user_positions.is_some() {
            c.user_positions = self.user_positions;
        }
        c
    }
}

/// Applies one `key=value` CLI override onto a config. Keys use the
/// config-file names (so powers are given in dBm, gains in dB).
pub fn apply_override(c: &mut SystemConfig, key: &str, value: &str) -> Result<()> {
    fn num(v: &str) -> Result<f64> {
        v.parse()
            .map_err(|_| Error::Parse(format!("expected a number, got '{v}'")))
    }
    fn int(v: &str) -> Result<usize> {
        v.parse()
            .map_err(|_| Error::Parse(format!("expected an integer, got '{v}'")))
    }
    fn pair(v: &str) -> Result<[f64; 2]> {
        let parts: Vec<&str> = v.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::Parse(format!("expected 'a,b', got '{v}'")));
        }
        Ok([num(parts[0])?, num(parts[1])?])
    }
    match key {
        "bs_antennas" => c.bs_antennas = int(value)?,
        "ris_elements" | "n_elements" => c.ris_elements = int(value)?,
        "uav_budget" | "q_uavs" => c.uav_budget = num(value)?,
        "users" => c.users = int(value)?,
        "jammer_antennas" => c.jammer_antennas = int(value)?,
        "grid_dims" => {
            let p = pair(value)?;
            c.grid_dims = [p[0] as usize, p[1] as usize];
        }
        "region_size" => c.region_size = pair(value)?,
        "uav_altitude" => c.uav_altitude = num(value)?,
        "alpha" => c.alpha = num(value)?,
        "beta_db" => c.beta = db_to_linear(num(value)?),
        "kappa_db" => c.kappa = db_to_linear(num(value)?),
        "p_bs_dbm" => c.p_bs = dbm_to_watt(num(value)?),
        "p_jam_dbm" | "p_jam" => c.p_jam = dbm_to_watt(num(value)?),
        "epsilon" => c.epsilon = num(value)?,
        "rho_max" => c.rho_max = num(value)?,
        "noise_dbm" => c.noise_power = dbm_to_watt(num(value)?),
        "element_spacing" => c.element_spacing = num(value)?,
        "bs_position" => c.bs_position = pair(value)?,
        "jammer_estimate" => c.jammer_estimate = pair(value)?,
        "jammer_altitude" => c.jammer_altitude = num(value)?,
        "user_cluster_center" => c.user_cluster_center = pair(value)?,
        "user_cluster_radius" => c.user_cluster_radius = num(value)?,
        "seed" => {
            c.seed = value
                .parse()
                .map_err(|_| Error::Parse(format!("expected an integer seed, got '{value}'")))?
        }
        "outer_tol" => c.solver.outer_tol = num(value)?,
        "outer_max_iters" => c.solver.outer_max_iters = int(value)?,
        "ris_max_iters" => c.solver.ris_max_iters = int(value)?,
        "density_polish_iters" => c.solver.density_polish_iters = int(value)?,
        "ris_tol" => c.solver.ris_tol = num(value)?,
        "reoptimize_jammer" => {
            c.solver.reoptimize_jammer = value
                .parse()
                .map_err(|_| Error::Parse(format!("expected true/false, got '{value}'")))?
        }
        _ => return Err(Error::Parse(format!("unknown override key '{key}'"))),
    }
    Ok(())
}
