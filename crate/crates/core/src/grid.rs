//! Discretization of the deployment region and the mean-field density.
//!
//! Every spatial integral in the model is evaluated as a midpoint sum
//! over the grid cells, so each cell records its center as the
//! quadrature node.

use crate::config::SystemConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub center: [f64; 2],
    pub area: f64,
}

/// Uniform rectangular tiling of the deployment region, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub cells: Vec<Cell>,
    pub total_area: f64,
    pub dims: [usize; 2],
    pub region_size: [f64; 2],
}

impl Grid {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cell areas as a flat slice-compatible vector.
    pub fn areas(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.area).collect()
    }
}

/// Tiles the region into `grid_dims` uniform cells. Deterministic and
/// independent of the seed.
pub fn build_grid(config: &SystemConfig) -> Grid {
    let [nx, ny] = config.grid_dims;
    let [sx, sy] = config.region_size;
    let dx = sx / nx as f64;
    let dy = sy / ny as f64;
    let mut cells = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            cells.push(Cell {
                index: iy * nx + ix,
                center: [(ix as f64 + 0.5) * dx, (iy as f64 + 0.5) * dy],
                area: dx * dy,
            });
        }
    }
    Grid {
        cells,
        total_area: sx * sy,
        dims: [nx, ny],
        region_size: [sx, sy],
    }
}

/// The mean-field UAV density, one value per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub rho: Vec<f64>,
}

impl DensityField {
    /// Midpoint-rule integral of the density over the region.
    pub fn integral(&self, grid: &Grid) -> f64 {
        self.rho
            .iter()
            .zip(&grid.cells)
            .map(|(r, c)| r * c.area)
            .sum()
    }

    pub fn check(&self, grid: &Grid, q: f64, rho_max: f64) -> Result<()> {
        if self.rho.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "density has {} cells, grid has {}",
                self.rho.len(),
                grid.len()
            )));
        }
        for (i, &r) in self.rho.iter().enumerate() {
            if !(-1e-12..=rho_max + 1e-12).contains(&r) {
                return Err(Error::Contract(format!(
                    "rho[{i}] = {r} outside [0, {rho_max}]"
                )));
            }
        }
        let q_int = self.integral(grid);
        let scale = q.abs().max(1.0);
        if (q_int - q).abs() > 1e-6 * scale {
            return Err(Error::Contract(format!(
                "density integral {q_int} != budget {q}"
            )));
        }
        Ok(())
    }
}

/// Constant density carrying the whole budget: the initial point of
/// the alternating optimizer and the frozen field of the uniform
/// benchmark schemes.
pub fn uniform_density(grid: &Grid, q: f64, rho_max: f64) -> Result<DensityField> {
    let capacity = rho_max * grid.total_area;
    if q > capacity + 1e-12 {
        return Err(Error::InvalidConfig(vec![format!(
            "Q exceeds density capacity {capacity}: Q={q} > rho_max*area"
        )]));
    }
    let level = q / grid.total_area;
    Ok(DensityField {
        rho: vec![level; grid.len()],
    })
}
