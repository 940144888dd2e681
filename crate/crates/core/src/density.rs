//! Density reallocation: the marginal-gain field and the
//! threshold-based allocator.
//!
//! For fixed precoders, phases, and jammer, the aggregate channels are
//! linear in the density, so the sum-rate derivative with respect to
//! each cell's density has a closed form. The optimal reallocation
//! under the budget and the per-cell cap is bang-bang in that marginal
//! gain: cells above a threshold get the cap, cells below get zero,
//! and at most one marginal cell is fractional.

use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid};
use crate::ris::{PhaseField, PhaseProblem};
use crate::C64;

/// Net marginal sum-rate gain per unit density, one value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GainField {
    pub g: Vec<f64>,
}

/// Per-cell channel responses frozen at one phase field, letting the
/// sum-rate be evaluated as a function of the density alone.
#[derive(Debug, Clone)]
pub struct ResponseSet {
    /// f[k][i][c]: per-cell response of precoder i at user k.
    pub f: Vec<Vec<Vec<C64>>>,
    /// g[k][c]: per-cell jamming response of user k.
    pub g: Vec<Vec<C64>>,
    /// f_env[k][c]: desired-signal response envelope of cell c for user k
    /// under per-element co-alignment, independent of the phase field.
    pub f_env: Vec<Vec<f64>>,
    pub areas: Vec<f64>,
    pub p_jam: f64,
    pub noise: Vec<f64>,
}

impl ResponseSet {
    pub fn from_problem(problem: &PhaseProblem, theta: &PhaseField) -> Self {
        let (f, g) = problem.cell_responses(theta);
        ResponseSet {
            f,
            g,
            f_env: problem.response_envelopes(),
            areas: problem.areas.clone(),
            p_jam: problem.p_jam,
            noise: problem.noise.clone(),
        }
    }

    fn users(&self) -> usize {
        self.f.len()
    }

    fn agg(&self, resp: &[C64], rho: &DensityField) -> C64 {
        resp.iter()
            .zip(&rho.rho)
            .zip(&self.areas)
            .map(|((r, &d), &a)| r * C64::from(d * a))
            .sum()
    }

    /// Aggregate z-values at a density, by the midpoint rule:
    /// zb[k][i] pairs user k with precoder i.
    pub fn z_values(&self, rho: &DensityField) -> (Vec<Vec<C64>>, Vec<C64>) {
        let zb = self
            .f
            .iter()
            .map(|fk| fk.iter().map(|fki| self.agg(fki, rho)).collect())
            .collect();
        let zj = self.g.iter().map(|gk| self.agg(gk, rho)).collect();
        (zb, zj)
    }

    /// Honest sum-rate as a function of the density (inter-user
    /// leakage included).
    pub fn sum_rate(&self, rho: &DensityField) -> f64 {
        let (zb, zj) = self.z_values(rho);
        (0..self.users())
            .map(|k| {
                let leak: f64 = (0..self.users())
                    .filter(|&i| i != k)
                    .map(|i| zb[k][i].norm_sqr())
                    .sum();
                let d = leak + zj[k].norm_sqr() * self.p_jam + self.noise[k];
                (1.0 + zb[k][k].norm_sqr() / d).log2()
            })
            .sum()
    }

    /// Derivative of the honest sum-rate with respect to each cell's
    /// density, normalized per unit density (the cell area is divided
    /// out). With leakage-free precoders the cross terms vanish and
    /// the field reduces to the signal-versus-exposure tradeoff.
    pub fn gain_field(&self, rho: &DensityField) -> GainField {
        let (zb, zj) = self.z_values(rho);
        let ln2 = std::f64::consts::LN_2;
        let cells = self.areas.len();
        let mut g = vec![0.0; cells];
        for k in 0..self.users() {
            let signal = zb[k][k].norm_sqr();
            let leak: f64 = (0..self.users())
                .filter(|&i| i != k)
                .map(|i| zb[k][i].norm_sqr())
                .sum();
            let dk = leak + zj[k].norm_sqr() * self.p_jam + self.noise[k];
            let gamma = signal / dk;
            let denom = (signal + dk) * ln2;
            for c in 0..cells {
                let enhance = (zb[k][k].conj() * self.f[k][k][c]).re;
                let cross: f64 = (0..self.users())
                    .filter(|&i| i != k)
                    .map(|i| (zb[k][i].conj() * self.f[k][i][c]).re)
                    .sum();
                let expose = (zj[k].conj() * self.g[k][c]).re;
                g[c] += 2.0 * (enhance - gamma * (cross + self.p_jam * expose)) / denom;
            }
        }
        GainField { g }
    }

    /// Optimistic per-cell score that ranks cells by achievable signal
    /// enhancement: `|z_B,k| Σ_n |cb_k,n(c)|` in place of
    /// `Re(z_B,k^* f_k(c))`.
    ///
    /// Cells carrying no density keep whatever reflection phases they were
    /// initialised with, so the signed field scores them by an arbitrary
    /// phase draw. The envelope scores them as if their element phases were
    /// co-aligned, which the phase stage will do once mass arrives. The
    /// result follows the smooth path-loss profile instead of the phase
    /// speckle.
    pub fn envelope_field(&self, rho: &DensityField) -> GainField {
        let (zb, zj) = self.z_values(rho);
        let ln2 = std::f64::consts::LN_2;
        let cells = self.areas.len();
        let mut g = vec![0.0; cells];
        for k in 0..self.users() {
            let signal = zb[k][k].norm_sqr();
            let leak: f64 = (0..self.users())
                .filter(|&i| i != k)
                .map(|i| zb[k][i].norm_sqr())
                .sum();
            let dk = leak + zj[k].norm_sqr() * self.p_jam + self.noise[k];
            let denom = (signal + dk) * ln2;
            for c in 0..cells {
                let enhance = zb[k][k].norm() * self.f_env[k][c];
                g[c] += 2.0 * enhance / denom;
            }
        }
        GainField { g }
    }
}

fn check_budget(grid: &Grid, q: f64, rho_max: f64) -> Result<()> {
    let capacity = rho_max * grid.total_area;
    if q < 0.0 || q > capacity + 1e-9 * capacity.max(1.0) {
        return Err(Error::Domain(format!(
            "budget {q} outside [0, {capacity}]"
        )));
    }
    Ok(())
}

/// Cells ranked by gain descending; equal gains break toward the
/// lower index.
fn ranked(gain: &GainField) -> Vec<usize> {
    let mut order: Vec<usize> = (0..gain.g.len()).collect();
    order.sort_by(|&a, &b| {
        gain.g[b]
            .partial_cmp(&gain.g[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    order
}

fn fill_in_order(order: &[usize], grid: &Grid, q: f64, rho_max: f64) -> DensityField {
    let mut rho = vec![0.0; grid.len()];
    let mut remaining = q;
    for &c in order {
        if remaining <= 0.0 {
            break;
        }
        let cell_mass = rho_max * grid.cells[c].area;
        if remaining >= cell_mass {
            rho[c] = rho_max;
            remaining -= cell_mass;
        } else {
            rho[c] = remaining / grid.cells[c].area;
            remaining = 0.0;
        }
    }
    DensityField { rho }
}

/// Direct allocator: sort by gain and fill greedily until the budget
/// is spent. Exact by construction.
pub fn dt_ara_sort(gain: &GainField, grid: &Grid, q: f64, rho_max: f64) -> Result<DensityField> {
    if gain.g.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "gain field has {} cells, grid has {}",
            gain.g.len(),
            grid.len()
        )));
    }
    check_budget(grid, q, rho_max)?;
    Ok(fill_in_order(&ranked(gain), grid, q.min(rho_max * grid.total_area), rho_max))
}

/// Threshold allocator: bisect for the gain threshold whose
/// above-threshold mass meets the budget, then resolve the borderline
/// band greedily. Equivalent to the sort allocator up to `tol`.
pub fn dt_ara_bisect(
    gain: &GainField,
    grid: &Grid,
    q: f64,
    rho_max: f64,
    tol: f64,
) -> Result<DensityField> {
    if gain.g.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "gain field has {} cells, grid has {}",
            gain.g.len(),
            grid.len()
        )));
    }
    check_budget(grid, q, rho_max)?;
    let q = q.min(rho_max * grid.total_area);
    if q == 0.0 {
        return Ok(DensityField {
            rho: vec![0.0; grid.len()],
        });
    }
    let gmin = gain.g.iter().cloned().fold(f64::INFINITY, f64::min);
    let gmax = gain.g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // mass(tau) = capped mass of cells strictly above tau, a
    // non-increasing step function of tau
    let mass = |tau: f64| -> f64 {
        gain.g
            .iter()
            .zip(&grid.cells)
            .filter(|(&g, _)| g > tau)
            .map(|(_, c)| rho_max * c.area)
            .sum()
    };
    let mut lo = gmin - 1.0;
    let mut hi = gmax + 1.0;
    // invariant: mass(lo) >= q >= mass(hi)
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mass(mid) >= q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);

    let mut rho = vec![0.0; grid.len()];
    let mut remaining = q;
    for (c, &g) in gain.g.iter().enumerate() {
        if g > tau + tol {
            let mass = rho_max * grid.cells[c].area;
            rho[c] = rho_max;
            remaining -= mass;
        }
    }
    // the borderline band absorbs whatever budget is left
    let mut band: Vec<usize> = (0..grid.len())
        .filter(|&c| gain.g[c] <= tau + tol && gain.g[c] >= tau - tol)
        .collect();
    band.sort_by(|&a, &b| {
        gain.g[b]
            .partial_cmp(&gain.g[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    for &c in &band {
        if remaining <= 0.0 {
            break;
        }
        let cell_mass = rho_max * grid.cells[c].area;
        if remaining >= cell_mass {
            rho[c] = rho_max;
            remaining -= cell_mass;
        } else {
            rho[c] = remaining / grid.cells[c].area;
            remaining = 0.0;
        }
    }
    if remaining > 1e-9 * q.max(1.0) {
        return Err(Error::Contract(format!(
            "bisection left {remaining} of the budget unallocated"
        )));
    }
    Ok(DensityField { rho })
}
