//! Channel synthesis and mean-field aggregate channels.
//!
//! Per-cell links follow a Rician model: a deterministic LoS component
//! built from ULA array responses, plus an i.i.d. complex Gaussian
//! NLoS component, both scaled by the power-law path loss. The
//! jammer-to-ARIS link is pure LoS so that the jamming covariance is a
//! smooth function of the jammer position.
//!
//! Array angles are measured in the vertical plane containing the two
//! endpoints; element spacing is half a wavelength by default. The
//! carrier wavelength never appears explicitly: the reference gain
//! `beta` absorbs it.

use crate::config::{Scenario, SystemConfig};
use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid};
use crate::ris::PhaseField;
use crate::rng::{substream, STREAM_CHANNEL};
use crate::C64;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// ULA response: element m is `exp(i*2*pi*spacing*m*sin(angle))`.
pub fn array_response(angle: f64, count: usize, spacing: f64) -> DVector<C64> {
    let phase_step = 2.0 * std::f64::consts::PI * spacing * angle.sin();
    DVector::from_iterator(
        count,
        (0..count).map(|m| C64::from_polar(1.0, phase_step * m as f64)),
    )
}

/// Linear power gain `beta * d^(-alpha)` at distance `d` meters.
pub fn path_loss(distance: f64, alpha: f64, beta: f64) -> Result<f64> {
    if distance <= 0.0 {
        return Err(Error::Domain(format!(
            "path loss needs distance > 0, got {distance}"
        )));
    }
    Ok(beta * distance.powf(-alpha))
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Elevation angle at `from` toward `to`, in the vertical plane
/// containing both endpoints.
fn elevation(from: [f64; 3], to: [f64; 3]) -> f64 {
    let d = dist3(from, to);
    ((to[2] - from[2]) / d).asin()
}

fn complex_gaussian<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) / 2f64.sqrt()
}

/// Rician draw: `sqrt(beta d^-alpha) * (sqrt(k/(k+1)) los +
/// sqrt(1/(k+1)) nlos)` with i.i.d. standard complex Gaussian NLoS
/// entries. Entries are drawn in row-major order.
pub fn synth_rician<R: Rng>(
    los: &DMatrix<C64>,
    kappa: f64,
    d: f64,
    alpha: f64,
    beta: f64,
    rng: &mut R,
) -> Result<DMatrix<C64>> {
    let amp = path_loss(d, alpha, beta)?.sqrt();
    let w_los = (kappa / (kappa + 1.0)).sqrt();
    let w_nlos = (1.0 / (kappa + 1.0)).sqrt();
    let (rows, cols) = los.shape();
    let nlos = DMatrix::from_row_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| complex_gaussian(rng)),
    );
    Ok((los * C64::from(w_los) + nlos * C64::from(w_nlos)) * C64::from(amp))
}

/// Channels anchored at one grid cell.
#[derive(Debug, Clone)]
pub struct CellChannels {
    pub index: usize,
    /// BS-to-ARIS matrix, N x M.
    pub h_bu: DMatrix<C64>,
    /// ARIS-to-user vectors, one per user, length N.
    pub h_uk: Vec<DVector<C64>>,
}

/// Per-cell channels for the whole grid plus the generating seed.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub cells: Vec<CellChannels>,
    pub seed: u64,
}

/// Pure-LoS jammer-to-ARIS link, parametric in the jammer position.
/// Rank one at every cell and continuous in `j`: no per-position
/// random redraws.
#[derive(Debug, Clone)]
pub struct JammerLinkModel {
    pub cell_positions: Vec<[f64; 3]>,
    pub jammer_altitude: f64,
    pub beta: f64,
    pub alpha: f64,
    pub ris_elements: usize,
    pub jammer_antennas: usize,
    pub spacing: f64,
}

/// Factored form of one jammer link: `amplitude * a_ris * a_jam^H`.
pub struct JamLink {
    pub amplitude: f64,
    pub a_ris: DVector<C64>,
    pub a_jam: DVector<C64>,
}

impl JammerLinkModel {
    pub fn jammer_pos3(&self, j: [f64; 2]) -> [f64; 3] {
        [j[0], j[1], self.jammer_altitude]
    }

    pub fn link(&self, cell: usize, j: [f64; 2]) -> JamLink {
        let jp = self.jammer_pos3(j);
        let cp = self.cell_positions[cell];
        let d = dist3(cp, jp);
        let amplitude = (self.beta * d.powf(-self.alpha)).sqrt();
        JamLink {
            amplitude,
            a_ris: array_response(elevation(cp, jp), self.ris_elements, self.spacing),
            a_jam: array_response(elevation(jp, cp), self.jammer_antennas, self.spacing),
        }
    }

    /// Full N x L matrix `H_JU(x, j)`.
    pub fn matrix(&self, cell: usize, j: [f64; 2]) -> DMatrix<C64> {
        let l = self.link(cell, j);
        (&l.a_ris * l.a_jam.adjoint()) * C64::from(l.amplitude)
    }
}

/// Synthesizes every per-cell channel from the "channel" substream.
/// Identical `(config, seed)` reproduce identical values bit for bit.
pub fn generate_channels(
    config: &SystemConfig,
    grid: &Grid,
    scenario: &Scenario,
) -> Result<(ChannelSet, JammerLinkModel)> {
    let mut rng = substream(config.seed, STREAM_CHANNEL);
    let n = config.ris_elements;
    let m = config.bs_antennas;
    let sp = config.element_spacing;
    let mut cells = Vec::with_capacity(grid.len());
    let mut cell_positions = Vec::with_capacity(grid.len());
    for cell in &grid.cells {
        let cp = [cell.center[0], cell.center[1], config.uav_altitude];
        cell_positions.push(cp);

        let d_bu = dist3(cp, scenario.bs);
        let a_ris = array_response(elevation(cp, scenario.bs), n, sp);
        let a_bs = array_response(elevation(scenario.bs, cp), m, sp);
        let los_bu = &a_ris * a_bs.adjoint();
        let h_bu = synth_rician(&los_bu, config.kappa, d_bu, config.alpha, config.beta, &mut rng)?;

        let mut h_uk = Vec::with_capacity(config.users);
        for user in &scenario.users {
            let d_uk = dist3(cp, *user);
            let los =
                DMatrix::from_column_slice(n, 1, array_response(elevation(cp, *user), n, sp).as_slice());
            let h = synth_rician(&los, config.kappa, d_uk, config.alpha, config.beta, &mut rng)?;
            h_uk.push(DVector::from_column_slice(h.as_slice()));
        }
        cells.push(CellChannels {
            index: cell.index,
            h_bu,
            h_uk,
        });
    }
    let jlm = JammerLinkModel {
        cell_positions,
        jammer_altitude: config.jammer_altitude,
        beta: config.beta,
        alpha: config.alpha,
        ris_elements: n,
        jammer_antennas: config.jammer_antennas,
        spacing: sp,
    };
    Ok((ChannelSet { cells, seed: config.seed }, jlm))
}

fn check_shared_grid(theta: &PhaseField, rho: &DensityField, channels: &ChannelSet, grid: &Grid) -> Result<()> {
    let n = grid.len();
    if theta.theta.len() != n || rho.rho.len() != n || channels.cells.len() != n {
        return Err(Error::GridMismatch(format!(
            "fields disagree on cell count: theta={} rho={} channels={} grid={}",
            theta.theta.len(),
            rho.rho.len(),
            channels.cells.len(),
            n
        )));
    }
    Ok(())
}

/// Midpoint-sum aggregate BS-to-user-k channel: the entries of the row
/// `h_eff,B,k^H`, length M. Reduction runs in cell-index order.
pub fn effective_bs_channel(
    theta: &PhaseField,
    rho: &DensityField,
    channels: &ChannelSet,
    grid: &Grid,
    k: usize,
) -> Result<DVector<C64>> {
    check_shared_grid(theta, rho, channels, grid)?;
    let m = channels.cells[0].h_bu.ncols();
    let mut acc = DVector::<C64>::zeros(m);
    for (c, cell) in channels.cells.iter().enumerate() {
        let weight = rho.rho[c] * grid.cells[c].area;
        if weight == 0.0 {
            continue;
        }
        // u_n = conj(h_uk[n]) * theta[n]; row = u^T H_BU
        let u = DVector::from_iterator(
            cell.h_uk[k].len(),
            cell.h_uk[k]
                .iter()
                .zip(theta.theta[c].iter())
                .map(|(h, t)| h.conj() * t),
        );
        acc += cell.h_bu.tr_mul(&u) * C64::from(weight);
    }
    Ok(acc)
}

/// Midpoint-sum aggregate jamming channel `h_eff,J,k(j, v)`.
pub fn effective_jam_channel(
    theta: &PhaseField,
    rho: &DensityField,
    channels: &ChannelSet,
    grid: &Grid,
    jlm: &JammerLinkModel,
    j: [f64; 2],
    v: &DVector<C64>,
    k: usize,
) -> Result<C64> {
    check_shared_grid(theta, rho, channels, grid)?;
    if (v.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!(
            "jammer beamformer must be unit norm, got {}",
            v.norm()
        )));
    }
    let mut acc = C64::new(0.0, 0.0);
    for (c, cell) in channels.cells.iter().enumerate() {
        let weight = rho.rho[c] * grid.cells[c].area;
        if weight == 0.0 {
            continue;
        }
        let link = jlm.link(c, j);
        // h^H Theta H_JU v = amp * (h^H Theta a_ris) * (a_jam^H v)
        let s: C64 = cell.h_uk[k]
            .iter()
            .zip(theta.theta[c].iter())
            .zip(link.a_ris.iter())
            .map(|((h, t), a)| h.conj() * t * a)
            .sum();
        let beam: C64 = link.a_jam.iter().zip(v.iter()).map(|(a, vi)| a.conj() * vi).sum();
        acc += C64::from(weight * link.amplitude) * s * beam;
    }
    Ok(acc)
}

/// Per-cell cascade coefficients `c_B,k,n(x) = conj(h_Uk[n]) * (H_BU w)[n]`
/// for a fixed BS precoding vector `w`.
pub fn signal_coeffs(channels: &ChannelSet, k: usize, w: &DVector<C64>) -> Vec<DVector<C64>> {
    channels
        .cells
        .iter()
        .map(|cell| {
            let hw = &cell.h_bu * w;
            DVector::from_iterator(
                hw.len(),
                cell.h_uk[k].iter().zip(hw.iter()).map(|(h, x)| h.conj() * x),
            )
        })
        .collect()
}

/// Per-cell cascade coefficients `c_J,k,n(x) = conj(h_Uk[n]) * (H_JU v)[n]`
/// for a fixed jammer position and beamformer.
pub fn jam_coeffs(
    channels: &ChannelSet,
    jlm: &JammerLinkModel,
    j: [f64; 2],
    v: &DVector<C64>,
    k: usize,
) -> Vec<DVector<C64>> {
    channels
        .cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let link = jlm.link(c, j);
            let beam: C64 = link.a_jam.iter().zip(v.iter()).map(|(a, vi)| a.conj() * vi).sum();
            let scale = C64::from(link.amplitude) * beam;
            DVector::from_iterator(
                link.a_ris.len(),
                cell.h_uk[k]
                    .iter()
                    .zip(link.a_ris.iter())
                    .map(|(h, a)| h.conj() * a * scale),
            )
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::ris::random_phase_field;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> SystemConfig {
        SystemConfig {
            bs_antennas: 4,
            ris_elements: 6,
            users: 2,
            jammer_antennas: 3,
            grid_dims: [4, 4],
            seed: 11,
            ..SystemConfig::default()
        }
    }

    fn setup(config: &SystemConfig) -> (Grid, ChannelSet, JammerLinkModel) {
        let grid = build_grid(config);
        let scenario = config.scenario();
        let (cs, jlm) = generate_channels(config, &grid, &scenario).unwrap();
        (grid, cs, jlm)
    }

    #[test]
    fn array_response_broadside_is_all_ones() {
        let a = array_response(0.0, 4, 0.5);
        for x in a.iter() {
            assert_relative_eq!(x.re, 1.0, epsilon = 1e-12);
            assert_relative_eq!(x.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn array_response_endfire_alternates() {
        let a = array_response(std::f64::consts::FRAC_PI_2, 2, 0.5);
        assert_relative_eq!(a[0].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(a[1].re, -1.0, epsilon = 1e-12);
        assert!(a[1].im.abs() < 1e-12);
    }

    #[test]
    fn array_response_unit_modulus() {
        for &angle in &[0.3, -1.1, 0.77, 2.0] {
            let a = array_response(angle, 16, 0.5);
            for x in a.iter() {
                assert!((x.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn path_loss_reference_and_power_law() {
        assert_relative_eq!(path_loss(1.0, 2.2, 1e-3).unwrap(), 1e-3);
        let g = path_loss(10.0, 2.2, 1e-3).unwrap();
        assert_relative_eq!(g, 1e-3 * 10f64.powf(-2.2), epsilon = 1e-15);
        assert!((g - 6.31e-6).abs() / 6.31e-6 < 1e-3);
        let g2 = path_loss(20.0, 2.2, 1e-3).unwrap();
        assert_relative_eq!(g2 / g, 2f64.powf(-2.2), epsilon = 1e-12);
        assert!(path_loss(0.0, 2.2, 1e-3).is_err());
        assert!(path_loss(-1.0, 2.2, 1e-3).is_err());
    }

    #[test]
    fn rician_los_limit_is_rank_one() {
        let a = array_response(0.4, 5, 0.5);
        let b = array_response(-0.2, 3, 0.5);
        let los = &a * b.adjoint();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = synth_rician(&los, 1e12, 50.0, 2.2, 1e-3, &mut rng).unwrap();
        let expected = &los * C64::from(path_loss(50.0, 2.2, 1e-3).unwrap().sqrt());
        assert!((&h - &expected).norm() / expected.norm() < 1e-5);
        let svd = h.svd(false, false);
        let sv = &svd.singular_values;
        assert!(sv[0] * sv[0] / sv.iter().map(|s| s * s).sum::<f64>() > 1.0 - 1e-9);
    }

    #[test]
    fn rician_pure_nlos_variance_matches_path_loss() {
        // Monte-Carlo estimate of the per-entry variance for kappa = 0.
        let los = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pl = path_loss(30.0, 2.2, 1e-3).unwrap();
        let mean_sq: f64 = (0..10_000)
            .map(|_| {
                synth_rician(&los, 0.0, 30.0, 2.2, 1e-3, &mut rng).unwrap()[(0, 0)].norm_sqr()
            })
            .sum::<f64>()
            / 10_000.0;
        assert!((mean_sq - pl).abs() / pl < 0.05);
    }

    #[test]
    fn rician_is_deterministic_for_fixed_seed() {
        let los = DMatrix::from_element(2, 3, C64::new(1.0, 0.0));
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        let h1 = synth_rician(&los, 10.0, 40.0, 2.2, 1e-3, &mut r1).unwrap();
        let h2 = synth_rician(&los, 10.0, 40.0, 2.2, 1e-3, &mut r2).unwrap();
        assert_eq!(h1, h2);
    }

    #[test]
    fn generation_is_deterministic() {
        let config = small_config();
        let (_, cs1, _) = setup(&config);
        let (_, cs2, _) = setup(&config);
        for (a, b) in cs1.cells.iter().zip(&cs2.cells) {
            assert_eq!(a.h_bu, b.h_bu);
            assert_eq!(a.h_uk, b.h_uk);
        }
    }

    #[test]
    fn degenerate_dims_scalar_channel() {
        let config = SystemConfig {
            bs_antennas: 1,
            ris_elements: 1,
            users: 1,
            jammer_antennas: 1,
            grid_dims: [1, 1],
            region_size: [100.0, 100.0],
            kappa: 1e12,
            seed: 4,
            ..SystemConfig::default()
        };
        let (_, cs, _) = setup(&config);
        let h = cs.cells[0].h_bu[(0, 0)];
        let cp = [50.0, 50.0, config.uav_altitude];
        let d = dist3(cp, config.scenario().bs);
        let expected = path_loss(d, config.alpha, config.beta).unwrap().sqrt();
        assert!((h.norm() - expected).abs() / expected < 1e-5);
    }

    #[test]
    fn jammer_link_is_rank_one_and_continuous() {
        let config = small_config();
        let (_, _, jlm) = setup(&config);
        let j = [100.0, 40.0];
        for c in 0..4 {
            let h = jlm.matrix(c, j);
            let svd = h.clone().svd(false, false);
            let sv = &svd.singular_values;
            let total: f64 = sv.iter().map(|s| s * s).sum();
            assert!(sv[0] * sv[0] / total > 1.0 - 1e-9);
        }
        let h0 = jlm.matrix(0, j);
        for &delta in &[1.0, 0.1, 0.01, 0.001] {
            let hd = jlm.matrix(0, [j[0] + delta, j[1]]);
            let diff = (&hd - &h0).norm() / h0.norm();
            assert!(diff < 0.2 * delta, "link not continuous: {diff} at {delta}");
        }
    }

    #[test]
    fn user_channel_magnitude_follows_power_law() {
        // Regression of log magnitude vs log distance over cells; the
        // slope should be close to -alpha/2.
        let config = SystemConfig {
            ris_elements: 50,
            users: 1,
            grid_dims: [8, 8],
            seed: 5,
            ..SystemConfig::default()
        };
        let grid = build_grid(&config);
        let scenario = config.scenario();
        let (cs, _) = generate_channels(&config, &grid, &scenario).unwrap();
        let user = scenario.users[0];
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        let n = grid.len() as f64;
        for (cell, gc) in cs.cells.iter().zip(&grid.cells) {
            let cp = [gc.center[0], gc.center[1], config.uav_altitude];
            let x = dist3(cp, user).ln();
            let y = (cell.h_uk[0].norm() / (config.ris_elements as f64).sqrt()).ln();
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let expected = -config.alpha / 2.0;
        assert!(
            (slope - expected).abs() / expected.abs() < 0.10,
            "slope {slope} vs expected {expected}"
        );
    }

    #[test]
    fn effective_bs_channel_edge_cases() {
        let config = small_config();
        let (grid, cs, _) = setup(&config);
        let theta = random_phase_field(&grid, config.ris_elements, config.seed);

        // empty swarm
        let zero = DensityField { rho: vec![0.0; grid.len()] };
        let h = effective_bs_channel(&theta, &zero, &cs, &grid, 0).unwrap();
        assert!(h.norm() == 0.0);

        // single active cell with rho * area = 1 picks out that cell
        let mut rho = vec![0.0; grid.len()];
        rho[5] = 1.0 / grid.cells[5].area;
        let one = DensityField { rho };
        let h = effective_bs_channel(&theta, &one, &cs, &grid, 0).unwrap();
        let cell = &cs.cells[5];
        let u = DVector::from_iterator(
            cell.h_uk[0].len(),
            cell.h_uk[0]
                .iter()
                .zip(theta.theta[5].iter())
                .map(|(x, t)| x.conj() * t),
        );
        let expected = cell.h_bu.tr_mul(&u);
        assert!((&h - &expected).norm() < 1e-12 * expected.norm().max(1.0));

        // linearity in rho
        let uni = crate::grid::uniform_density(&grid, 100.0, 1.0).unwrap();
        let double = DensityField { rho: uni.rho.iter().map(|r| 2.0 * r).collect() };
        let h1 = effective_bs_channel(&theta, &uni, &cs, &grid, 1).unwrap();
        let h2 = effective_bs_channel(&theta, &double, &cs, &grid, 1).unwrap();
        assert!((&h2 - &(&h1 * C64::from(2.0))).norm() < 1e-12 * h2.norm());
    }

    #[test]
    fn effective_jam_channel_matches_independent_quadrature() {
        let config = small_config();
        let (grid, cs, jlm) = setup(&config);
        let theta = random_phase_field(&grid, config.ris_elements, config.seed);
        let rho = crate::grid::uniform_density(&grid, 100.0, 1.0).unwrap();
        let j = [90.0, 50.0];
        let mut v = DVector::from_fn(config.jammer_antennas, |i, _| C64::new(1.0 + i as f64, -0.3));
        v /= C64::from(v.norm());

        let z = effective_jam_channel(&theta, &rho, &cs, &grid, &jlm, j, &v, 1).unwrap();

        // independent per-cell loop over the full N x L matrices
        let mut expected = C64::new(0.0, 0.0);
        for (c, cell) in cs.cells.iter().enumerate() {
            let h_ju = jlm.matrix(c, j);
            let mut cell_sum = C64::new(0.0, 0.0);
            let hv = &h_ju * &v;
            for n in 0..config.ris_elements {
                cell_sum += cell.h_uk[1][n].conj() * theta.theta[c][n] * hv[n];
            }
            expected += cell_sum * C64::from(rho.rho[c] * grid.cells[c].area);
        }
        assert!((z - expected).norm() < 1e-9 * expected.norm().max(1e-12));
    }

    #[test]
    fn jam_channel_rejects_non_unit_beamformer() {
        let config = small_config();
        let (grid, cs, jlm) = setup(&config);
        let theta = random_phase_field(&grid, config.ris_elements, config.seed);
        let rho = crate::grid::uniform_density(&grid, 100.0, 1.0).unwrap();
        let v = DVector::from_element(config.jammer_antennas, C64::new(1.0, 0.0));
        assert!(matches!(
            effective_jam_channel(&theta, &rho, &cs, &grid, &jlm, [90.0, 50.0], &v, 0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn jam_channel_null_space_of_rank_one_link() {
        // One active cell, L >= 2: a v orthogonal to the jammer
        // steering vector at that cell yields a zero channel.
        let config = small_config();
        let (grid, cs, jlm) = setup(&config);
        let theta = random_phase_field(&grid, config.ris_elements, config.seed);
        let mut rho = vec![0.0; grid.len()];
        rho[3] = 1.0 / grid.cells[3].area;
        let rho = DensityField { rho };
        let j = [120.0, 80.0];
        let link = jlm.link(3, j);
        // orthogonalize e0 against a_jam
        let a = &link.a_jam;
        let e0 = DVector::from_fn(config.jammer_antennas, |i, _| {
            C64::from(if i == 0 { 1.0 } else { 0.0 })
        });
        let proj = a.dotc(&e0) / C64::from(a.norm_squared());
        let mut v = e0 - a * proj;
        v /= C64::from(v.norm());
        let z = effective_jam_channel(&theta, &rho, &cs, &grid, &jlm, j, &v, 0).unwrap();
        assert!(z.norm() < 1e-9);
    }

    #[test]
    fn beta_scaling_scales_amplitudes_by_sqrt() {
        let config = small_config();
        let (_, cs1, _) = setup(&config);
        let scaled = SystemConfig { beta: config.beta * 4.0, ..config.clone() };
        let (_, cs2, _) = setup(&scaled);
        for (a, b) in cs1.cells.iter().zip(&cs2.cells) {
            assert!(((b.h_bu.norm() / a.h_bu.norm()) - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn coeff_helpers_match_direct_products() {
        let config = small_config();
        let (grid, cs, jlm) = setup(&config);
        let theta = random_phase_field(&grid, config.ris_elements, config.seed);
        let rho = crate::grid::uniform_density(&grid, 100.0, 1.0).unwrap();
        let mut w = DVector::from_fn(config.bs_antennas, |i, _| C64::new(0.5, i as f64 * 0.1));
        w /= C64::from(w.norm());
        let mut v = DVector::from_fn(config.jammer_antennas, |i, _| C64::new(1.0, -(i as f64)));
        v /= C64::from(v.norm());
        let j = [100.0, 40.0];

        // z_Bk via coefficients equals h_eff^H w via aggregate channel
        let cb = signal_coeffs(&cs, 0, &w);
        let z_direct: C64 = (0..grid.len())
            .map(|c| {
                let inner: C64 = cb[c]
                    .iter()
                    .zip(theta.theta[c].iter())
                    .map(|(cc, t)| cc * t)
                    .sum();
                inner * C64::from(rho.rho[c] * grid.cells[c].area)
            })
            .sum();
        let h_eff = effective_bs_channel(&theta, &rho, &cs, &grid, 0).unwrap();
        let z_agg: C64 = h_eff.iter().zip(w.iter()).map(|(h, wi)| h * wi).sum();
        assert!((z_direct - z_agg).norm() < 1e-9 * z_agg.norm());

        // z_Jk via coefficients equals the aggregate jamming channel
        let cj = jam_coeffs(&cs, &jlm, j, &v, 0);
        let zj_direct: C64 = (0..grid.len())
            .map(|c| {
                let inner: C64 = cj[c]
                    .iter()
                    .zip(theta.theta[c].iter())
                    .map(|(cc, t)| cc * t)
                    .sum();
                inner * C64::from(rho.rho[c] * grid.cells[c].area)
            })
            .sum();
        let zj = effective_jam_channel(&theta, &rho, &cs, &grid, &jlm, j, &v, 0).unwrap();
        assert!((zj_direct - zj).norm() < 1e-9 * zj.norm().max(1e-12));
    }
}
