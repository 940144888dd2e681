//! Riemannian optimization of the continuous RIS phase field.
//!
//! The feasible set is a product of unit circles, one per (cell,
//! element). The optimizer runs gradient ascent with tangent-space
//! projection, per-entry normalization retraction, and a backtracking
//! line search that only accepts strictly improving steps, so the
//! objective trace is non-decreasing by construction.
//!
//! Gradient convention: `grad[c][n]` is the conjugate (Wirtinger)
//! gradient of the discretized sum-rate, i.e. the directional
//! derivative along a perturbation `d` equals
//! `sum_{c,n} 2*Re(conj(grad[c][n]) * d[c][n]) * area[c]`.
//! The finite-difference tests pin this convention.

use crate::channel::{ChannelSet, JammerLinkModel};
use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid};
use crate::rng::{substream, STREAM_PHASE_INIT};
use crate::C64;
use nalgebra::DVector;
use rand::Rng;

/// Per-cell, per-element unit-modulus RIS coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    pub theta: Vec<DVector<C64>>,
}

impl PhaseField {
    pub fn check_unit_modulus(&self, tol: f64) -> Result<()> {
        for (c, t) in self.theta.iter().enumerate() {
            for (n, x) in t.iter().enumerate() {
                if (x.norm() - 1.0).abs() > tol {
                    return Err(Error::Contract(format!(
                        "|theta[{c}][{n}]| = {} violates unit modulus",
                        x.norm()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Uniform random phases from the "phase-init" substream.
pub fn random_phase_field(grid: &Grid, elements: usize, seed: u64) -> PhaseField {
    let mut rng = substream(seed, STREAM_PHASE_INIT);
    let theta = (0..grid.len())
        .map(|_| {
            DVector::from_iterator(
                elements,
                (0..elements).map(|_| {
                    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * rng.gen::<f64>())
                }),
            )
        })
        .collect();
    PhaseField { theta }
}

/// All-ones phase field (no phase shift), mostly for tests.
pub fn unit_phase_field(cells: usize, elements: usize) -> PhaseField {
    PhaseField {
        theta: vec![DVector::from_element(elements, C64::new(1.0, 0.0)); cells],
    }
}

/// Per-user scalars of the gradient assembly, snapshotted at one phase
/// field.
#[derive(Debug, Clone)]
pub struct GradientWorkspace {
    /// z_B,k = h_eff,B,k^H w_k.
    pub z_b: Vec<C64>,
    /// z_J,k = h_eff,J,k.
    pub z_j: Vec<C64>,
    /// c_k = |z_J,k|^2 P_J + sigma_k^2.
    pub c: Vec<f64>,
    /// gamma_k = |z_B,k|^2 / c_k (interference-free ZF form).
    pub gamma: Vec<f64>,
}

/// The phase sub-problem with all channel dependencies cached as
/// per-cell cascade coefficients. For fixed precoders and jammer the
/// aggregate channels are linear in the phase entries, so every
/// evaluation is a weighted sum over these coefficients.
pub struct PhaseProblem {
    /// cb[k][i][cell][n]: coefficient of h_eff,B,k^H w_i.
    cb: Vec<Vec<Vec<DVector<C64>>>>,
    /// cj[k][cell][n]: coefficient of h_eff,J,k.
    cj: Vec<Vec<DVector<C64>>>,
    /// rho * area per cell.
    weights: Vec<f64>,
    pub areas: Vec<f64>,
    rho: Vec<f64>,
    pub p_jam: f64,
    pub noise: Vec<f64>,
    users: usize,
}

impl PhaseProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        channels: &ChannelSet,
        grid: &Grid,
        rho: &DensityField,
        precoders: &[DVector<C64>],
        jlm: &JammerLinkModel,
        jammer_pos: [f64; 2],
        jammer_beam: &DVector<C64>,
        p_jam: f64,
        noise: f64,
    ) -> Self {
        let users = precoders.len();
        let cb: Vec<Vec<Vec<DVector<C64>>>> = (0..users)
            .map(|k| {
                (0..users)
                    .map(|i| crate::channel::signal_coeffs(channels, k, &precoders[i]))
                    .collect()
            })
            .collect();
        let cj: Vec<Vec<DVector<C64>>> = (0..users)
            .map(|k| crate::channel::jam_coeffs(channels, jlm, jammer_pos, jammer_beam, k))
            .collect();
        let weights = (0..grid.len())
            .map(|c| rho.rho[c] * grid.cells[c].area)
            .collect();
        PhaseProblem {
            cb,
            cj,
            weights,
            areas: grid.areas(),
            rho: rho.rho.clone(),
            p_jam,
            noise: vec![noise; users],
            users,
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    fn aggregate_with(coeffs: &[DVector<C64>], theta: &PhaseField, weights: &[f64]) -> C64 {
        coeffs
            .iter()
            .zip(&theta.theta)
            .zip(weights)
            .map(|((c, t), &w)| {
                let inner: C64 = c.iter().zip(t.iter()).map(|(ci, ti)| ci * ti).sum();
                inner * C64::from(w)
            })
            .sum()
    }

    fn aggregate(&self, coeffs: &[DVector<C64>], theta: &PhaseField) -> C64 {
        Self::aggregate_with(coeffs, theta, &self.weights)
    }

    /// Honest sum-rate at a density other than the one the problem was
    /// built with; the cached coefficients are density-independent.
    pub fn sum_rate_with_density(&self, theta: &PhaseField, rho: &[f64]) -> f64 {
        let weights: Vec<f64> = rho.iter().zip(&self.areas).map(|(r, a)| r * a).collect();
        (0..self.users)
            .map(|k| {
                let signal =
                    Self::aggregate_with(&self.cb[k][k], theta, &weights).norm_sqr();
                let leak: f64 = (0..self.users)
                    .filter(|&i| i != k)
                    .map(|i| Self::aggregate_with(&self.cb[k][i], theta, &weights).norm_sqr())
                    .sum();
                let zj = Self::aggregate_with(&self.cj[k], theta, &weights);
                let denom = leak + zj.norm_sqr() * self.p_jam + self.noise[k];
                (1.0 + signal / denom).log2()
            })
            .sum()
    }

    /// Per-cell channel responses at a fixed phase field:
    /// `f[k][i][c] = sum_n cb[k][i][c][n] theta[c][n]` and
    /// `g[k][c] = sum_n cj[k][c][n] theta[c][n]`. These are independent
    /// of the density, so the aggregates are
    /// `z_B,k,i = sum_c rho[c] area[c] f[k][i][c]`.
    pub fn cell_responses(&self, theta: &PhaseField) -> (Vec<Vec<Vec<C64>>>, Vec<Vec<C64>>) {
        let inner = |coeffs: &[DVector<C64>]| -> Vec<C64> {
            coeffs
                .iter()
                .zip(&theta.theta)
                .map(|(c, t)| c.iter().zip(t.iter()).map(|(ci, ti)| ci * ti).sum())
                .collect()
        };
        let f = (0..self.users)
            .map(|k| (0..self.users).map(|i| inner(&self.cb[k][i])).collect())
            .collect();
        let g = (0..self.users).map(|k| inner(&self.cj[k])).collect();
        (f, g)
    }

    /// Per-cell response envelope Σ_n |cb[k][k][cell][n]|: the magnitude
    /// of the desired-signal response a cell could contribute for user k
    /// if its element phases were co-aligned for that user.
    pub fn response_envelopes(&self) -> Vec<Vec<f64>> {
        (0..self.users)
            .map(|k| {
                self.cb[k][k]
                    .iter()
                    .map(|c| c.iter().map(|ci| ci.norm()).sum())
                    .collect()
            })
            .collect()
    }

    /// Co-phasing warm start: for each flagged cell, aligns every element
    /// with the desired-signal coefficient of the user this cell serves
    /// best, so the cell contributes coherently from the first iteration.
    /// Unflagged cells keep their current phases.
    pub fn aligned_phases(&self, base: &PhaseField, realign: &[bool]) -> PhaseField {
        let env = self.response_envelopes();
        let theta = base
            .theta
            .iter()
            .enumerate()
            .map(|(c, t)| {
                if !realign[c] {
                    return t.clone();
                }
                let k_best = (0..self.users)
                    .max_by(|&a, &b| env[a][c].total_cmp(&env[b][c]))
                    .unwrap();
                DVector::from_iterator(
                    t.len(),
                    self.cb[k_best][k_best][c].iter().map(|ci| {
                        let n = ci.norm();
                        if n > 0.0 {
                            ci.conj() / C64::from(n)
                        } else {
                            C64::new(1.0, 0.0)
                        }
                    }),
                )
            })
            .collect();
        PhaseField { theta }
    }

    /// z_B,k,i = h_eff,B,k^H w_i for all user pairs, plus z_J,k.
    pub fn z_values(&self, theta: &PhaseField) -> (Vec<Vec<C64>>, Vec<C64>) {
        let zb = (0..self.users)
            .map(|k| {
                (0..self.users)
                    .map(|i| self.aggregate(&self.cb[k][i], theta))
                    .collect()
            })
            .collect();
        let zj = (0..self.users)
            .map(|k| self.aggregate(&self.cj[k], theta))
            .collect();
        (zb, zj)
    }

    /// Honest sum-rate: the inter-user leakage is computed, not
    /// assumed zero.
    pub fn sum_rate(&self, theta: &PhaseField) -> f64 {
        let (zb, zj) = self.z_values(theta);
        (0..self.users)
            .map(|k| {
                let signal = zb[k][k].norm_sqr();
                let leak: f64 = (0..self.users)
                    .filter(|&i| i != k)
                    .map(|i| zb[k][i].norm_sqr())
                    .sum();
                let denom = leak + zj[k].norm_sqr() * self.p_jam + self.noise[k];
                (1.0 + signal / denom).log2()
            })
            .sum()
    }

    /// Gradient scalars under the interference-free ZF convention.
    pub fn workspace(&self, theta: &PhaseField) -> GradientWorkspace {
        let (zb, zj) = self.z_values(theta);
        let z_b: Vec<C64> = (0..self.users).map(|k| zb[k][k]).collect();
        let c: Vec<f64> = (0..self.users)
            .map(|k| zj[k].norm_sqr() * self.p_jam + self.noise[k])
            .collect();
        let gamma = (0..self.users)
            .map(|k| z_b[k].norm_sqr() / c[k])
            .collect();
        GradientWorkspace { z_b, z_j: zj, c, gamma }
    }

    /// Conjugate Euclidean gradient of the sum-rate with respect to
    /// each phase entry (see module docs for the pairing convention).
    pub fn euclidean_gradient(&self, theta: &PhaseField) -> Vec<DVector<C64>> {
        let ws = self.workspace(theta);
        let ln2 = std::f64::consts::LN_2;
        let coef: Vec<f64> = (0..self.users)
            .map(|k| 1.0 / ((1.0 + ws.gamma[k]) * ln2))
            .collect();
        (0..self.rho.len())
            .map(|c| {
                let n = self.cb[0][0][c].len();
                DVector::from_iterator(
                    n,
                    (0..n).map(|e| {
                        let mut s = C64::new(0.0, 0.0);
                        for k in 0..self.users {
                            let b = ws.z_b[k] * self.cb[k][k][c][e].conj() / C64::from(ws.c[k]);
                            let cj = ws.z_b[k].norm_sqr() * self.p_jam / (ws.c[k] * ws.c[k]);
                            let ct = ws.z_j[k] * self.cj[k][c][e].conj() * C64::from(cj);
                            s += (b - ct) * C64::from(coef[k]);
                        }
                        s * C64::from(self.rho[c])
                    }),
                )
            })
            .collect()
    }
}

/// Removes the radial component so the perturbation stays tangent to
/// each unit circle.
pub fn tangent_project(theta: &PhaseField, g: &[DVector<C64>]) -> Vec<DVector<C64>> {
    theta
        .theta
        .iter()
        .zip(g)
        .map(|(t, gc)| {
            DVector::from_iterator(
                t.len(),
                t.iter().zip(gc.iter()).map(|(ti, gi)| {
                    let radial = (gi * ti.conj()).re;
                    gi - ti * C64::from(radial)
                }),
            )
        })
        .collect()
}

/// Per-entry normalization retraction. Fails if any updated entry is
/// numerically at the origin; callers halve the step and retry.
pub fn retract(theta: &PhaseField, xi: &[DVector<C64>], step: f64) -> Result<PhaseField> {
    let mut out = Vec::with_capacity(theta.theta.len());
    for (t, x) in theta.theta.iter().zip(xi) {
        let mut v = DVector::zeros(t.len());
        for i in 0..t.len() {
            let y = t[i] + x[i] * C64::from(step);
            let norm = y.norm();
            if norm < 1e-12 {
                return Err(Error::Domain(
                    "retraction hit the origin; reduce the step".into(),
                ));
            }
            v[i] = y / C64::from(norm);
        }
        out.push(v);
    }
    Ok(PhaseField { theta: out })
}

/// Area-weighted L2 norm of a tangent field.
pub fn weighted_norm(xi: &[DVector<C64>], areas: &[f64]) -> f64 {
    xi.iter()
        .zip(areas)
        .map(|(x, &a)| x.norm_squared() * a)
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone)]
pub struct PhaseOpts {
    pub max_iters: usize,
    /// Gradient-norm tolerance, relative to `1 + |R_sum|`.
    pub tol: f64,
    /// Stagnation tolerance: stop once the best available step
    /// improves the sum-rate by no more than this.
    pub rate_tol: f64,
    /// Initial step in tangent-norm units.
    pub initial_step: f64,
    pub max_halvings: usize,
}

impl Default for PhaseOpts {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol: 1e-5,
            rate_tol: 1e-4,
            initial_step: 1.0,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhaseOutcome {
    pub theta: PhaseField,
    /// Objective value after each accepted iteration, starting with
    /// the initial one. Non-decreasing.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Line-search step at exit; feeding it back as `initial_step`
    /// makes a re-entered optimizer stop where it left off.
    pub final_step: f64,
}

/// Riemannian gradient ascent with backtracking. Accepts a step only
/// if the sum-rate strictly increases.
pub fn optimize_phases(problem: &PhaseProblem, theta0: PhaseField, opts: &PhaseOpts) -> PhaseOutcome {
    let mut theta = theta0;
    let mut rate = problem.sum_rate(&theta);
    let mut trace = vec![rate];
    let mut converged = false;
    let mut iterations = 0;
    // warm-started step: doubled after a clean acceptance, carried
    // over at the backtracked scale otherwise
    let mut step = opts.initial_step;
    for _ in 0..opts.max_iters {
        let g = problem.euclidean_gradient(&theta);
        let xi = tangent_project(&theta, &g);
        let gn = weighted_norm(&xi, &problem.areas);
        if gn < opts.tol * (1.0 + rate.abs()) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        for halving in 0..=opts.max_halvings {
            if let Ok(cand) = retract(&theta, &xi, step / gn) {
                let cand_rate = problem.sum_rate(&cand);
                if cand_rate > rate {
                    theta = cand;
                    rate = cand_rate;
                    accepted = true;
                    if halving == 0 {
                        step *= 2.0;
                    }
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // no improving step at any scale: numerically stationary
            converged = true;
            break;
        }
        trace.push(rate);
        // a sub-threshold best step means further progress would be
        // below the caller's resolution; stopping here keeps the stop
        // stable when the optimizer is re-entered at the same point
        if rate - trace[trace.len() - 2] <= opts.rate_tol {
            converged = true;
            break;
        }
    }
    PhaseOutcome {
        theta,
        trace,
        iterations,
        converged,
        final_step: step,
    }
}
