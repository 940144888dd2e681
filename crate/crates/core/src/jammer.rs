//! Worst-case adversary: optimal jamming beamformer and position.
//!
//! For a fixed position the optimal beamformer is the principal
//! eigenvector of the jamming covariance (a Rayleigh-quotient
//! problem). The position search combines projected gradient ascent
//! inside the uncertainty disk with a boundary candidate refined along
//! the circle, and returns the better of the two.
//!
//! The covariance derivative with respect to the position is taken by
//! central finite differences of the covariance itself; the top
//! eigenvalue gradient then follows from first-order eigenvalue
//! perturbation. When the top eigenvalue is (near) degenerate the
//! gradient falls back to finite differences of the eigenvalue.

use crate::channel::{ChannelSet, JammerLinkModel};
use crate::grid::{DensityField, Grid};
use crate::ris::PhaseField;
use crate::C64;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// The adversary's chosen position and beamformer.
#[derive(Debug, Clone)]
pub struct JammerStrategy {
    pub position: [f64; 2],
    pub beamformer: DVector<C64>,
    pub lambda_max: f64,
    /// Set when the landscape gradient vanished at the estimate and
    /// no informed move was possible.
    pub flat: bool,
}

/// Jamming covariance `R(j) = sum_k b_k b_k^H` and its components.
#[derive(Debug, Clone)]
pub struct JamCovariance {
    pub r: DMatrix<C64>,
    pub b: Vec<DVector<C64>>,
}

/// Read-only bundle of everything the adversary reacts to.
#[derive(Clone, Copy)]
pub struct JammerContext<'a> {
    pub theta: &'a PhaseField,
    pub rho: &'a DensityField,
    pub channels: &'a ChannelSet,
    pub grid: &'a Grid,
    pub jlm: &'a JammerLinkModel,
}

impl<'a> JammerContext<'a> {
    /// `b_k(j) = sum_c H_JU^H Theta^H h_Uk rho dA`, exploiting the
    /// rank-one factored jammer link.
    pub fn covariance(&self, j: [f64; 2]) -> JamCovariance {
        let l = self.jlm.jammer_antennas;
        let users = self.channels.cells[0].h_uk.len();
        let mut b = vec![DVector::<C64>::zeros(l); users];
        for (c, cell) in self.channels.cells.iter().enumerate() {
            let weight = self.rho.rho[c] * self.grid.cells[c].area;
            if weight == 0.0 {
                continue;
            }
            let link = self.jlm.link(c, j);
            for (k, bk) in b.iter_mut().enumerate() {
                // s = h_Uk^H Theta a_ris
                let s: C64 = cell.h_uk[k]
                    .iter()
                    .zip(self.theta.theta[c].iter())
                    .zip(link.a_ris.iter())
                    .map(|((h, t), a)| h.conj() * t * a)
                    .sum();
                let scale = C64::from(weight * link.amplitude) * s.conj();
                bk.axpy(scale, &link.a_jam, C64::from(1.0));
            }
        }
        let mut r = DMatrix::<C64>::zeros(l, l);
        for bk in &b {
            r += bk * bk.adjoint();
        }
        JamCovariance { r, b }
    }

    pub fn lambda_max(&self, j: [f64; 2]) -> f64 {
        principal_eigpair(&self.covariance(j).r).0
    }

    /// Gradient of the top eigenvalue with respect to the jammer
    /// position, via `v^H (dR/dj) v` with `dR/dj` from central
    /// differences (step `fd_step` meters).
    pub fn lambda_max_gradient(&self, j: [f64; 2], fd_step: f64) -> [f64; 2] {
        let cov = self.covariance(j);
        let eig = sorted_eigs(&cov.r);
        let lam1 = eig.0[0];
        let degenerate = eig.0.len() > 1 && (lam1 - eig.0[1]).abs() <= 1e-9 * lam1.abs().max(1e-300);
        let mut grad = [0.0; 2];
        for axis in 0..2 {
            let mut jp = j;
            let mut jm = j;
            jp[axis] += fd_step;
            jm[axis] -= fd_step;
            if degenerate {
                // fall back to differencing the eigenvalue itself
                grad[axis] = (self.lambda_max(jp) - self.lambda_max(jm)) / (2.0 * fd_step);
            } else {
                let v = eig.1.column(eig.2[0]);
                let dr = (self.covariance(jp).r - self.covariance(jm).r) / C64::from(2.0 * fd_step);
                grad[axis] = (v.adjoint() * dr * v)[(0, 0)].re;
            }
        }
        grad
    }

    /// Samples the eigenvalue landscape over the uncertainty disk on a
    /// regular grid; rows are `(j_x, j_y, lambda_max)`.
    pub fn landscape(&self, j_hat: [f64; 2], epsilon: f64, per_axis: usize) -> Vec<(f64, f64, f64)> {
        let mut rows = Vec::new();
        let n = per_axis.max(1);
        for iy in 0..n {
            for ix in 0..n {
                let frac = |i: usize| {
                    if n == 1 {
                        0.0
                    } else {
                        -1.0 + 2.0 * i as f64 / (n - 1) as f64
                    }
                };
                let x = j_hat[0] + epsilon * frac(ix);
                let y = j_hat[1] + epsilon * frac(iy);
                if (x - j_hat[0]).hypot(y - j_hat[1]) <= epsilon + 1e-12 {
                    rows.push((x, y, self.lambda_max([x, y])));
                }
            }
        }
        rows
    }
}

/// Deterministic full Hermitian decomposition: eigenvalues, the
/// eigenvector matrix, and the index order sorted descending.
fn sorted_eigs(r: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>, Vec<usize>) {
    let eig = SymmetricEigen::new(r.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    (vals, eig.eigenvectors, order)
}

/// Top eigenpair of a Hermitian PSD matrix. The eigenvector's global
/// phase is fixed by making its largest-magnitude entry real-positive.
pub fn principal_eigpair(r: &DMatrix<C64>) -> (f64, DVector<C64>) {
    let (vals, vecs, order) = sorted_eigs(r);
    let mut v: DVector<C64> = vecs.column(order[0]).into_owned();
    let mut imax = 0;
    for i in 1..v.len() {
        if v[i].norm() > v[imax].norm() {
            imax = i;
        }
    }
    if v[imax].norm() > 0.0 {
        let phase = v[imax] / C64::from(v[imax].norm());
        v /= phase;
    }
    let n = v.norm();
    if n > 0.0 {
        v /= C64::from(n);
    }
    (vals[0], v)
}

#[derive(Debug, Clone)]
pub struct JamOpts {
    /// Initial interior ascent step, meters.
    pub step: f64,
    /// Finite-difference step for the covariance derivative, meters.
    pub fd_step: f64,
    pub max_iters: usize,
}

impl Default for JamOpts {
    fn default() -> Self {
        Self {
            step: 0.5,
            fd_step: 0.01,
            max_iters: 100,
        }
    }
}

fn project_to_disk(x: [f64; 2], center: [f64; 2], radius: f64) -> [f64; 2] {
    let d = [x[0] - center[0], x[1] - center[1]];
    let norm = d[0].hypot(d[1]);
    if norm <= radius {
        x
    } else {
        let s = radius / norm;
        [center[0] + d[0] * s, center[1] + d[1] * s]
    }
}

/// Worst-case jammer inside the uncertainty disk of radius `epsilon`
/// around the estimate.
pub fn optimize_jammer(
    ctx: &JammerContext,
    j_hat: [f64; 2],
    epsilon: f64,
    opts: &JamOpts,
) -> JammerStrategy {
    let strategy_at = |j: [f64; 2], flat: bool| {
        let cov = ctx.covariance(j);
        let (lambda_max, beamformer) = principal_eigpair(&cov.r);
        JammerStrategy {
            position: j,
            beamformer,
            lambda_max,
            flat,
        }
    };

    if epsilon == 0.0 {
        return strategy_at(j_hat, false);
    }

    // Flatness is judged against the eigenvalue's own scale: the
    // landscape is flat when the best first-order move across the
    // whole disk would not change lambda in the 12th digit.
    let lam_hat = ctx.lambda_max(j_hat);
    let lam_scale = lam_hat.max(f64::MIN_POSITIVE);
    let g0 = ctx.lambda_max_gradient(j_hat, opts.fd_step);
    if g0[0].hypot(g0[1]) * epsilon < 1e-12 * lam_scale {
        return strategy_at(j_hat, true);
    }
    let grad_floor = 1e-14 * lam_scale / epsilon;

    // The array-response factors make the landscape oscillatory, so
    // single-start ascent can stall in a nearby ripple. Rank a
    // deterministic sample of the disk plus a boundary ring, then
    // refine the best starts by projected gradient ascent.
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut starts: Vec<[f64; 2]> = vec![j_hat];
    let n_sun = 96;
    for i in 0..n_sun {
        let r = epsilon * ((i as f64 + 0.5) / n_sun as f64).sqrt();
        let phi = i as f64 * golden;
        starts.push([j_hat[0] + r * phi.cos(), j_hat[1] + r * phi.sin()]);
    }
    let on_circle = |phi: f64| {
        [
            j_hat[0] + epsilon * phi.cos(),
            j_hat[1] + epsilon * phi.sin(),
        ]
    };
    for i in 0..36 {
        starts.push(on_circle(2.0 * std::f64::consts::PI * i as f64 / 36.0));
    }
    let mut scored: Vec<([f64; 2], f64)> = starts
        .into_iter()
        .map(|s| (s, ctx.lambda_max(s)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let mut best = scored[0];

    // Projected gradient ascent from the leading starts.
    for &(start, lam0) in scored.iter().take(8) {
        let mut x = start;
        let mut lam_x = lam0;
        let mut step = opts.step;
        let mut g = ctx.lambda_max_gradient(x, opts.fd_step);
        for _ in 0..opts.max_iters {
            if step < 1e-3 {
                break;
            }
            let gn = g[0].hypot(g[1]);
            if gn < grad_floor {
                break;
            }
            let cand = project_to_disk(
                [x[0] + step * g[0] / gn, x[1] + step * g[1] / gn],
                j_hat,
                epsilon,
            );
            let lam_c = ctx.lambda_max(cand);
            if lam_c > lam_x {
                x = cand;
                lam_x = lam_c;
                g = ctx.lambda_max_gradient(x, opts.fd_step);
            } else {
                step *= 0.5;
            }
        }
        if lam_x > best.1 {
            best = (x, lam_x);
        }
    }

    // Boundary candidate along the gradient at the estimate, refined
    // by ascent along the circle.
    let mut phi = g0[1].atan2(g0[0]);
    let mut lam_bd = ctx.lambda_max(on_circle(phi));
    let mut pstep = 0.25;
    for _ in 0..opts.max_iters {
        if pstep < 1e-4 {
            break;
        }
        let g = ctx.lambda_max_gradient(on_circle(phi), opts.fd_step);
        let tangent = [-phi.sin(), phi.cos()];
        let d = g[0] * tangent[0] + g[1] * tangent[1];
        if d.abs() < grad_floor {
            break;
        }
        let cand_phi = phi + pstep * d.signum();
        let lam_c = ctx.lambda_max(on_circle(cand_phi));
        if lam_c > lam_bd {
            phi = cand_phi;
            lam_bd = lam_c;
        } else {
            pstep *= 0.5;
        }
    }
    if lam_bd > best.1 {
        best = (on_circle(phi), lam_bd);
    }
    strategy_at(best.0, false)
}
