//! Zero-forcing directions and exact water-filling power allocation.
//!
//! The aggregate downlink channel matrix has one row per user. The
//! precoder directions are the normalized columns of the right
//! pseudoinverse, which nulls inter-user leakage; power is then split
//! across users by water-filling against each user's effective
//! interference-plus-noise level.

use crate::error::{Error, Result};
use crate::C64;
use nalgebra::{DMatrix, DVector};

/// Precoders and the allocation that produced them.
#[derive(Debug, Clone)]
pub struct BeamformSet {
    /// Power-scaled precoders, w_k = sqrt(p_k) * w_tilde_k.
    pub w: Vec<DVector<C64>>,
    /// Unit-norm zero-forcing directions.
    pub w_tilde: Vec<DVector<C64>>,
    pub powers: Vec<f64>,
    pub water_level: f64,
    /// gains[k] = |h_k^H w_tilde_k|, the per-unit-power amplitude.
    pub gains: Vec<f64>,
}

/// Unit-norm-column zero-forcing matrix for a channel with one user
/// row per user. Fails when the row space is too ill-conditioned for
/// the inverse to be trustworthy.
pub fn zf_matrix(h: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let k = h.nrows();
    let svd = h.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond < 1e8) {
        return Err(Error::SingularChannel { cond });
    }
    let gram = h * h.adjoint();
    let inv = gram
        .try_inverse()
        .ok_or(Error::SingularChannel { cond })?;
    let mut w = h.adjoint() * inv;
    for i in 0..k {
        let norm = w.column(i).norm();
        if norm == 0.0 {
            return Err(Error::SingularChannel { cond });
        }
        let mut col = w.column_mut(i);
        col /= C64::from(norm);
    }
    Ok(w)
}

/// Exact water-filling: maximizes `sum_k log2(1 + p_k / levels[k])`
/// subject to `sum p_k = p`, `p_k >= 0`. Returns the per-user powers
/// and the water level mu, with `p_k = max(0, mu - levels[k])`.
pub fn water_fill(levels: &[f64], p: f64) -> Result<(Vec<f64>, f64)> {
    let k = levels.len();
    if k == 0 {
        return Err(Error::Domain("water_fill needs at least one user".into()));
    }
    if p < 0.0 || !p.is_finite() {
        return Err(Error::Domain(format!("total power {p} must be finite and >= 0")));
    }
    for (i, &l) in levels.iter().enumerate() {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Domain(format!("levels[{i}] = {l} must be positive")));
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| levels[a].partial_cmp(&levels[b]).unwrap().then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| levels[i]).collect();
    let mut prefix = 0.0;
    let mut mu = sorted[0];
    for m in 1..=k {
        prefix += sorted[m - 1];
        let cand = (p + prefix) / m as f64;
        // valid iff every inactive level sits above the water line
        if cand >= sorted[m - 1] && (m == k || cand <= sorted[m]) {
            mu = cand;
            break;
        }
    }
    let powers: Vec<f64> = levels.iter().map(|&l| (mu - l).max(0.0)).collect();
    Ok((powers, mu))
}

/// Zero-forcing directions plus water-filled powers. `denoms[k]` is
/// the user's interference-plus-noise power (jamming leakage plus
/// noise); the water-filling levels are `denoms[k] / gains[k]^2` so
/// the resulting SINRs are exactly `p_k / levels[k]`.
pub fn compose_beamformers(h: &DMatrix<C64>, denoms: &[f64], p: f64) -> Result<BeamformSet> {
    let k = h.nrows();
    if denoms.len() != k {
        return Err(Error::Contract(format!(
            "{} denominators for {} users",
            denoms.len(),
            k
        )));
    }
    let wt = zf_matrix(h)?;
    let gains: Vec<f64> = (0..k)
        .map(|i| (h.row(i) * wt.column(i))[(0, 0)].norm())
        .collect();
    let levels: Vec<f64> = (0..k).map(|i| denoms[i] / (gains[i] * gains[i])).collect();
    let (powers, water_level) = water_fill(&levels, p)?;
    let w_tilde: Vec<DVector<C64>> = (0..k).map(|i| wt.column(i).into_owned()).collect();
    let w = w_tilde
        .iter()
        .zip(&powers)
        .map(|(wk, &pk)| wk * C64::from(pk.sqrt()))
        .collect();
    Ok(BeamformSet {
        w,
        w_tilde,
        powers,
        water_level,
        gains,
    })
}
