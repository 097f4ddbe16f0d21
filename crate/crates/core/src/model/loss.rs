//! Training objective: trajectory errors, refinement gain, thinking flag and
//! the three weighted loss terms. Scalar versions operate on plain values;
//! the `*_var` versions build the same expressions in a [`Graph`].

use super::config::LatentNorm;
use super::trajectory::Trajectory;
use crate::error::{shape_err, Error, Result};
use crate::tensor::{wrap_angle, Graph, Tensor, Var};

pub const D_CLAMP: f64 = 1e-7;

/// Sum of absolute differences over all `T×3` entries; the heading residual
/// is wrapped to `(−π, π]` first.
pub fn l1_error(w: &Trajectory, w_gt: &Trajectory) -> Result<f64> {
    if w.len() != w_gt.len() {
        return Err(shape_err("l1_error", &[w.len(), 3], &[w_gt.len(), 3]));
    }
    Ok(w.waypoints
        .iter()
        .zip(&w_gt.waypoints)
        .map(|(a, b)| (a[0] - b[0]).abs() + (a[1] - b[1]).abs() + wrap_angle(a[2] - b[2]).abs())
        .sum())
}

/// `(e_init − e_ref) / (e_init + ε)`.
pub fn refinement_gain(e_init: f64, e_ref: f64, eps: f64) -> f64 {
    (e_init - e_ref) / (e_init + eps)
}

/// `r > α`, strictly.
pub fn thinking_flag(r: f64, alpha: f64) -> bool {
    r > alpha
}

/// Mean over `k` of the reduced ℓ1 distance between chain element `k` and
/// its target; `chain` holds `z⁽⁰⁾..z⁽ᴷ⁾` and `targets` the `K` futures.
pub fn latent_consistency_loss(chain: &[Tensor], targets: &[Tensor], norm: LatentNorm) -> Result<f64> {
    if chain.len() != targets.len() + 1 || targets.is_empty() {
        return Err(Error::Invalid(format!("chain of {} latents needs {} targets, got {}", chain.len(), chain.len().saturating_sub(1), targets.len())));
    }
    let mut total = 0.0;
    for (z, t) in chain[1..].iter().zip(targets) {
        if z.shape() != t.shape() {
            return Err(shape_err("latent_consistency_loss", z.shape(), t.shape()));
        }
        let s: f64 = z.data().iter().zip(t.data()).map(|(a, b)| (a - b).abs()).sum();
        total += match norm {
            LatentNorm::Sum => s,
            LatentNorm::Mean => s / z.len() as f64,
        };
    }
    Ok(total / targets.len() as f64)
}

/// `g·e_ref + (1 − g)·e_init`.
pub fn trajectory_loss(g: bool, e_ref: f64, e_init: f64) -> f64 {
    let g = if g { 1.0 } else { 0.0 };
    g * e_ref + (1.0 - g) * e_init
}

/// Binary cross-entropy of score `d` (clamped to `[1e-7, 1 − 1e-7]`) against `y`.
pub fn auto_think_loss(d: f64, y: bool) -> f64 {
    let d = d.clamp(D_CLAMP, 1.0 - D_CLAMP);
    if y {
        -d.ln()
    } else {
        -(1.0 - d).ln()
    }
}

/// `l_traj + λ1·l_lat + λ2·l_auto`.
pub fn total_loss(l_traj: f64, l_lat: f64, l_auto: f64, lambda1: f64, lambda2: f64) -> f64 {
    l_traj + lambda1 * l_lat + lambda2 * l_auto
}

/// Graph form of [`l1_error`] for `T×3` variables.
pub fn l1_error_var(g: &mut Graph, w: Var, w_gt: Var) -> Result<Var> {
    if g.shape(w) != g.shape(w_gt) || g.shape(w).len() != 2 || g.shape(w)[1] != 3 {
        return Err(shape_err("l1_error", g.shape(w), g.shape(w_gt)));
    }
    let d = g.sub(w, w_gt)?;
    let pos = g.slice(d, 1, 0..2)?;
    let th = g.slice(d, 1, 2..3)?;
    let th = g.wrap_angle(th)?;
    let pos = g.abs(pos)?;
    let th = g.abs(th)?;
    let a = g.sum_all(pos)?;
    let b = g.sum_all(th)?;
    g.add(a, b)
}

/// Graph form of [`latent_consistency_loss`]. Targets enter as constants, so
/// no gradient reaches whatever produced them.
pub fn latent_consistency_var(g: &mut Graph, chain: &[Var], targets: &[Tensor], norm: LatentNorm) -> Result<Var> {
    if chain.len() != targets.len() + 1 || targets.is_empty() {
        return Err(Error::Invalid(format!("chain of {} latents needs {} targets, got {}", chain.len(), chain.len().saturating_sub(1), targets.len())));
    }
    let mut terms = Vec::with_capacity(targets.len());
    for (&z, t) in chain[1..].iter().zip(targets) {
        let tv = g.constant(t.clone());
        if g.shape(z) != t.shape() {
            return Err(shape_err("latent_consistency_loss", g.shape(z), t.shape()));
        }
        let d = g.sub(z, tv)?;
        let d = g.abs(d)?;
        terms.push(match norm {
            LatentNorm::Sum => g.sum_all(d)?,
            LatentNorm::Mean => g.mean_all(d)?,
        });
    }
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = g.add(acc, t)?;
    }
    g.scale(acc, 1.0 / targets.len() as f64)
}

/// Graph form of [`trajectory_loss`]: returns the selected error itself so
/// the unselected branch receives no gradient.
pub fn trajectory_loss_var(flag: bool, e_ref: Var, e_init: Var) -> Var {
    if flag {
        e_ref
    } else {
        e_init
    }
}

/// Graph form of [`auto_think_loss`] for a scalar score variable.
pub fn auto_think_var(g: &mut Graph, d: Var, y: bool) -> Result<Var> {
    let d = g.clamp(d, D_CLAMP, 1.0 - D_CLAMP)?;
    let p = if y { d } else {
        let neg = g.scale(d, -1.0)?;
        g.add_scalar(neg, 1.0)?
    };
    let l = g.ln(p)?;
    g.scale(l, -1.0)
}

/// Graph form of [`total_loss`].
pub fn total_loss_var(g: &mut Graph, l_traj: Var, l_lat: Var, l_auto: Var, lambda1: f64, lambda2: f64) -> Result<Var> {
    let a = g.scale(l_lat, lambda1)?;
    let b = g.scale(l_auto, lambda2)?;
    let s = g.add(l_traj, a)?;
    g.add(s, b)
}
