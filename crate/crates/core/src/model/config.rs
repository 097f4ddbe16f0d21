use crate::error::{Error, Result};

/// Architecture constants of the five networks.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Side of the square observation grid.
    pub grid_size: usize,
    pub channels: usize,
    /// Scene tokens `L`; must be a square number whose root divides `grid_size`.
    pub tokens: usize,
    /// Latent width `C`.
    pub width: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub wm_layers: usize,
    pub ff_mult: usize,
    /// Waypoints per trajectory `T`.
    pub horizon: usize,
    /// Reasoning steps `K`.
    pub segments: usize,
    /// Waypoints per segment `N`.
    pub segment_len: usize,
    /// Metres represented by one unit of network position output.
    pub traj_scale: f64,
    /// Velocity and speed normaliser for network inputs.
    pub v_max: f64,
    /// Whether the summarizer pools the input latent `z⁽⁰⁾` as well.
    pub include_z0: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            grid_size: 32,
            channels: 5,
            tokens: 16,
            width: 64,
            heads: 4,
            encoder_layers: 1,
            wm_layers: 2,
            ff_mult: 2,
            horizon: 8,
            segments: 4,
            segment_len: 2,
            traj_scale: 10.0,
            v_max: 15.0,
            include_z0: true,
        }
    }
}

impl ModelConfig {
    /// Configuration used by the end-to-end gradient check.
    pub fn miniature() -> Self {
        Self { grid_size: 8, tokens: 4, width: 16, heads: 2, ..Self::default() }
    }

    /// Side length of one square patch in cells.
    pub fn patch(&self) -> usize {
        self.grid_size / self.tokens_per_side()
    }

    pub fn tokens_per_side(&self) -> usize {
        (self.tokens as f64).sqrt().round() as usize
    }

    pub fn patch_dim(&self) -> usize {
        self.patch() * self.patch() * self.channels
    }

    pub fn validate(&self) -> Result<()> {
        let side = self.tokens_per_side();
        if side == 0 || side * side != self.tokens {
            return Err(Error::Config(format!("token count L={} is not a square number", self.tokens)));
        }
        if !self.grid_size.is_multiple_of(side) {
            return Err(Error::Config(format!("grid size {} not divisible into {side}×{side} patches", self.grid_size)));
        }
        if self.segments == 0 || self.segments * self.segment_len != self.horizon {
            return Err(Error::Config(format!(
                "K·N must equal T: {}·{} ≠ {}",
                self.segments, self.segment_len, self.horizon
            )));
        }
        if self.width == 0 || self.heads == 0 || !self.width.is_multiple_of(self.heads) {
            return Err(Error::Config(format!("width {} not divisible by {} heads", self.width, self.heads)));
        }
        if !(self.traj_scale > 0.0 && self.v_max > 0.0) {
            return Err(Error::Config("traj_scale and v_max must be positive".into()));
        }
        Ok(())
    }
}

/// Trajectory supervision during the think warm-up.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WarmupTarget {
    /// Supervise only the refined plan, as if every flag were set.
    Refined,
    /// Supervise both plans: `e_init + e_ref`.
    Both,
}

/// How the ℓ1 distances of the latent consistency term are reduced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatentNorm {
    /// Sum over all `L×C` elements (the literal ℓ1 norm).
    Sum,
    /// Mean over elements; equivalent to dividing λ1 by `L·C`.
    Mean,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperParams {
    pub alpha: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub eps: f64,
    pub tau: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Initial steps during which `warmup_target` replaces the gated
    /// trajectory term, so the summarizer receives gradient before the gate
    /// can select it.
    pub think_warmup_steps: u64,
    pub warmup_target: WarmupTarget,
    pub latent_norm: LatentNorm,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            lambda1: 0.1,
            lambda2: 0.1,
            eps: 1e-6,
            tau: 0.5,
            lr: 1e-3,
            epochs: 30,
            batch_size: 32,
            think_warmup_steps: 300,
            warmup_target: WarmupTarget::Refined,
            latent_norm: LatentNorm::Sum,
            seed: 0,
        }
    }
}

impl HyperParams {
    /// Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("eps must be positive".into()));
        }
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return Err(Error::Config("lambda1 and lambda2 must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config("tau must lie in [0,1]".into()));
        }
        if self.batch_size == 0 || !(self.lr > 0.0) {
            return Err(Error::Config("batch size and learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_consistent() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!((c.patch(), c.patch_dim()), (8, 320));
        ModelConfig::miniature().validate().unwrap();
        HyperParams::default().validate().unwrap();
    }

    #[test]
    fn rejects_indivisible_horizon_and_bad_tokens() {
        let c = ModelConfig { segments: 3, segment_len: 3, ..ModelConfig::default() };
        assert!(c.validate().is_err());
        let c = ModelConfig { tokens: 12, ..ModelConfig::default() };
        assert!(c.validate().is_err());
        let h = HyperParams { alpha: 1.0, ..HyperParams::default() };
        assert!(h.validate().is_err());
    }
}
