use super::config::ModelConfig;
use crate::error::{shape_err, Error, Result};
use crate::nn::{Activation, Init, Linear, Mlp, ParamId, ParamRegistry, ParamVars, TransformerStack};
use crate::sim::{Observation, CH_VX, CH_VY};
use crate::tensor::{Graph, Tensor, Var};

/// Parameter-name prefix of each sub-network.
pub const ENCODER: &str = "enc";
pub const POLICY: &str = "pi";
pub const SEGMENT_ENCODER: &str = "etraj";
pub const WORLD_MODEL: &str = "wm";
pub const SUMMARIZER: &str = "sum";
pub const GATE: &str = "gate";

/// The five networks: scene encoder, policy `π`, segment encoder `E_traj`,
/// world model `W`, summarizer `S` and auto-think gate `G`. Parameters live
/// in `params`; every forward method takes a graph and the bound variables.
#[derive(Clone, Debug)]
pub struct FutureX {
    pub config: ModelConfig,
    pub params: ParamRegistry,
    patch_embed: Linear,
    pos_embed: ParamId,
    speed_embed: Linear,
    encoder: TransformerStack,
    enc_norm: (ParamId, ParamId),
    policy: Mlp,
    segment_encoder: Mlp,
    world_model: TransformerStack,
    plan_embed: Linear,
    summarizer: Mlp,
    gate: Mlp,
}

impl FutureX {
    /// Registers every parameter and initialises them from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let c = config.width;
        let t = config.horizon;
        let mut reg = ParamRegistry::new();
        let patch_embed = Linear::new(&mut reg, "enc.patch", config.patch_dim(), c, 1.0)?;
        let pos_embed = reg.register("enc.pos", &[config.tokens, c], Init::FanIn { fan_in: 1, gain: 0.1 })?;
        let speed_embed = Linear::new(&mut reg, "enc.speed", 1, c, 1.0)?;
        let encoder = TransformerStack::new(&mut reg, "enc.tf", config.encoder_layers, c, config.heads, config.ff_mult)?;
        let enc_norm = (
            reg.register("enc.ln.g", &[c], Init::Ones)?,
            reg.register("enc.ln.b", &[c], Init::Zeros)?,
        );
        let policy = Mlp::new(&mut reg, "pi.mlp", &[c, 2 * c, 2 * c, 4 * t], Activation::Gelu, 1.0)?;
        let segment_encoder = Mlp::new(&mut reg, "etraj.mlp", &[3 * config.segment_len, c, c], Activation::Gelu, 1.0)?;
        let world_model = TransformerStack::new(&mut reg, "wm.tf", config.wm_layers, c, config.heads, config.ff_mult)?;
        let plan_embed = Linear::new(&mut reg, "sum.plan", 3 * t, c, 1.0)?;
        let pooled = config.segments + usize::from(config.include_z0) + 1;
        // offsets start small so refinement begins near the identity
        let summarizer = Mlp::new(&mut reg, "sum.mlp", &[pooled * c, 2 * c, 2 * c, 3 * t], Activation::Gelu, 0.1)?;
        let gate = Mlp::new(&mut reg, "gate.mlp", &[c, c, 1], Activation::Gelu, 1.0)?;
        reg.init_params(seed);
        Ok(Self {
            config,
            params: reg,
            patch_embed,
            pos_embed,
            speed_embed,
            encoder,
            enc_norm,
            policy,
            segment_encoder,
            world_model,
            plan_embed,
            summarizer,
            gate,
        })
    }

    /// Enters all parameters into `g`.
    pub fn bind(&self, g: &mut Graph) -> ParamVars {
        self.params.bind(g)
    }

    /// Zeroes the summarizer's output layer so refinement is the identity.
    pub fn zero_summarizer_head(&mut self) {
        let head = self.summarizer.head().clone();
        self.params.get_mut(head.w).data_mut().fill(0.0);
        if let Some(b) = head.b {
            self.params.get_mut(b).data_mut().fill(0.0);
        }
    }

    /// Zeroes the policy's output layer.
    pub fn zero_policy_head(&mut self) {
        let head = self.policy.head().clone();
        self.params.get_mut(head.w).data_mut().fill(0.0);
        if let Some(b) = head.b {
            self.params.get_mut(b).data_mut().fill(0.0);
        }
    }

    /// Zeroes the gate's output layer so every score is exactly 0.5.
    pub fn zero_gate_head(&mut self) {
        let head = self.gate.head().clone();
        self.params.get_mut(head.w).data_mut().fill(0.0);
        if let Some(b) = head.b {
            self.params.get_mut(b).data_mut().fill(0.0);
        }
    }

    /// Splits an observation into `L` row-major patches, each flattened in
    /// `(channel, row, col)` order; velocity channels are divided by `v_max`.
    pub fn patchify(&self, obs: &Observation) -> Result<Tensor> {
        let cfg = &self.config;
        let size = cfg.grid_size;
        if obs.size != size || obs.grid.len() != cfg.channels * size * size {
            return Err(shape_err("patchify", &[cfg.channels, obs.size, obs.size], &[cfg.channels, size, size]));
        }
        let p = cfg.patch();
        let side = cfg.tokens_per_side();
        let mut out = Vec::with_capacity(cfg.tokens * cfg.patch_dim());
        for tr in 0..side {
            for tc in 0..side {
                for ch in 0..cfg.channels {
                    let scale = if ch == CH_VX || ch == CH_VY { 1.0 / cfg.v_max } else { 1.0 };
                    for r in 0..p {
                        for c in 0..p {
                            out.push(obs.at(ch, tr * p + r, tc * p + c) as f64 * scale);
                        }
                    }
                }
            }
        }
        Tensor::new(vec![cfg.tokens, cfg.patch_dim()], out)
    }

    /// Scene latent `z` of shape `L×C`.
    pub fn encode_scene(&self, g: &mut Graph, p: &ParamVars, obs: &Observation) -> Result<Var> {
        let patches = g.constant(self.patchify(obs)?);
        let speed = g.constant(Tensor::new(vec![1, 1], vec![obs.speed / self.config.v_max])?);
        self.encode_tokens(g, p, patches, speed)
    }

    fn encode_tokens(&self, g: &mut Graph, p: &ParamVars, patches: Var, speed: Var) -> Result<Var> {
        let x = self.patch_embed.forward(g, p, patches)?;
        let x = g.add(x, p.var(self.pos_embed))?;
        let s = self.speed_embed.forward(g, p, speed)?;
        let s = g.reshape(s, &[self.config.width])?;
        let x = g.add(x, s)?;
        let x = self.encoder.forward(g, p, x)?;
        g.layer_norm(x, p.var(self.enc_norm.0), p.var(self.enc_norm.1))
    }

    fn pool(&self, g: &mut Graph, z: Var) -> Result<Var> {
        let m = g.mean(z, 0)?;
        g.reshape(m, &[1, self.config.width])
    }

    /// Per-column factors mapping metres to network units: `(1/s, 1/s, 1)`.
    fn plan_norm(&self, g: &mut Graph, inverse: bool) -> Var {
        let s = if inverse { self.config.traj_scale } else { 1.0 / self.config.traj_scale };
        g.constant(Tensor::vector(vec![s, s, 1.0]))
    }

    /// Initial plan `w` of shape `T×3`; headings are `atan2(s, 1 + c)` of a
    /// predicted pair so they lie in `(−π, π]` and a zero head gives zero.
    pub fn propose_trajectory(&self, g: &mut Graph, p: &ParamVars, z: Var) -> Result<Var> {
        let t = self.config.horizon;
        let pooled = self.pool(g, z)?;
        let out = self.policy.forward(g, p, pooled)?;
        let out = g.reshape(out, &[t, 4])?;
        let xy = g.slice(out, 1, 0..2)?;
        let xy = g.scale(xy, self.config.traj_scale)?;
        let s = g.slice(out, 1, 2..3)?;
        let c = g.slice(out, 1, 3..4)?;
        let c = g.add_scalar(c, 1.0)?;
        let th = g.atan2(s, c)?;
        g.concat(&[xy, th], 1)
    }

    /// Segment embedding of shape `1×C` for an `N×3` segment.
    pub fn encode_segment(&self, g: &mut Graph, p: &ParamVars, seg: Var) -> Result<Var> {
        let n = self.config.segment_len;
        if g.shape(seg) != [n, 3] {
            return Err(shape_err("encode_segment", g.shape(seg), &[n, 3]));
        }
        let norm = self.plan_norm(g, false);
        let x = g.mul(seg, norm)?;
        let x = g.reshape(x, &[1, 3 * n])?;
        self.segment_encoder.forward(g, p, x)
    }

    /// One world-model step: the segment token is appended to the scene
    /// tokens and dropped again after the transformer stack.
    pub fn wm_step(&self, g: &mut Graph, p: &ParamVars, z: Var, seg: Var) -> Result<Var> {
        let l = self.config.tokens;
        if g.shape(z) != [l, self.config.width] {
            return Err(shape_err("wm_step", g.shape(z), &[l, self.config.width]));
        }
        let c = self.encode_segment(g, p, seg)?;
        let x = g.concat(&[z, c], 0)?;
        let y = self.world_model.forward(g, p, x)?;
        g.slice(y, 0, 0..l)
    }

    /// Segment `k` (1-based) of a `T×3` plan variable.
    pub fn segment(&self, g: &mut Graph, w: Var, k: usize) -> Result<Var> {
        let n = self.config.segment_len;
        if k == 0 || k > self.config.segments {
            return Err(Error::Invalid(format!("segment index {k} outside 1..={}", self.config.segments)));
        }
        g.slice(w, 0, (k - 1) * n..k * n)
    }

    /// Reasoning chain `z⁽⁰⁾..z⁽ˢᵗᵉᵖˢ⁾` over the first `steps` segments of `w`;
    /// element 0 is `z0` itself.
    pub fn cot_rollout(&self, g: &mut Graph, p: &ParamVars, z0: Var, w: Var, steps: usize) -> Result<Vec<Var>> {
        if g.shape(w) != [self.config.horizon, 3] {
            return Err(shape_err("cot_rollout", g.shape(w), &[self.config.horizon, 3]));
        }
        if steps > self.config.segments {
            return Err(Error::Invalid(format!("{steps} rollout steps exceed K={}", self.config.segments)));
        }
        let mut chain = Vec::with_capacity(steps + 1);
        chain.push(z0);
        for k in 1..=steps {
            let seg = self.segment(g, w, k)?;
            let next = self.wm_step(g, p, chain[k - 1], seg)?;
            chain.push(next);
        }
        Ok(chain)
    }

    /// Refined plan `w + Δw` with headings re-wrapped; `chain` must hold all
    /// `K+1` latents.
    pub fn summarize(&self, g: &mut Graph, p: &ParamVars, chain: &[Var], w: Var) -> Result<Var> {
        let k = self.config.segments;
        let t = self.config.horizon;
        if chain.len() != k + 1 {
            return Err(Error::Invalid(format!("summarizer needs {} latents, got {}", k + 1, chain.len())));
        }
        let skip = usize::from(!self.config.include_z0);
        let mut parts = Vec::with_capacity(k + 2);
        for &z in &chain[skip..] {
            parts.push(self.pool(g, z)?);
        }
        let norm = self.plan_norm(g, false);
        let wn = g.mul(w, norm)?;
        let wn = g.reshape(wn, &[1, 3 * t])?;
        parts.push(self.plan_embed.forward(g, p, wn)?);
        let x = g.concat(&parts, 1)?;
        let delta = self.summarizer.forward(g, p, x)?;
        let delta = g.reshape(delta, &[t, 3])?;
        let inv = self.plan_norm(g, true);
        let delta = g.mul(delta, inv)?;
        let refined = g.add(w, delta)?;
        let xy = g.slice(refined, 1, 0..2)?;
        let th = g.slice(refined, 1, 2..3)?;
        let th = g.wrap_angle(th)?;
        g.concat(&[xy, th], 1)
    }

    /// Difficulty score `d ∈ [0, 1]` as a scalar variable.
    pub fn think_score(&self, g: &mut Graph, p: &ParamVars, z: Var) -> Result<Var> {
        let pooled = self.pool(g, z)?;
        let logit = self.gate.forward(g, p, pooled)?;
        let logit = g.reshape(logit, &[])?;
        g.sigmoid(logit)
    }
}
