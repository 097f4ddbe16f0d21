use super::{Activation, Init, Linear, Mlp, ParamId, ParamRegistry, ParamVars};
use crate::error::{shape_err, Error, Result};
use crate::tensor::{Graph, Var};

/// Pre-norm residual block: `x + MHA(LN(x))`, then `x + FF(LN(x))`.
#[derive(Clone, Debug)]
pub struct TransformerLayer {
    pub width: usize,
    pub heads: usize,
    ln1: (ParamId, ParamId),
    ln2: (ParamId, ParamId),
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    ff: Mlp,
}

impl TransformerLayer {
    pub fn new(reg: &mut ParamRegistry, name: &str, width: usize, heads: usize, ff_mult: usize) -> Result<Self> {
        if heads == 0 || !width.is_multiple_of(heads) {
            return Err(Error::Config(format!("width {width} not divisible by {heads} heads")));
        }
        let ln = |reg: &mut ParamRegistry, tag: &str| -> Result<(ParamId, ParamId)> {
            Ok((
                reg.register(format!("{name}.{tag}.g"), &[width], Init::Ones)?,
                reg.register(format!("{name}.{tag}.b"), &[width], Init::Zeros)?,
            ))
        };
        let ln1 = ln(reg, "ln1")?;
        let q = Linear::new(reg, &format!("{name}.q"), width, width, 1.0)?;
        // a key bias shifts every score of a query equally and has no effect
        let k = Linear::without_bias(reg, &format!("{name}.k"), width, width, 1.0)?;
        let v = Linear::new(reg, &format!("{name}.v"), width, width, 1.0)?;
        // residual branches start small so a fresh stack is close to identity
        let o = Linear::new(reg, &format!("{name}.o"), width, width, 0.5)?;
        let ln2 = ln(reg, "ln2")?;
        let ff = Mlp::new(reg, &format!("{name}.ff"), &[width, ff_mult * width, width], Activation::Gelu, 0.5)?;
        Ok(Self { width, heads, ln1, ln2, q, k, v, o, ff })
    }

    pub fn forward(&self, g: &mut Graph, p: &ParamVars, x: Var) -> Result<Var> {
        self.forward_inner(g, p, x, None)
    }

    /// Forward pass that also returns the per-head `S×S` attention matrices.
    pub fn forward_with_attention(&self, g: &mut Graph, p: &ParamVars, x: Var) -> Result<(Var, Vec<Var>)> {
        let mut attn = Vec::with_capacity(self.heads);
        let y = self.forward_inner(g, p, x, Some(&mut attn))?;
        Ok((y, attn))
    }

    fn forward_inner(&self, g: &mut Graph, p: &ParamVars, x: Var, mut attn_out: Option<&mut Vec<Var>>) -> Result<Var> {
        let shape = g.shape(x);
        if shape.len() != 2 || shape[1] != self.width || shape[0] == 0 {
            return Err(shape_err("transformer_forward", shape, &[self.width]));
        }
        let h = g.layer_norm(x, p.var(self.ln1.0), p.var(self.ln1.1))?;
        let q = self.q.forward(g, p, h)?;
        let k = self.k.forward(g, p, h)?;
        let v = self.v.forward(g, p, h)?;
        let dh = self.width / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut heads = Vec::with_capacity(self.heads);
        for hd in 0..self.heads {
            let r = hd * dh..(hd + 1) * dh;
            let qh = g.slice(q, 1, r.clone())?;
            let kh = g.slice(k, 1, r.clone())?;
            let vh = g.slice(v, 1, r)?;
            let scores = g.matmul_nt(qh, kh)?;
            let scores = g.scale(scores, scale)?;
            let weights = g.softmax(scores, 1)?;
            if let Some(out) = attn_out.as_deref_mut() {
                out.push(weights);
            }
            heads.push(g.matmul(weights, vh)?);
        }
        let merged = if heads.len() == 1 { heads[0] } else { g.concat(&heads, 1)? };
        let a = self.o.forward(g, p, merged)?;
        let x = g.add(x, a)?;
        let h = g.layer_norm(x, p.var(self.ln2.0), p.var(self.ln2.1))?;
        let f = self.ff.forward(g, p, h)?;
        g.add(x, f)
    }
}

/// A stack of [`TransformerLayer`]s applied in order.
#[derive(Clone, Debug)]
pub struct TransformerStack {
    pub layers: Vec<TransformerLayer>,
}

impl TransformerStack {
    pub fn new(reg: &mut ParamRegistry, name: &str, depth: usize, width: usize, heads: usize, ff_mult: usize) -> Result<Self> {
        let layers = (0..depth)
            .map(|i| TransformerLayer::new(reg, &format!("{name}.{i}"), width, heads, ff_mult))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers })
    }

    pub fn forward(&self, g: &mut Graph, p: &ParamVars, mut x: Var) -> Result<Var> {
        for l in &self.layers {
            x = l.forward(g, p, x)?;
        }
        Ok(x)
    }
}
