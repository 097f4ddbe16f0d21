use super::{Init, ParamId, ParamRegistry, ParamVars};
use crate::error::{shape_err, Result};
use crate::tensor::{Graph, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Gelu,
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, g: &mut Graph, x: Var) -> Result<Var> {
        match self {
            Activation::Gelu => g.gelu(x),
            Activation::Relu => g.relu(x),
            Activation::Identity => Ok(x),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(reg: &mut ParamRegistry, name: &str, in_dim: usize, out_dim: usize, gain: f64) -> Result<Self> {
        let w = reg.register(format!("{name}.w"), &[in_dim, out_dim], Init::FanIn { fan_in: in_dim, gain })?;
        let b = Some(reg.register(format!("{name}.b"), &[out_dim], Init::Zeros)?);
        Ok(Self { w, b, in_dim, out_dim })
    }

    pub fn without_bias(reg: &mut ParamRegistry, name: &str, in_dim: usize, out_dim: usize, gain: f64) -> Result<Self> {
        let w = reg.register(format!("{name}.w"), &[in_dim, out_dim], Init::FanIn { fan_in: in_dim, gain })?;
        Ok(Self { w, b: None, in_dim, out_dim })
    }

    /// `x·W + b` for `x` of shape `rows × in_dim`.
    pub fn forward(&self, g: &mut Graph, p: &ParamVars, x: Var) -> Result<Var> {
        let y = g.matmul(x, p.var(self.w))?;
        match self.b {
            Some(b) => g.add(y, p.var(b)),
            None => Ok(y),
        }
    }
}

/// Fully connected stack; hidden layers use `hidden_act`, the last layer is affine.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub hidden_act: Activation,
}

impl Mlp {
    /// `widths` lists input, hidden and output widths. `out_gain` scales the
    /// initialisation of the final layer.
    pub fn new(reg: &mut ParamRegistry, name: &str, widths: &[usize], hidden_act: Activation, out_gain: f64) -> Result<Self> {
        assert!(widths.len() >= 2, "an MLP needs at least input and output widths");
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let gain = if i == last { out_gain } else { 1.0 };
                Linear::new(reg, &format!("{name}.l{i}"), w[0], w[1], gain)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers, hidden_act })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.in_dim * l.out_dim + if l.b.is_some() { l.out_dim } else { 0 })
            .sum()
    }

    /// Parameters of the output layer.
    pub fn head(&self) -> &Linear {
        self.layers.last().expect("non-empty")
    }

    pub fn forward(&self, g: &mut Graph, p: &ParamVars, x: Var) -> Result<Var> {
        let shape = g.shape(x);
        if shape.len() != 2 || shape[1] != self.in_dim() {
            return Err(shape_err("mlp_forward", shape, &[self.in_dim()]));
        }
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(g, p, h)?;
            if i < last {
                h = self.hidden_act.apply(g, h)?;
            }
        }
        Ok(h)
    }
}
