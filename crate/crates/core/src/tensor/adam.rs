use super::Tensor;
use crate::error::{shape_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment buffers, one per parameter, plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect::<Vec<_>>();
        Self {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Invalid(format!(
            "adam: {} params, {} grads, {} moment buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(shape_err("adam_step", p.shape(), g.shape()));
        }
    }
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let bc1 = 1.0 - beta1.powi(state.step as i32);
    let bc2 = 1.0 - beta2.powi(state.step as i32);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        let it = p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
        for ((pv, &gv), (mv, vv)) in it {
            *mv = beta1 * *mv + (1.0 - beta1) * gv;
            *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
            let mhat = *mv / bc1;
            let vhat = *vv / bc2;
            *pv -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = vec![Tensor::vector(vec![1.0, -2.0, 3.0])];
        let g = vec![Tensor::zeros(&[3])];
        let mut st = AdamState::new(AdamConfig::default(), &p);
        adam_step(&mut p, &g, &mut st).unwrap();
        assert_eq!(p[0].data(), &[1.0, -2.0, 3.0]);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_against_gradient_sign() {
        let cfg = AdamConfig { lr: 0.1, ..Default::default() };
        let mut p = vec![Tensor::scalar(1.0)];
        let mut st = AdamState::new(cfg, &p);
        adam_step(&mut p, &[Tensor::scalar(1.0)], &mut st).unwrap();
        assert!(p[0].item() < 1.0);
        // bias-corrected first step has magnitude ~lr
        assert!((p[0].item() - 0.9).abs() < 1e-6);
    }

    #[test]
    fn step_counter_increments_by_one() {
        let mut p = vec![Tensor::scalar(0.0)];
        let mut st = AdamState::new(AdamConfig::default(), &p);
        for k in 1..=5 {
            adam_step(&mut p, &[Tensor::scalar(0.3)], &mut st).unwrap();
            assert_eq!(st.step, k);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = vec![Tensor::zeros(&[2])];
        let mut st = AdamState::new(AdamConfig::default(), &p);
        assert!(adam_step(&mut p, &[Tensor::zeros(&[3])], &mut st).is_err());
    }

    #[test]
    fn identical_runs_are_bitwise_identical() {
        let run = || {
            let mut p = vec![Tensor::vector(vec![0.5, -0.25])];
            let mut st = AdamState::new(AdamConfig::default(), &p);
            for k in 0..20 {
                let g = Tensor::vector(vec![(k as f64).sin(), (k as f64 * 0.7).cos()]);
                adam_step(&mut p, &[g], &mut st).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
