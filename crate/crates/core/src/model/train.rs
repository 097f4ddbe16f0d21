use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{HyperParams, WarmupTarget};
use super::loss::{auto_think_var, l1_error_var, latent_consistency_var, refinement_gain, thinking_flag, total_loss_var, trajectory_loss_var};
use super::net::FutureX;
use super::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::nn::ParamVars;
use crate::sim::{Observation, Record};
use crate::tensor::{adam_step, grad_check, AdamConfig, AdamState, GradCheckReport, Graph, Tensor, Var};

/// One supervised keyframe: observation, expert plan and the `K` future
/// observations at the segment boundaries.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSample {
    pub obs: Observation,
    pub label: Trajectory,
    pub futures: Vec<Observation>,
}

impl From<&Record> for TrainSample {
    fn from(r: &Record) -> Self {
        Self { obs: r.obs.clone(), label: Trajectory::new(r.label.waypoints.clone()), futures: r.futures.clone() }
    }
}

/// Scalar outcome of one sample's forward pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleOutcome {
    pub e_init: f64,
    pub e_ref: f64,
    pub r: f64,
    pub g: bool,
    pub d: f64,
    pub l_traj: f64,
    pub l_lat: f64,
    pub l_auto: f64,
    pub total: f64,
}

/// Batch means of one optimisation step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub l_traj: f64,
    pub l_lat: f64,
    pub l_auto: f64,
    pub total: f64,
    pub mean_r: f64,
    /// Fraction of samples with `g = 1`.
    pub think_rate: f64,
    pub e_init: f64,
    pub e_ref: f64,
    pub mean_d: f64,
}

impl StepMetrics {
    fn from_outcomes(step: u64, outs: &[SampleOutcome]) -> Self {
        let n = outs.len() as f64;
        let mean = |f: fn(&SampleOutcome) -> f64| outs.iter().map(f).sum::<f64>() / n;
        Self {
            step,
            l_traj: mean(|o| o.l_traj),
            l_lat: mean(|o| o.l_lat),
            l_auto: mean(|o| o.l_auto),
            total: mean(|o| o.total),
            mean_r: mean(|o| o.r),
            think_rate: mean(|o| if o.g { 1.0 } else { 0.0 }),
            e_init: mean(|o| o.e_init),
            e_ref: mean(|o| o.e_ref),
            mean_d: mean(|o| o.d),
        }
    }
}

/// How `L_traj` is formed for a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrajectoryTerm {
    /// Select `e_ref` or `e_init` by the thinking flag.
    Gated,
    /// Supervise both plans: `e_init + e_ref`.
    Both,
    /// Supervise the refined plan only.
    Refined,
}

/// Future latents `ẑ⁽ᵏ⁾` encoded without gradient.
pub fn latent_targets(model: &FutureX, futures: &[Observation]) -> Result<Vec<Tensor>> {
    let mut g = Graph::no_grad();
    let p = model.bind(&mut g);
    futures
        .iter()
        .map(|o| {
            let z = model.encode_scene(&mut g, &p, o)?;
            Ok(g.value(z).clone())
        })
        .collect()
}

/// Builds the three-term objective of one sample in `g`. `flag` overrides
/// the thinking flag computed from the refinement gain.
#[allow(clippy::too_many_arguments)]
pub fn sample_objective(
    model: &FutureX,
    g: &mut Graph,
    p: &ParamVars,
    sample: &TrainSample,
    targets: &[Tensor],
    hp: &HyperParams,
    term: TrajectoryTerm,
    flag: Option<bool>,
) -> Result<(Var, SampleOutcome)> {
    let k = model.config.segments;
    if sample.label.len() != model.config.horizon || targets.len() != k {
        return Err(Error::Invalid(format!(
            "sample has {} waypoints and {} targets, model expects {} and {k}",
            sample.label.len(),
            targets.len(),
            model.config.horizon
        )));
    }
    let z = model.encode_scene(g, p, &sample.obs)?;
    let w = model.propose_trajectory(g, p, z)?;
    let chain = model.cot_rollout(g, p, z, w, k)?;
    let w_ref = model.summarize(g, p, &chain, w)?;
    let d = model.think_score(g, p, z)?;
    let gt = g.constant(sample.label.to_tensor());
    let e_init = l1_error_var(g, w, gt)?;
    let e_ref = l1_error_var(g, w_ref, gt)?;
    let (ei, er) = (g.item(e_init), g.item(e_ref));
    let r = refinement_gain(ei, er, hp.eps);
    let flag = flag.unwrap_or_else(|| thinking_flag(r, hp.alpha));
    let l_traj = match term {
        TrajectoryTerm::Gated => trajectory_loss_var(flag, e_ref, e_init),
        TrajectoryTerm::Both => g.add(e_init, e_ref)?,
        TrajectoryTerm::Refined => e_ref,
    };
    let l_lat = latent_consistency_var(g, &chain, targets, hp.latent_norm)?;
    let l_auto = auto_think_var(g, d, flag)?;
    let total = total_loss_var(g, l_traj, l_lat, l_auto, hp.lambda1, hp.lambda2)?;
    let out = SampleOutcome {
        e_init: ei,
        e_ref: er,
        r,
        g: flag,
        d: g.item(d),
        l_traj: g.item(l_traj),
        l_lat: g.item(l_lat),
        l_auto: g.item(l_auto),
        total: g.item(total),
    };
    Ok((total, out))
}

/// Parameters, Adam state and step counter of a training run.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: FutureX,
    pub hp: HyperParams,
    pub adam: AdamState,
    /// Forces every thinking flag; `None` uses the refinement gain.
    pub force_flag: Option<bool>,
}

impl Trainer {
    pub fn new(model: FutureX, hp: HyperParams) -> Result<Self> {
        hp.validate()?;
        let adam = AdamState::new(AdamConfig { lr: hp.lr, ..AdamConfig::default() }, model.params.tensors());
        Ok(Self { model, hp, adam, force_flag: None })
    }

    pub fn step(&self) -> u64 {
        self.adam.step
    }

    fn term(&self) -> TrajectoryTerm {
        if self.adam.step < self.hp.think_warmup_steps {
            match self.hp.warmup_target {
                WarmupTarget::Refined => TrajectoryTerm::Refined,
                WarmupTarget::Both => TrajectoryTerm::Both,
            }
        } else {
            TrajectoryTerm::Gated
        }
    }

    /// Averages the objective over `batch`, backpropagates and applies one
    /// Adam update. A non-finite loss or gradient aborts without updating.
    pub fn train_step(&mut self, batch: &[&TrainSample]) -> Result<StepMetrics> {
        if batch.is_empty() {
            return Err(Error::Invalid("empty batch".into()));
        }
        let term = self.term();
        let scale = 1.0 / batch.len() as f64;
        let mut g = Graph::new();
        let p = self.model.bind(&mut g);
        let base = g.len();
        let mut outs = Vec::with_capacity(batch.len());
        for s in batch {
            let targets = latent_targets(&self.model, &s.futures)?;
            let (loss, out) = sample_objective(&self.model, &mut g, &p, s, &targets, &self.hp, term, self.force_flag)?;
            if !out.total.is_finite() {
                return Err(Error::Diverged { step: self.adam.step, detail: format!("loss {} on sample {}", out.total, outs.len()) });
            }
            let scaled = g.scale(loss, scale)?;
            g.backward(scaled)?;
            g.truncate(base);
            outs.push(out);
        }
        let grads = p.grads(&g);
        if let Some(i) = grads.iter().position(|t| !t.all_finite()) {
            return Err(Error::Diverged { step: self.adam.step, detail: format!("non-finite gradient in {}", self.model.params.names()[i]) });
        }
        adam_step(self.model.params.tensors_mut(), &grads, &mut self.adam)?;
        Ok(StepMetrics::from_outcomes(self.adam.step, &outs))
    }

    /// One pass over `data` in a seeded shuffled order; the final partial
    /// batch is kept.
    pub fn train_epoch(&mut self, data: &[TrainSample], epoch: u64, on_step: impl FnMut(&StepMetrics)) -> Result<Vec<StepMetrics>> {
        self.train_epoch_from(data, epoch, 0, on_step)
    }

    /// Sample indices of every batch of epoch `epoch`, in order: a seeded
    /// shuffle chunked by the batch size, keeping the final partial batch.
    pub fn epoch_batches(&self, len: usize, epoch: u64) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..len).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.hp.seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        order.shuffle(&mut rng);
        order.chunks(self.hp.batch_size).map(<[usize]>::to_vec).collect()
    }

    /// The remainder of epoch `epoch` after its first `skip` batches, so a
    /// resumed run replays exactly the batches an uninterrupted run would.
    pub fn train_epoch_from(&mut self, data: &[TrainSample], epoch: u64, skip: usize, mut on_step: impl FnMut(&StepMetrics)) -> Result<Vec<StepMetrics>> {
        let mut out = Vec::new();
        for idx in self.epoch_batches(data.len(), epoch).into_iter().skip(skip) {
            let batch: Vec<&TrainSample> = idx.iter().map(|&i| &data[i]).collect();
            let m = self.train_step(&batch)?;
            on_step(&m);
            out.push(m);
        }
        Ok(out)
    }
}

/// Central-difference check of the full batch objective against reverse
/// mode for every parameter. Targets are frozen at the unperturbed
/// parameters, matching their stop-gradient. Thinking flags are piecewise
/// constant in the parameters; `flags` fixes them per sample, and `None`
/// freezes the flags the unperturbed model produces.
pub fn end_to_end_gradcheck(model: &FutureX, samples: &[TrainSample], hp: &HyperParams, flags: Option<&[bool]>, h: f64, tol: f64) -> Result<GradCheckReport> {
    if flags.is_some_and(|f| f.len() != samples.len()) {
        return Err(Error::Invalid("one flag per sample required".into()));
    }
    let mut fixed = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let targets = latent_targets(model, &s.futures)?;
        let flag = match flags {
            Some(f) => f[i],
            None => {
                let mut g = Graph::no_grad();
                let p = model.bind(&mut g);
                sample_objective(model, &mut g, &p, s, &targets, hp, TrajectoryTerm::Gated, None)?.1.g
            }
        };
        fixed.push((targets, flag));
    }
    let names = model.params.names().to_vec();
    let mut params = model.params.tensors().to_vec();
    let scale = 1.0 / samples.len() as f64;
    grad_check(&mut params, &names, h, tol, |g, vars| {
        let p = ParamVars::from_vars(vars.to_vec());
        let mut acc: Option<Var> = None;
        for (s, (targets, flag)) in samples.iter().zip(&fixed) {
            let (l, _) = sample_objective(model, g, &p, s, targets, hp, TrajectoryTerm::Gated, Some(*flag))?;
            acc = Some(match acc {
                Some(a) => g.add(a, l)?,
                None => l,
            });
        }
        let total = acc.ok_or_else(|| Error::Invalid("no samples".into()))?;
        g.scale(total, scale)
    })
}
