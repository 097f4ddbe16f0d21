use std::time::{Duration, Instant};

use super::net::FutureX;
use super::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::nn::ParamVars;
use crate::sim::Observation;
use crate::tensor::Graph;

/// Which branch inference may take.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ThinkMode {
    /// Think iff the gate score reaches `τ`.
    Auto,
    AllThink,
    NoThink,
}

impl ThinkMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ThinkMode::Auto => "auto",
            ThinkMode::AllThink => "all",
            ThinkMode::NoThink => "none",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(ThinkMode::Auto),
            "all" => Ok(ThinkMode::AllThink),
            "none" => Ok(ThinkMode::NoThink),
            _ => Err(Error::Config(format!("unknown mode {s:?}; expected auto, all or none"))),
        }
    }
}

/// Branch actually taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Instant,
    Thinking,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThinkDecision {
    /// Gate score in `[0, 1]`.
    pub d: f64,
    /// Refinement gain; known only when a label is available.
    pub r: Option<f64>,
    pub g: bool,
    pub mode: Mode,
}

/// Wall-clock time spent in each inference stage.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub encode: Duration,
    pub propose: Duration,
    pub gate: Duration,
    pub rollout: Duration,
    pub summarize: Duration,
}

impl StageTimings {
    pub const NAMES: [&'static str; 5] = ["encode", "propose", "gate", "rollout", "summarize"];

    pub fn total(&self) -> Duration {
        self.encode + self.propose + self.gate + self.rollout + self.summarize
    }

    pub fn as_array(&self) -> [Duration; 5] {
        [self.encode, self.propose, self.gate, self.rollout, self.summarize]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Inference {
    /// Returned plan: refined when thinking, otherwise the initial plan.
    pub trajectory: Trajectory,
    pub initial: Trajectory,
    pub decision: ThinkDecision,
    pub timings: StageTimings,
}

/// Inference session holding a gradient-free graph with the parameters
/// bound once; the graph is truncated back after every call.
#[derive(Debug)]
pub struct InferenceSession<'a> {
    model: &'a FutureX,
    graph: Graph,
    params: ParamVars,
    base: usize,
    pub tau: f64,
}

impl<'a> InferenceSession<'a> {
    pub fn new(model: &'a FutureX, tau: f64) -> Self {
        let mut graph = Graph::no_grad();
        let params = model.bind(&mut graph);
        let base = graph.len();
        Self { model, graph, params, base, tau }
    }

    pub fn model(&self) -> &FutureX {
        self.model
    }

    pub fn infer(&mut self, obs: &Observation, mode: ThinkMode) -> Result<Inference> {
        let out = self.run(obs, mode);
        self.graph.truncate(self.base);
        out
    }

    fn run(&mut self, obs: &Observation, mode: ThinkMode) -> Result<Inference> {
        let (m, g, p) = (self.model, &mut self.graph, &self.params);
        let mut t = StageTimings::default();
        let clock = Instant::now();
        let z = m.encode_scene(g, p, obs)?;
        t.encode = clock.elapsed();
        let clock = Instant::now();
        let w = m.propose_trajectory(g, p, z)?;
        t.propose = clock.elapsed();
        let clock = Instant::now();
        let d = m.think_score(g, p, z)?;
        let d = g.item(d);
        t.gate = clock.elapsed();
        let think = match mode {
            ThinkMode::Auto => d >= self.tau,
            ThinkMode::AllThink => true,
            ThinkMode::NoThink => false,
        };
        let initial = Trajectory::from_tensor(g.value(w))?;
        let trajectory = if think {
            let clock = Instant::now();
            let chain = m.cot_rollout(g, p, z, w, m.config.segments)?;
            t.rollout = clock.elapsed();
            let clock = Instant::now();
            let r = m.summarize(g, p, &chain, w)?;
            t.summarize = clock.elapsed();
            Trajectory::from_tensor(g.value(r))?
        } else {
            initial.clone()
        };
        let mode = if think { Mode::Thinking } else { Mode::Instant };
        Ok(Inference { trajectory, initial, decision: ThinkDecision { d, r: None, g: think, mode }, timings: t })
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::model::ModelConfig;

    fn obs(seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut o = Observation::zeros(8);
        o.grid.iter_mut().for_each(|v| *v = rng.gen_range(0.0..1.0));
        o.speed = 5.0;
        o
    }

    #[test]
    fn no_think_returns_the_proposal() {
        let model = FutureX::new(ModelConfig::miniature(), 1).unwrap();
        let mut s = InferenceSession::new(&model, 0.5);
        let out = s.infer(&obs(1), ThinkMode::NoThink).unwrap();
        let mut g = Graph::no_grad();
        let p = model.bind(&mut g);
        let z = model.encode_scene(&mut g, &p, &obs(1)).unwrap();
        let w = model.propose_trajectory(&mut g, &p, z).unwrap();
        assert_eq!(out.trajectory.to_tensor(), *g.value(w));
        assert_eq!(out.decision.mode, Mode::Instant);
        assert_eq!(out.timings.rollout, Duration::ZERO);
    }

    #[test]
    fn session_is_reusable_and_deterministic() {
        let model = FutureX::new(ModelConfig::miniature(), 2).unwrap();
        let mut s = InferenceSession::new(&model, 0.5);
        let a = s.infer(&obs(3), ThinkMode::AllThink).unwrap();
        let _ = s.infer(&obs(4), ThinkMode::AllThink).unwrap();
        let b = s.infer(&obs(3), ThinkMode::AllThink).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.decision.mode, Mode::Thinking);
        assert_ne!(a.trajectory, a.initial);
    }

    #[test]
    fn auto_follows_threshold() {
        let mut model = FutureX::new(ModelConfig::miniature(), 2).unwrap();
        model.zero_gate_head();
        let mut at = InferenceSession::new(&model, 0.5);
        assert_eq!(at.infer(&obs(1), ThinkMode::Auto).unwrap().decision.mode, Mode::Thinking);
        let mut above = InferenceSession::new(&model, 0.5 + 1e-12);
        let out = above.infer(&obs(1), ThinkMode::Auto).unwrap();
        assert_eq!(out.decision.mode, Mode::Instant);
        assert_eq!(out.trajectory, out.initial);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [ThinkMode::Auto, ThinkMode::AllThink, ThinkMode::NoThink] {
            assert_eq!(ThinkMode::parse(m.as_str()).unwrap(), m);
        }
        assert!(ThinkMode::parse("sometimes").is_err());
    }
}
