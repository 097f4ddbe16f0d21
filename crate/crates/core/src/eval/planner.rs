use crate::error::Result;
use crate::model::{FutureX, InferenceSession, StageTimings, ThinkDecision, ThinkMode, Trajectory};
use crate::sim::{expert_plan, Observation, Scenario, SimConfig, WorldState};

/// A plan for the current tick, in the ego frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanOutput {
    pub trajectory: Trajectory,
    /// Proposal before refinement, for planners that refine.
    pub initial: Option<Trajectory>,
    pub decision: Option<ThinkDecision>,
    pub timings: Option<StageTimings>,
}

impl PlanOutput {
    fn plain(trajectory: Trajectory) -> Self {
        Self { trajectory, initial: None, decision: None, timings: None }
    }
}

/// Anything that maps the current world to an ego-frame plan. Learned
/// planners read only `obs`; scripted ones may use the privileged state.
pub trait Planner {
    fn label(&self) -> String;
    fn plan(&mut self, scenario: &Scenario, cfg: &SimConfig, state: &WorldState, obs: &Observation) -> Result<PlanOutput>;
}

/// The privileged scripted expert that produced the training labels.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExpertPlanner;

impl Planner for ExpertPlanner {
    fn label(&self) -> String {
        "expert".into()
    }

    fn plan(&mut self, scenario: &Scenario, cfg: &SimConfig, state: &WorldState, _obs: &Observation) -> Result<PlanOutput> {
        Ok(PlanOutput::plain(Trajectory::new(expert_plan(scenario, cfg, state).waypoints)))
    }
}

/// Drives straight ahead at the current speed.
#[derive(Clone, Copy, Debug, Default)]
pub struct ConstantSpeedPlanner;

impl Planner for ConstantSpeedPlanner {
    fn label(&self) -> String {
        "constant_speed".into()
    }

    fn plan(&mut self, _scenario: &Scenario, cfg: &SimConfig, state: &WorldState, _obs: &Observation) -> Result<PlanOutput> {
        let step = state.speed * cfg.dt;
        Ok(PlanOutput::plain(Trajectory::new((1..=cfg.horizon).map(|i| [step * i as f64, 0.0, 0.0]).collect())))
    }
}

/// The learned planner under a fixed thinking mode.
#[derive(Debug)]
pub struct ModelPlanner<'a> {
    session: InferenceSession<'a>,
    pub mode: ThinkMode,
}

impl<'a> ModelPlanner<'a> {
    pub fn new(model: &'a FutureX, mode: ThinkMode, tau: f64) -> Self {
        Self { session: InferenceSession::new(model, tau), mode }
    }
}

impl Planner for ModelPlanner<'_> {
    fn label(&self) -> String {
        format!("futurex_{}", self.mode.as_str())
    }

    fn plan(&mut self, _scenario: &Scenario, _cfg: &SimConfig, _state: &WorldState, obs: &Observation) -> Result<PlanOutput> {
        let out = self.session.infer(obs, self.mode)?;
        Ok(PlanOutput { trajectory: out.trajectory, initial: Some(out.initial), decision: Some(out.decision), timings: Some(out.timings) })
    }
}
