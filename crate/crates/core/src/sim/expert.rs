use super::geometry::Pose;
use super::scenario::{AgentKind, Scenario};
use super::world::{advance_longitudinal, arc_pose, initial_state, step_world, Episode, WorldState};
use super::{SimConfig, EGO_LENGTH, EGO_WIDTH};

const IDM_ACCEL: f64 = 2.0;
const IDM_DECEL: f64 = 2.5;
const IDM_HEADWAY: f64 = 1.2;
const IDM_MIN_GAP: f64 = 3.0;
const LATERAL_ACCEL: f64 = 2.0;
const CURVE_DECEL: f64 = 2.0;
const CURVE_LOOKAHEAD: f64 = 50.0;
/// Largest change of acceleration per tick the expert commands.
const ACCEL_STEP: f64 = 3.9;
const PREDICTION_HORIZON: f64 = 4.0;
const PREDICTION_STEP: f64 = 0.5;
const LATERAL_MARGIN: f64 = 0.5;

/// Ground-truth plan: `T` poses `(x, y, θ)` in the ego frame of the label time.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpertLabel {
    pub waypoints: Vec<[f64; 3]>,
}

impl ExpertLabel {
    pub fn from_poses(origin: &Pose, poses: &[Pose]) -> Self {
        Self {
            waypoints: poses
                .iter()
                .map(|p| {
                    let r = origin.relative(p);
                    [r.x, r.y, r.theta]
                })
                .collect(),
        }
    }
}

/// Cruise speed respecting the speed limit and upcoming curvature.
fn desired_speed(scenario: &Scenario, state: &WorldState) -> f64 {
    let mut v0 = scenario.speed_limit;
    let mut d = 0.0;
    while d <= CURVE_LOOKAHEAD {
        let kappa = scenario.route.curvature_at(state.ego_s + d, 1.0).max(1e-6);
        let v_curve = (LATERAL_ACCEL / kappa).sqrt();
        let allowed = (v_curve * v_curve + 2.0 * CURVE_DECEL * (d - 2.0).max(0.0)).sqrt();
        v0 = v0.min(allowed);
        d += 2.0;
    }
    v0
}

/// IDM interaction term against every agent whose scripted path enters the
/// ego lane ahead within the prediction horizon. The expert is privileged:
/// it reads the scripts instead of extrapolating.
fn interaction_decel(scenario: &Scenario, state: &WorldState) -> f64 {
    let v = state.speed;
    let mut worst: f64 = 0.0;
    for agent in &scenario.agents {
        let (s, _, ds, _) = agent.frenet_at(state.time);
        let centre_gap = s - state.ego_s;
        if centre_gap <= 0.0 {
            continue;
        }
        let band = EGO_WIDTH / 2.0 + agent.width / 2.0 + LATERAL_MARGIN;
        let steps = (PREDICTION_HORIZON / PREDICTION_STEP).round() as usize;
        let conflicts = (0..=steps).any(|i| agent.frenet_at(state.time + i as f64 * PREDICTION_STEP).1.abs() < band);
        if !conflicts {
            continue;
        }
        let lead_speed = if agent.kind == AgentKind::Pedestrian { 0.0 } else { ds.max(0.0) };
        let gap = (centre_gap - EGO_LENGTH / 2.0 - agent.length / 2.0).max(0.1);
        let dv = v - lead_speed;
        let desired = IDM_MIN_GAP + (v * IDM_HEADWAY + v * dv / (2.0 * (IDM_ACCEL * IDM_DECEL).sqrt())).max(0.0);
        worst = worst.max(IDM_ACCEL * (desired / gap).powi(2));
    }
    worst
}

/// Longitudinal command: IDM toward the curvature-limited cruise speed,
/// rate-limited and clamped to the simulator's acceleration bound.
pub fn expert_accel(scenario: &Scenario, cfg: &SimConfig, state: &WorldState) -> f64 {
    let v0 = desired_speed(scenario, state).max(0.5);
    let free = IDM_ACCEL * (1.0 - (state.speed / v0).powi(4));
    let a = free - interaction_decel(scenario, state);
    a.clamp(state.accel - ACCEL_STEP, state.accel + ACCEL_STEP).clamp(-cfg.accel_max, cfg.accel_max)
}

/// Next waypoint (ego frame) from pure-pursuit steering toward the lane
/// centre and the IDM acceleration.
pub fn expert_command(scenario: &Scenario, cfg: &SimConfig, state: &WorldState) -> (f64, f64) {
    let a = expert_accel(scenario, cfg, state);
    let (len, _) = advance_longitudinal(state.speed, a, cfg.dt);
    let lookahead = (0.5 * state.speed + 3.0).clamp(4.0, 10.0);
    let target = scenario.route.frenet_to_world(state.ego_s + lookahead, 0.0);
    let (lx, ly) = state.ego.to_local(target.x, target.y);
    let curvature = 2.0 * ly / (lx * lx + ly * ly);
    let max_turn = cfg.yaw_rate_max * cfg.dt;
    let delta = (curvature * len).clamp(-max_turn, max_turn);
    let p = arc_pose(&Pose::default(), len, delta);
    (p.x, p.y)
}

/// Expert rollout of `cfg.horizon` ticks from `state`, as ego-frame poses.
pub fn expert_plan(scenario: &Scenario, cfg: &SimConfig, state: &WorldState) -> ExpertLabel {
    let mut st = state.clone();
    let mut poses = Vec::with_capacity(cfg.horizon);
    for _ in 0..cfg.horizon {
        let cmd = expert_command(scenario, cfg, &st);
        st = step_world(scenario, cfg, &st, cmd);
        poses.push(st.ego);
    }
    ExpertLabel::from_poses(&state.ego, &poses)
}

/// Expert execution of `ticks` ticks from the scenario's initial state.
pub fn run_expert_episode(scenario: &Scenario, cfg: &SimConfig, ticks: usize) -> Episode {
    run_expert_from(scenario, cfg, initial_state(scenario), ticks)
}

/// Expert execution of `ticks` ticks from `start`; `states[i]` is `i` ticks
/// after `start`.
pub fn run_expert_from(scenario: &Scenario, cfg: &SimConfig, start: WorldState, ticks: usize) -> Episode {
    let mut states = Vec::with_capacity(ticks + 1);
    states.push(start);
    for _ in 0..ticks {
        let st = states.last().unwrap();
        let cmd = expert_command(scenario, cfg, st);
        states.push(step_world(scenario, cfg, st, cmd));
    }
    Episode { scenario: scenario.clone(), states }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::geometry::Obb;
    use crate::sim::scenario::{generate_scenario, Agent, Behavior, Difficulty, Template};

    fn straight_empty(speed: f64) -> Scenario {
        let mut sc = generate_scenario(21, Difficulty::Easy);
        let mut seed = 21;
        while sc.template != Template::Straight {
            seed += 1;
            sc = generate_scenario(seed, Difficulty::Easy);
        }
        sc.agents.clear();
        sc.speed_limit = speed;
        sc.ego_start.speed = speed;
        sc.ego_start.lateral = 0.0;
        sc.ego_start.heading_offset = 0.0;
        sc
    }

    fn collides(ep: &Episode) -> bool {
        ep.states.iter().any(|st| {
            let ego = Obb::new(st.ego, EGO_LENGTH, EGO_WIDTH);
            ep.scenario.agents.iter().zip(&st.agents).any(|(a, s)| ego.overlaps(&Obb::new(s.pose, a.length, a.width)))
        })
    }

    #[test]
    fn cruise_on_empty_straight_is_evenly_spaced() {
        let sc = straight_empty(10.0);
        let cfg = SimConfig::default();
        let label = expert_plan(&sc, &cfg, &initial_state(&sc));
        assert_eq!(label.waypoints.len(), cfg.horizon);
        for (i, w) in label.waypoints.iter().enumerate() {
            assert!((w[0] - 5.0 * (i + 1) as f64).abs() < 1e-6, "{w:?}");
            assert!(w[1].abs() < 1e-6 && w[2].abs() < 1e-6);
        }
    }

    #[test]
    fn stops_behind_stopped_lead() {
        let mut sc = straight_empty(8.0);
        sc.ego_start.speed = 5.0;
        let gap = 10.0 + EGO_LENGTH;
        sc.agents.push(Agent::vehicle(sc.ego_start.s + gap, 0.0, Behavior::Static));
        let cfg = SimConfig::default();
        let st = initial_state(&sc);
        let mut s = st.clone();
        for _ in 0..cfg.horizon {
            s = step_world(&sc, &cfg, &s, expert_command(&sc, &cfg, &s));
        }
        assert!(s.speed < 0.5, "final speed {}", s.speed);
        assert!(sc.agents[0].s0 - s.ego_s > EGO_LENGTH, "ego reached the lead");
        let label = expert_plan(&sc, &cfg, &st);
        let last = label.waypoints.last().unwrap();
        assert!((st.ego.relative(&s.ego).x - last[0]).abs() < 1e-12);
    }

    #[test]
    fn blocked_ego_at_rest_stays_at_rest() {
        let mut sc = straight_empty(8.0);
        sc.ego_start.speed = 0.0;
        sc.agents.push(Agent::parked(sc.ego_start.s + 7.0, 0.0));
        let cfg = SimConfig::default();
        let ep = run_expert_episode(&sc, &cfg, 10);
        assert!(ep.states.iter().all(|s| s.ego == ep.states[0].ego && s.speed == 0.0));
    }

    #[test]
    fn plan_matches_recorded_execution() {
        let cfg = SimConfig::default();
        let sc = generate_scenario(5, Difficulty::Hard);
        let ep = run_expert_episode(&sc, &cfg, 20);
        for t in [0, 4, 12] {
            let label = expert_plan(&sc, &cfg, &ep.states[t]);
            let recorded: Vec<Pose> = ep.states[t + 1..=t + cfg.horizon].iter().map(|s| s.ego).collect();
            assert_eq!(label, ExpertLabel::from_poses(&ep.states[t].ego, &recorded));
        }
    }

    #[test]
    fn expert_never_collides_and_respects_clamps() {
        let cfg = SimConfig::default();
        for seed in 0..60 {
            for diff in [Difficulty::Easy, Difficulty::Hard] {
                let sc = generate_scenario(seed, diff);
                let ep = run_expert_episode(&sc, &cfg, cfg.episode_ticks);
                assert!(!collides(&ep), "seed {seed} {:?}", sc.template);
                for st in &ep.states {
                    assert!(st.speed <= cfg.v_max && st.accel.abs() <= cfg.accel_max + 1e-12);
                    let p = sc.route.project_near(st.ego.x, st.ego.y, st.ego_s, 60.0);
                    assert!(p.lateral.abs() <= sc.road_half_width, "seed {seed} {:?} left the road", sc.template);
                }
            }
        }
    }
}
