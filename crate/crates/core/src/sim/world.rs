use super::geometry::Pose;
use super::render::{render_observation, Observation};
use super::scenario::{AgentState, Scenario};
use super::SimConfig;
use crate::error::{Error, Result};

/// Snapshot of the world at one tick.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub tick: usize,
    pub time: f64,
    pub ego: Pose,
    pub speed: f64,
    /// Realized mean acceleration over the previous tick.
    pub accel: f64,
    /// Route arc length of the ego's projection.
    pub ego_s: f64,
    pub agents: Vec<AgentState>,
}

/// Search window (metres of arc length) for incremental route projection.
pub(crate) const PROJECTION_WINDOW: f64 = 60.0;

fn agents_at(scenario: &Scenario, t: f64) -> Vec<AgentState> {
    scenario.agents.iter().map(|a| a.state_at(t, &scenario.route)).collect()
}

pub fn initial_state(scenario: &Scenario) -> WorldState {
    let st = scenario.ego_start;
    let base = scenario.route.frenet_to_world(st.s, st.lateral);
    WorldState {
        tick: 0,
        time: 0.0,
        ego: Pose::new(base.x, base.y, base.theta + st.heading_offset),
        speed: st.speed,
        accel: 0.0,
        ego_s: st.s,
        agents: agents_at(scenario, 0.0),
    }
}

/// Distance travelled and final speed after one tick at constant
/// acceleration `a`, stopping (not reversing) if the speed reaches zero.
pub fn advance_longitudinal(v: f64, a: f64, dt: f64) -> (f64, f64) {
    let v1 = v + a * dt;
    if v1 >= 0.0 {
        (v * dt + 0.5 * a * dt * dt, v1)
    } else {
        (v * v / (2.0 * -a), 0.0)
    }
}

/// Constant acceleration that covers `s` metres in one tick, inverse of
/// [`advance_longitudinal`].
fn accel_for_distance(v: f64, s: f64, dt: f64) -> f64 {
    if s >= 0.5 * v * dt {
        2.0 * (s - v * dt) / (dt * dt)
    } else if s > 0.0 {
        -v * v / (2.0 * s)
    } else if v > 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

/// Arc through the origin (heading 0) and `(x, y)`: returns
/// `(arc length, heading change)`. Points at or behind the ego map to a
/// stop request.
pub(crate) fn arc_to(x: f64, y: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0);
    }
    let delta = 2.0 * y.atan2(x);
    let chord = x.hypot(y);
    let half = 0.5 * delta;
    let len = if half.abs() < 1e-12 { chord } else { chord * half / half.sin() };
    (len, delta)
}

/// Pose reached by driving `len` metres with total heading change `delta`.
pub(crate) fn arc_pose(from: &Pose, len: f64, delta: f64) -> Pose {
    let half = 0.5 * delta;
    let chord = if half.abs() < 1e-12 { len } else { len * half.sin() / half };
    let dir = from.theta + half;
    Pose::new(from.x + chord * dir.cos(), from.y + chord * dir.sin(), from.theta + delta)
}

/// Advances the world one tick with the ego tracking `waypoint`, given in the
/// ego frame. The ego follows the circular arc through the waypoint; its
/// acceleration and yaw rate are clamped so infeasible commands are absorbed.
pub fn step_world(scenario: &Scenario, cfg: &SimConfig, state: &WorldState, waypoint: (f64, f64)) -> WorldState {
    let dt = cfg.dt;
    let (len_cmd, delta_cmd) = arc_to(waypoint.0, waypoint.1);
    let a = accel_for_distance(state.speed, len_cmd, dt).clamp(-cfg.accel_max, cfg.accel_max);
    // the speed cap binds only at the top of the range; the clamp keeps v1 ≤ v_max
    let a = a.min((cfg.v_max - state.speed) / dt);
    let (len, v1) = advance_longitudinal(state.speed, a, dt);
    let curvature = if len_cmd > 0.0 { delta_cmd / len_cmd } else { 0.0 };
    let max_turn = cfg.yaw_rate_max * dt;
    let delta = (curvature * len).clamp(-max_turn, max_turn);
    let ego = arc_pose(&state.ego, len, delta);
    let tick = state.tick + 1;
    let time = tick as f64 * dt;
    let ego_s = scenario.route.project_near(ego.x, ego.y, state.ego_s, PROJECTION_WINDOW).s;
    WorldState { tick, time, ego, speed: v1, accel: (v1 - state.speed) / dt, ego_s, agents: agents_at(scenario, time) }
}

/// A recorded expert execution: `states[i]` is the world at tick `i`.
#[derive(Clone, Debug)]
pub struct Episode {
    pub scenario: Scenario,
    pub states: Vec<WorldState>,
}

impl Episode {
    pub fn last_tick(&self) -> usize {
        self.states.len() - 1
    }

    /// Observation of the world `k·n` ticks after `tick` along the recorded
    /// execution.
    pub fn future_observation(&self, cfg: &SimConfig, tick: usize, k: usize, n: usize) -> Result<Observation> {
        let target = tick + k * n;
        if target > self.last_tick() {
            return Err(Error::Horizon { requested: target, available: self.last_tick() });
        }
        Ok(render_observation(&self.scenario, cfg, &self.states[target]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::{generate_scenario, Difficulty};

    fn setup(speed: f64) -> (Scenario, SimConfig, WorldState) {
        let mut sc = generate_scenario(3, Difficulty::Easy);
        sc.agents.clear();
        sc.ego_start.speed = speed;
        sc.ego_start.lateral = 0.0;
        sc.ego_start.heading_offset = 0.0;
        let st = initial_state(&sc);
        (sc, SimConfig::default(), st)
    }

    #[test]
    fn zero_command_from_rest_stays_put() {
        let (sc, cfg, st) = setup(0.0);
        let next = step_world(&sc, &cfg, &st, (0.0, 0.0));
        assert_eq!(next.ego, st.ego);
        assert_eq!(next.speed, 0.0);
        assert_eq!(next.time, 0.5);
    }

    #[test]
    fn straight_constant_speed_advances_speed_times_dt() {
        let (sc, cfg, st) = setup(8.0);
        let next = step_world(&sc, &cfg, &st, (4.0, 0.0));
        let moved = (next.ego.x - st.ego.x).hypot(next.ego.y - st.ego.y);
        assert!((moved - 8.0 * 0.5).abs() < 1e-9);
        assert_eq!(next.speed, 8.0);
        assert_eq!(next.accel, 0.0);
    }

    #[test]
    fn acceleration_is_clamped_exactly() {
        let (sc, cfg, st) = setup(5.0);
        let next = step_world(&sc, &cfg, &st, (10.0, 0.0));
        assert_eq!(next.accel, 4.0);
        let next = step_world(&sc, &cfg, &st, (0.1, 0.0));
        assert_eq!(next.accel, -4.0);
    }

    #[test]
    fn yaw_rate_is_clamped() {
        let (sc, cfg, st) = setup(6.0);
        let next = step_world(&sc, &cfg, &st, (0.5, 2.9));
        let turned = crate::tensor::wrap_angle(next.ego.theta - st.ego.theta).abs();
        assert!(turned <= cfg.yaw_rate_max * cfg.dt + 1e-12);
    }

    #[test]
    fn feasible_arc_is_followed_exactly() {
        let (sc, cfg, st) = setup(6.0);
        let target = arc_pose(&Pose::default(), 3.2, 0.2);
        let next = step_world(&sc, &cfg, &st, (target.x, target.y));
        let rel = st.ego.relative(&next.ego);
        assert!((rel.x - target.x).abs() < 1e-9 && (rel.y - target.y).abs() < 1e-9);
        assert!((rel.theta - 0.2).abs() < 1e-9);
    }

    #[test]
    fn longitudinal_inverse_round_trips() {
        for &(v, s) in &[(5.0, 3.0), (5.0, 1.0), (0.0, 0.4), (12.0, 7.9)] {
            let a = accel_for_distance(v, s, 0.5);
            let (len, _) = advance_longitudinal(v, a, 0.5);
            assert!((len - s).abs() < 1e-12, "v={v} s={s}");
        }
    }
}
