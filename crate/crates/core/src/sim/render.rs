use super::geometry::Obb;
use super::scenario::Scenario;
use super::world::{WorldState, PROJECTION_WINDOW};
use super::SimConfig;

pub const CH_DRIVABLE: usize = 0;
pub const CH_OCCUPANCY: usize = 1;
pub const CH_VX: usize = 2;
pub const CH_VY: usize = 3;
pub const CH_ROUTE: usize = 4;
pub const NUM_CHANNELS: usize = 5;

/// Ego-centric raster, channel-major (`grid[c][row][col]`). Row 0 is the
/// far-forward edge and column 0 the far-left edge; the ego sits at the
/// centre of the window facing up.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub size: usize,
    pub grid: Vec<f32>,
    pub speed: f64,
}

impl Observation {
    pub fn zeros(size: usize) -> Self {
        Self { size, grid: vec![0.0; NUM_CHANNELS * size * size], speed: 0.0 }
    }

    pub fn at(&self, ch: usize, row: usize, col: usize) -> f32 {
        self.grid[(ch * self.size + row) * self.size + col]
    }

    fn set(&mut self, ch: usize, row: usize, col: usize, v: f32) {
        self.grid[(ch * self.size + row) * self.size + col] = v;
    }

    pub fn channel(&self, ch: usize) -> &[f32] {
        let n = self.size * self.size;
        &self.grid[ch * n..(ch + 1) * n]
    }
}

/// Ego-frame centre of cell `(row, col)`.
pub(crate) fn cell_center(cfg: &SimConfig, row: usize, col: usize) -> (f64, f64) {
    let cell = cfg.grid_extent / cfg.grid_size as f64;
    let half = cfg.grid_size as f64 / 2.0;
    ((half - row as f64 - 0.5) * cell, (half - col as f64 - 0.5) * cell)
}

/// Cell containing the ego-frame point `(x, y)`, if inside the window.
pub(crate) fn cell_of(cfg: &SimConfig, x: f64, y: f64) -> Option<(usize, usize)> {
    let cell = cfg.grid_extent / cfg.grid_size as f64;
    let half = cfg.grid_size as f64 / 2.0;
    let r = (half - x / cell).floor();
    let c = (half - y / cell).floor();
    let n = cfg.grid_size as f64;
    (r >= 0.0 && r < n && c >= 0.0 && c < n).then_some((r as usize, c as usize))
}

pub fn render_observation(scenario: &Scenario, cfg: &SimConfig, state: &WorldState) -> Observation {
    let g = cfg.grid_size;
    let mut obs = Observation::zeros(g);
    obs.speed = state.speed;
    let ego = state.ego;
    for row in 0..g {
        for col in 0..g {
            let (lx, ly) = cell_center(cfg, row, col);
            let (wx, wy) = ego.to_world(lx, ly);
            let p = scenario.route.project_near(wx, wy, state.ego_s, PROJECTION_WINDOW);
            if p.lateral.abs() <= scenario.road_half_width {
                obs.set(CH_DRIVABLE, row, col, 1.0);
            }
            if p.lateral.abs() <= scenario.lane_half_width {
                obs.set(CH_ROUTE, row, col, 1.0);
            }
        }
    }
    let vmax = cfg.v_max;
    for (agent, st) in scenario.agents.iter().zip(&state.agents) {
        let body = Obb::new(st.pose, agent.length, agent.width);
        let (sin, cos) = ego.theta.sin_cos();
        let vx = (cos * st.vx + sin * st.vy).clamp(-vmax, vmax) as f32;
        let vy = (-sin * st.vx + cos * st.vy).clamp(-vmax, vmax) as f32;
        let paint = |obs: &mut Observation, row: usize, col: usize| {
            obs.set(CH_OCCUPANCY, row, col, 1.0);
            obs.set(CH_VX, row, col, vx);
            obs.set(CH_VY, row, col, vy);
        };
        let (cx, cy) = ego.to_local(st.pose.x, st.pose.y);
        let reach = agent.length.hypot(agent.width) / 2.0 + cfg.grid_extent / g as f64;
        if cx.abs() > cfg.grid_extent / 2.0 + reach || cy.abs() > cfg.grid_extent / 2.0 + reach {
            continue;
        }
        // small agents may fall between cell centres; the centre cell is always marked
        if let Some((r, c)) = cell_of(cfg, cx, cy) {
            paint(&mut obs, r, c);
        }
        for row in 0..g {
            for col in 0..g {
                let (lx, ly) = cell_center(cfg, row, col);
                if (lx - cx).abs() > reach || (ly - cy).abs() > reach {
                    continue;
                }
                let (wx, wy) = ego.to_world(lx, ly);
                if body.contains(wx, wy) {
                    paint(&mut obs, row, col);
                }
            }
        }
    }
    obs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::{generate_scenario, Agent, Behavior, Difficulty};
    use crate::sim::world::initial_state;

    fn empty_straight() -> Scenario {
        let mut sc = generate_scenario(11, Difficulty::Easy);
        sc.agents.clear();
        sc.ego_start.lateral = 0.0;
        sc.ego_start.heading_offset = 0.0;
        sc
    }

    #[test]
    fn empty_road_has_no_occupancy() {
        let sc = empty_straight();
        let cfg = SimConfig::default();
        let obs = render_observation(&sc, &cfg, &initial_state(&sc));
        assert!(obs.channel(CH_OCCUPANCY).iter().all(|&v| v == 0.0));
        assert!(obs.grid.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn ego_on_centerline_marks_centre_route_cells() {
        let sc = empty_straight();
        let cfg = SimConfig::default();
        let obs = render_observation(&sc, &cfg, &initial_state(&sc));
        let h = cfg.grid_size / 2;
        for (r, c) in [(h - 1, h - 1), (h - 1, h), (h, h - 1), (h, h)] {
            assert_eq!(obs.at(CH_ROUTE, r, c), 1.0);
            assert_eq!(obs.at(CH_DRIVABLE, r, c), 1.0);
        }
    }

    #[test]
    fn masks_are_binary_and_velocity_bounded() {
        let cfg = SimConfig::default();
        for seed in 0..10 {
            let sc = generate_scenario(seed, Difficulty::Hard);
            let obs = render_observation(&sc, &cfg, &initial_state(&sc));
            for ch in [CH_DRIVABLE, CH_OCCUPANCY, CH_ROUTE] {
                assert!(obs.channel(ch).iter().all(|&v| v == 0.0 || v == 1.0));
            }
            for ch in [CH_VX, CH_VY] {
                assert!(obs.channel(ch).iter().all(|&v| (v as f64).abs() <= cfg.v_max));
            }
        }
    }

    #[test]
    fn velocity_is_expressed_in_the_ego_frame() {
        let mut sc = empty_straight();
        sc.agents.push(Agent::vehicle(sc.ego_start.s + 12.0, 0.0, Behavior::Cruise { speed: 6.0 }));
        let cfg = SimConfig::default();
        let st = initial_state(&sc);
        let obs = render_observation(&sc, &cfg, &st);
        let (r, c) = cell_of(&cfg, 12.0, 0.0).unwrap();
        assert_eq!(obs.at(CH_OCCUPANCY, r, c), 1.0);
        assert!((obs.at(CH_VX, r, c) - 6.0).abs() < 1e-5);
        assert!(obs.at(CH_VY, r, c).abs() < 1e-5);
    }
}
