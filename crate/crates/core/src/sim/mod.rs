//! Synthetic 2D driving world: scripted scenarios, kinematic ego stepping,
//! ego-centric raster observations and a privileged expert planner.

mod dataset;
mod expert;
mod geometry;
mod render;
mod scenario;
mod world;

pub use dataset::{benchmark_scenarios, generate_dataset, keyframe_ticks, read_dataset, read_manifest, write_dataset, DatasetHeader, Manifest, Record};
pub use expert::{expert_accel, expert_command, expert_plan, run_expert_episode, run_expert_from, ExpertLabel};
pub use geometry::{Obb, Pose, Projection, Route};
pub use render::{render_observation, Observation, CH_DRIVABLE, CH_OCCUPANCY, CH_ROUTE, CH_VX, CH_VY, NUM_CHANNELS};
pub use scenario::{bounds, generate_scenario, Agent, AgentKind, AgentState, Behavior, Difficulty, EgoStart, Scenario, Template};
pub use world::{advance_longitudinal, initial_state, step_world, Episode, WorldState};

/// Simulator constants shared by every component.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// Tick length in seconds.
    pub dt: f64,
    pub grid_size: usize,
    /// Side length of the square observation window in metres.
    pub grid_extent: f64,
    pub v_max: f64,
    pub accel_max: f64,
    pub yaw_rate_max: f64,
    /// Number of ticks in one expert label (planning horizon T).
    pub horizon: usize,
    /// Length of a recorded or evaluated episode in ticks.
    pub episode_ticks: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.5,
            grid_size: 32,
            grid_extent: 48.0,
            v_max: 15.0,
            accel_max: 4.0,
            yaw_rate_max: 1.0,
            horizon: 8,
            episode_ticks: 30,
        }
    }
}

pub const EGO_LENGTH: f64 = 4.5;
pub const EGO_WIDTH: f64 = 2.0;
