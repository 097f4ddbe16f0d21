//! Plans once from an expert state, in each thinking mode. Pass a checkpoint
//! written by `futurex train` (default model config) to use trained weights.

use futurex::model::{load_checkpoint, FutureX, InferenceSession, ModelConfig, ThinkMode};
use futurex::sim::{generate_scenario, render_observation, run_expert_episode, Difficulty, SimConfig};

fn main() -> futurex::Result<()> {
    let mut model = FutureX::new(ModelConfig::default(), 0)?;
    if let Some(path) = std::env::args().nth(1) {
        load_checkpoint(std::path::Path::new(&path), None)?.apply_to(&mut model)?;
    }
    let sim = SimConfig::default();
    let scenario = generate_scenario(3, Difficulty::Hard);
    let episode = run_expert_episode(&scenario, &sim, 10);
    let obs = render_observation(&scenario, &sim, &episode.states[10]);
    let mut session = InferenceSession::new(&model, 0.5);
    for mode in [ThinkMode::NoThink, ThinkMode::AllThink, ThinkMode::Auto] {
        let inf = session.infer(&obs, mode)?;
        let end = inf.trajectory.waypoints.last().unwrap();
        println!(
            "{:<4} d {:.3} -> {:?}; endpoint ({:.2}, {:.2}, {:.3}); {:.2} ms",
            mode.as_str(),
            inf.decision.d,
            inf.decision.mode,
            end[0],
            end[1],
            end[2],
            inf.timings.total().as_secs_f64() * 1e3
        );
    }
    Ok(())
}
