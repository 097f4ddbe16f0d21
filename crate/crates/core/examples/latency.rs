//! Median per-stage inference latency for the instant branch and for
//! thinking with two and four reasoning segments.

use futurex::eval::LatencyReport;
use futurex::model::{FutureX, InferenceSession, ModelConfig, ThinkMode};
use futurex::sim::{generate_scenario, render_observation, run_expert_episode, Difficulty, SimConfig};

fn main() -> futurex::Result<()> {
    let sim = SimConfig::default();
    let scenario = generate_scenario(4, Difficulty::Hard);
    let episode = run_expert_episode(&scenario, &sim, sim.episode_ticks);
    let frames: Vec<_> = episode.states.iter().map(|s| render_observation(&scenario, &sim, s)).collect();
    let k4 = FutureX::new(ModelConfig::default(), 0)?;
    let k2 = FutureX::new(ModelConfig { segments: 2, segment_len: 4, ..ModelConfig::default() }, 0)?;
    for (name, model, mode) in [("instant", &k4, ThinkMode::NoThink), ("think K=2", &k2, ThinkMode::AllThink), ("think K=4", &k4, ThinkMode::AllThink)] {
        let mut session = InferenceSession::new(model, 0.5);
        let timings = frames.iter().map(|o| session.infer(o, mode).map(|i| i.timings)).collect::<futurex::Result<Vec<_>>>()?;
        let r = LatencyReport::from_timings(&timings);
        let stages: Vec<String> = r.stages.iter().map(|s| format!("{:.3}", s.p50)).collect();
        println!("{name:<10} median {:.3} ms  stages [encode, propose, gate, rollout, summarize] = [{}]", r.total.p50, stages.join(", "));
    }
    Ok(())
}
