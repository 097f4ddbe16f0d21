//! Generates one scenario per difficulty, drives it with the scripted expert
//! and prints the ego-centric raster the model sees at the first tick.

use futurex::sim::{generate_scenario, render_observation, run_expert_episode, Difficulty, SimConfig, CH_DRIVABLE, CH_OCCUPANCY, CH_ROUTE};

fn main() {
    let cfg = SimConfig::default();
    for difficulty in [Difficulty::Easy, Difficulty::Hard] {
        let scenario = generate_scenario(7, difficulty);
        let episode = run_expert_episode(&scenario, &cfg, cfg.episode_ticks);
        let last = episode.states.last().unwrap();
        println!(
            "{} {}: {} agents, expert travels {:.1} m in {} ticks, final speed {:.1} m/s",
            difficulty.as_str(),
            scenario.template.as_str(),
            scenario.agents.len(),
            last.ego_s - episode.states[0].ego_s,
            episode.last_tick(),
            last.speed
        );
        let obs = render_observation(&scenario, &cfg, &episode.states[0]);
        for row in 0..obs.size {
            let line: String = (0..obs.size)
                .map(|col| {
                    if obs.at(CH_OCCUPANCY, row, col) > 0.5 {
                        '#'
                    } else if obs.at(CH_ROUTE, row, col) > 0.5 {
                        '*'
                    } else if obs.at(CH_DRIVABLE, row, col) > 0.5 {
                        '.'
                    } else {
                        ' '
                    }
                })
                .collect();
            println!("  {line}");
        }
    }
}
