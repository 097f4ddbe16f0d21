//! Runs one closed-loop episode with the expert and renders its trace as an
//! SVG overlay plus CSV into the system temp directory.

use futurex::cli::plot;
use futurex::eval::{run_closed_loop, EvalConfig, ExpertPlanner};
use futurex::sim::{generate_scenario, Difficulty, SimConfig};

fn main() -> futurex::Result<()> {
    let sim = SimConfig::default();
    let ev = EvalConfig::default();
    let scenario = generate_scenario(21, Difficulty::Hard);
    let result = run_closed_loop(&mut ExpertPlanner, &scenario, &sim, &ev, ev.episode_ticks)?;
    let (svg, csv) = plot::render(&result.trace)?;
    let dir = std::env::temp_dir();
    let (svg_path, csv_path) = (dir.join("futurex_trace.svg"), dir.join("futurex_trace.csv"));
    std::fs::write(&svg_path, svg)?;
    std::fs::write(&csv_path, csv)?;
    println!("{} (pdms {:.3}): wrote {} and {}", result.trace.template, result.pdms, svg_path.display(), csv_path.display());
    Ok(())
}
