//! Closed-loop PDMS of the reference planners and an untrained model in its
//! three thinking modes on a small mixed benchmark.

use futurex::eval::{benchmark, ConstantSpeedPlanner, EvalConfig, ExpertPlanner, ModelPlanner, Planner};
use futurex::model::{FutureX, ModelConfig, ThinkMode};
use futurex::sim::{benchmark_scenarios, SimConfig};

fn main() -> futurex::Result<()> {
    let sim = SimConfig::default();
    let ev = EvalConfig::default();
    let scenarios = benchmark_scenarios(777, 12, 0.3);
    let model = FutureX::new(ModelConfig::default(), 0)?;
    let mut expert = ExpertPlanner;
    let mut constant = ConstantSpeedPlanner;
    let mut none = ModelPlanner::new(&model, ThinkMode::NoThink, 0.5);
    let mut all = ModelPlanner::new(&model, ThinkMode::AllThink, 0.5);
    let mut auto = ModelPlanner::new(&model, ThinkMode::Auto, 0.5);
    let planners: [(&str, &mut dyn Planner); 5] =
        [("expert", &mut expert), ("constant speed", &mut constant), ("untrained none", &mut none), ("untrained all", &mut all), ("untrained auto", &mut auto)];
    for (name, planner) in planners {
        let (r, _) = benchmark(planner, &scenarios, &sim, &ev)?;
        let m = r.means;
        println!(
            "{name:<16} pdms {:.3}  nc {:.2}  dac {:.2}  ep {:.2}  ttc {:.2}  comf {:.2}  think {:.2}",
            r.mean_pdms, m.nc, m.dac, m.ep, m.ttc, m.comf, r.think_rate
        );
    }
    Ok(())
}
