//! Closed-loop evaluation: receding-horizon execution in the simulator, the
//! five driving submetrics and their aggregate score, latency profiling,
//! reports and traces.

mod closed_loop;
mod metrics;
mod planner;
mod report;
mod trace;

pub use closed_loop::{run_closed_loop, score_states, EpisodeResult, EvalConfig};
pub use metrics::{pdms, SubMetrics};
pub use planner::{ConstantSpeedPlanner, ExpertPlanner, ModelPlanner, PlanOutput, Planner};
pub use report::{benchmark, LatencyReport, LatencyStats, PdmsReport, ScenarioRow};
pub use trace::{Trace, TracePlan, TraceState};
