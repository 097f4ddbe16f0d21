use std::fmt::Write as _;
use std::time::Duration;

use super::closed_loop::{run_closed_loop, EvalConfig};
use super::metrics::SubMetrics;
use super::planner::Planner;
use super::trace::Trace;
use crate::error::{Error, Result};
use crate::model::StageTimings;
use crate::sim::{Scenario, SimConfig};

/// Latency distribution in milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LatencyStats {
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

impl LatencyStats {
    /// Nearest-rank percentiles of `samples` (milliseconds).
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        let rank = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Self { mean: v.iter().sum::<f64>() / v.len() as f64, p50: rank(0.5), p90: rank(0.9), p99: rank(0.99) }
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Per-stage and total latency over every planned frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LatencyReport {
    pub frames: usize,
    pub stages: [LatencyStats; 5],
    pub total: LatencyStats,
}

impl LatencyReport {
    pub fn from_timings(ts: &[StageTimings]) -> Self {
        let stages = std::array::from_fn(|i| LatencyStats::from_samples(&ts.iter().map(|t| ms(t.as_array()[i])).collect::<Vec<_>>()));
        let total = LatencyStats::from_samples(&ts.iter().map(|t| ms(t.total())).collect::<Vec<_>>());
        Self { frames: ts.len(), stages, total }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioRow {
    pub index: usize,
    pub seed: u64,
    pub template: String,
    pub difficulty: String,
    pub metrics: SubMetrics,
    pub pdms: f64,
    pub thinking_ticks: usize,
    pub ticks: usize,
    /// Mean per-stage latency over this scenario's frames, milliseconds.
    pub stage_ms: [f64; 5],
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdmsReport {
    pub label: String,
    pub rows: Vec<ScenarioRow>,
    pub means: SubMetrics,
    pub mean_pdms: f64,
    /// Fraction of planned frames that took the thinking branch.
    pub think_rate: f64,
    pub latency: LatencyReport,
}

/// Closed-loop evaluation of `planner` over every scenario, in order.
pub fn benchmark(planner: &mut dyn Planner, scenarios: &[Scenario], cfg: &SimConfig, ev: &EvalConfig) -> Result<(PdmsReport, Vec<Trace>)> {
    if scenarios.is_empty() {
        return Err(Error::Invalid("benchmark needs at least one scenario".into()));
    }
    ev.validate()?;
    let mut rows = Vec::with_capacity(scenarios.len());
    let mut traces = Vec::with_capacity(scenarios.len());
    let mut all_timings = Vec::new();
    for (index, sc) in scenarios.iter().enumerate() {
        let r = run_closed_loop(planner, sc, cfg, ev, ev.episode_ticks)?;
        let n = r.timings.len().max(1) as f64;
        let stage_ms = std::array::from_fn(|i| r.timings.iter().map(|t| ms(t.as_array()[i])).sum::<f64>() / n);
        rows.push(ScenarioRow {
            index,
            seed: sc.seed,
            template: sc.template.as_str().into(),
            difficulty: sc.difficulty.as_str().into(),
            metrics: r.metrics,
            pdms: r.pdms,
            thinking_ticks: r.thinking_ticks,
            ticks: r.ticks,
            stage_ms,
        });
        all_timings.extend(r.timings);
        traces.push(r.trace);
    }
    let report = PdmsReport::from_rows(planner.label(), rows, LatencyReport::from_timings(&all_timings));
    Ok((report, traces))
}

impl PdmsReport {
    pub fn from_rows(label: String, rows: Vec<ScenarioRow>, latency: LatencyReport) -> Self {
        let n = rows.len().max(1) as f64;
        let mean = |f: fn(&ScenarioRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let means = SubMetrics {
            nc: mean(|r| r.metrics.nc),
            dac: mean(|r| r.metrics.dac),
            ep: mean(|r| r.metrics.ep),
            ttc: mean(|r| r.metrics.ttc),
            comf: mean(|r| r.metrics.comf),
        };
        let mean_pdms = mean(|r| r.pdms);
        let frames: usize = rows.iter().map(|r| r.ticks).sum();
        let thinking: usize = rows.iter().map(|r| r.thinking_ticks).sum();
        let think_rate = if frames == 0 { 0.0 } else { thinking as f64 / frames as f64 };
        Self { label, rows, means, mean_pdms, think_rate, latency }
    }

    /// Mean PDMS over the rows of one difficulty class.
    pub fn mean_pdms_for(&self, difficulty: &str) -> Option<f64> {
        let v: Vec<f64> = self.rows.iter().filter(|r| r.difficulty == difficulty).map(|r| r.pdms).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Key-value text, one block per scenario. Latency lines are included
    /// only when asked for, so the default output is reproducible.
    pub fn to_text(&self, with_latency: bool) -> String {
        let mut s = String::new();
        let m = &self.means;
        let _ = writeln!(s, "planner = {}", self.label);
        let _ = writeln!(s, "scenarios = {}", self.rows.len());
        let _ = writeln!(s, "mean_pdms = {:.6}", self.mean_pdms);
        let _ = writeln!(s, "mean_nc = {:.6}\nmean_dac = {:.6}\nmean_ep = {:.6}\nmean_ttc = {:.6}\nmean_comf = {:.6}", m.nc, m.dac, m.ep, m.ttc, m.comf);
        let _ = writeln!(s, "think_rate = {:.6}", self.think_rate);
        for d in ["easy", "hard"] {
            if let Some(v) = self.mean_pdms_for(d) {
                let _ = writeln!(s, "mean_pdms_{d} = {v:.6}");
            }
        }
        if with_latency {
            let _ = writeln!(s, "latency_frames = {}", self.latency.frames);
            let l = &self.latency.total;
            let _ = writeln!(s, "latency_total_ms = mean {:.4} p50 {:.4} p90 {:.4} p99 {:.4}", l.mean, l.p50, l.p90, l.p99);
            for (name, l) in StageTimings::NAMES.iter().zip(&self.latency.stages) {
                let _ = writeln!(s, "latency_{name}_ms = mean {:.4} p50 {:.4} p90 {:.4} p99 {:.4}", l.mean, l.p50, l.p90, l.p99);
            }
        }
        for r in &self.rows {
            let m = &r.metrics;
            let _ = writeln!(s, "\n[scenario {}]", r.index);
            let _ = writeln!(s, "seed = {}\ntemplate = {}\ndifficulty = {}", r.seed, r.template, r.difficulty);
            let _ = writeln!(s, "nc = {}\ndac = {}\nep = {:.6}\nttc = {}\ncomf = {}", m.nc, m.dac, m.ep, m.ttc, m.comf);
            let _ = writeln!(s, "pdms = {:.6}\nthinking_ticks = {}/{}", r.pdms, r.thinking_ticks, r.ticks);
        }
        s
    }

    /// One CSV row per scenario.
    pub fn to_csv(&self, with_latency: bool) -> String {
        let mut s = String::from("scenario,seed,template,difficulty,nc,dac,ep,ttc,comf,pdms,mode,thinking_ticks");
        if with_latency {
            StageTimings::NAMES.iter().for_each(|n| {
                let _ = write!(s, ",{n}_ms");
            });
        }
        s.push('\n');
        for r in &self.rows {
            let m = &r.metrics;
            let _ = write!(
                s,
                "{},{},{},{},{},{},{:.6},{},{},{:.6},{},{}",
                r.index, r.seed, r.template, r.difficulty, m.nc, m.dac, m.ep, m.ttc, m.comf, r.pdms, self.label, r.thinking_ticks
            );
            if with_latency {
                r.stage_ms.iter().for_each(|v| {
                    let _ = write!(s, ",{v:.4}");
                });
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::planner::{ConstantSpeedPlanner, ExpertPlanner};
    use crate::sim::benchmark_scenarios;

    #[test]
    fn percentiles_use_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = LatencyStats::from_samples(&v);
        assert_eq!((s.p50, s.p90, s.p99), (50.0, 90.0, 99.0));
        assert_eq!(s.mean, 50.5);
        assert_eq!(LatencyStats::from_samples(&[3.0]).p99, 3.0);
    }

    #[test]
    fn reports_are_deterministic_and_order_free() {
        let cfg = SimConfig::default();
        let ev = EvalConfig { episode_ticks: 12, ..EvalConfig::default() };
        let scs = benchmark_scenarios(3, 8, 0.3);
        let (a, ta) = benchmark(&mut ExpertPlanner, &scs, &cfg, &ev).unwrap();
        let (b, tb) = benchmark(&mut ExpertPlanner, &scs, &cfg, &ev).unwrap();
        assert_eq!(a.to_text(false), b.to_text(false));
        assert_eq!(a.to_csv(false), b.to_csv(false));
        assert_eq!(ta, tb);
        let rev: Vec<_> = scs.iter().rev().cloned().collect();
        let (c, _) = benchmark(&mut ConstantSpeedPlanner, &rev, &cfg, &ev).unwrap();
        let (d, _) = benchmark(&mut ConstantSpeedPlanner, &scs, &cfg, &ev).unwrap();
        assert!((c.mean_pdms - d.mean_pdms).abs() < 1e-12);
        let mean = a.rows.iter().map(|r| r.pdms).sum::<f64>() / a.rows.len() as f64;
        assert_eq!(a.mean_pdms, mean);
        assert!(benchmark(&mut ExpertPlanner, &[], &cfg, &ev).is_err());
    }

    #[test]
    fn csv_has_one_row_per_scenario() {
        let cfg = SimConfig::default();
        let ev = EvalConfig { episode_ticks: 4, ..EvalConfig::default() };
        let (r, _) = benchmark(&mut ExpertPlanner, &benchmark_scenarios(1, 5, 0.3), &cfg, &ev).unwrap();
        let csv = r.to_csv(true);
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.lines().all(|l| l.split(',').count() == 17));
    }
}
