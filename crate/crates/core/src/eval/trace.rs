//! Line-oriented trace files. Each line starts with a record tag followed by
//! space-separated fields; floats use the shortest round-trip decimal form.
//!
//! ```text
//! fxtrace 1
//! scenario <seed> <template> <difficulty>
//! road <road_half_width> <lane_half_width>
//! metrics <nc> <dac> <ep> <ttc> <comf> <pdms>
//! route <x> <y>
//! agent <length> <width>
//! expert <x> <y> <θ>
//! state <x> <y> <θ> <speed> [<agent x> <agent y> <agent θ>]...
//! plan <thinking 0|1> <d or -> <n> [<x> <y> <θ>]×n [<x> <y> <θ>]...
//! ```
//! The `plan` record holds the executed plan followed by the initial plan
//! (absent when the planner does not refine).

use std::fmt::Write as _;

use super::metrics::SubMetrics;
use crate::error::{Error, Result};
use crate::sim::Pose;

#[derive(Clone, Debug, PartialEq)]
pub struct TraceState {
    pub ego: Pose,
    pub speed: f64,
    pub agents: Vec<Pose>,
}

/// Plans of one tick in world coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct TracePlan {
    pub plan: Vec<Pose>,
    pub initial: Option<Vec<Pose>>,
    pub thinking: bool,
    pub d: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub scenario_seed: u64,
    pub template: String,
    pub difficulty: String,
    pub road_half_width: f64,
    pub lane_half_width: f64,
    pub route: Vec<(f64, f64)>,
    pub agent_dims: Vec<(f64, f64)>,
    pub expert: Vec<Pose>,
    pub states: Vec<TraceState>,
    pub plans: Vec<TracePlan>,
    pub metrics: SubMetrics,
    pub pdms: f64,
}

fn poses(out: &mut String, ps: &[Pose]) {
    for p in ps {
        let _ = write!(out, " {} {} {}", p.x, p.y, p.theta);
    }
}

impl Trace {
    pub fn to_text(&self) -> String {
        let mut s = String::from("fxtrace 1\n");
        let m = &self.metrics;
        let _ = writeln!(s, "scenario {} {} {}", self.scenario_seed, self.template, self.difficulty);
        let _ = writeln!(s, "road {} {}", self.road_half_width, self.lane_half_width);
        let _ = writeln!(s, "metrics {} {} {} {} {} {}", m.nc, m.dac, m.ep, m.ttc, m.comf, self.pdms);
        for (x, y) in &self.route {
            let _ = writeln!(s, "route {x} {y}");
        }
        for (l, w) in &self.agent_dims {
            let _ = writeln!(s, "agent {l} {w}");
        }
        for p in &self.expert {
            let _ = writeln!(s, "expert {} {} {}", p.x, p.y, p.theta);
        }
        for st in &self.states {
            let _ = write!(s, "state {} {} {} {}", st.ego.x, st.ego.y, st.ego.theta, st.speed);
            poses(&mut s, &st.agents);
            s.push('\n');
        }
        for p in &self.plans {
            let d = p.d.map_or("-".to_string(), |d| d.to_string());
            let _ = write!(s, "plan {} {} {}", u8::from(p.thinking), d, p.plan.len());
            poses(&mut s, &p.plan);
            if let Some(init) = &p.initial {
                poses(&mut s, init);
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "fxtrace 1")) => {}
            _ => return Err(Error::Format("missing `fxtrace 1` header".into())),
        }
        let mut t = Trace {
            scenario_seed: 0,
            template: String::new(),
            difficulty: String::new(),
            road_half_width: 0.0,
            lane_half_width: 0.0,
            route: Vec::new(),
            agent_dims: Vec::new(),
            expert: Vec::new(),
            states: Vec::new(),
            plans: Vec::new(),
            metrics: SubMetrics::perfect(),
            pdms: 0.0,
        };
        let mut seen_scenario = false;
        for (no, line) in lines {
            let bad = |what: &str| Error::Format(format!("trace line {}: {what}", no + 1));
            let mut it = line.split_whitespace();
            let Some(tag) = it.next() else { continue };
            let fields: Vec<&str> = it.collect();
            let nums = |f: &[&str]| -> Result<Vec<f64>> { f.iter().map(|v| v.parse::<f64>().map_err(|_| bad(&format!("bad number {v:?}")))).collect() };
            let to_poses = |v: &[f64]| -> Result<Vec<Pose>> {
                if !v.len().is_multiple_of(3) {
                    return Err(bad("pose list length is not a multiple of 3"));
                }
                Ok(v.chunks(3).map(|c| Pose { x: c[0], y: c[1], theta: c[2] }).collect())
            };
            let want = |n: usize| if fields.len() == n { Ok(()) } else { Err(bad(&format!("{tag} needs {n} fields, got {}", fields.len()))) };
            match tag {
                "scenario" => {
                    want(3)?;
                    t.scenario_seed = fields[0].parse().map_err(|_| bad("bad seed"))?;
                    t.template = fields[1].to_string();
                    t.difficulty = fields[2].to_string();
                    seen_scenario = true;
                }
                "road" => {
                    want(2)?;
                    let v = nums(&fields)?;
                    (t.road_half_width, t.lane_half_width) = (v[0], v[1]);
                }
                "metrics" => {
                    want(6)?;
                    let v = nums(&fields)?;
                    t.metrics = SubMetrics { nc: v[0], dac: v[1], ep: v[2], ttc: v[3], comf: v[4] };
                    t.metrics.validate()?;
                    t.pdms = v[5];
                }
                "route" => {
                    want(2)?;
                    let v = nums(&fields)?;
                    t.route.push((v[0], v[1]));
                }
                "agent" => {
                    want(2)?;
                    let v = nums(&fields)?;
                    t.agent_dims.push((v[0], v[1]));
                }
                "expert" => {
                    want(3)?;
                    t.expert.extend(to_poses(&nums(&fields)?)?);
                }
                "state" => {
                    let v = nums(&fields)?;
                    if v.len() != 4 + 3 * t.agent_dims.len() {
                        return Err(bad("state does not match the agent count"));
                    }
                    t.states.push(TraceState { ego: Pose { x: v[0], y: v[1], theta: v[2] }, speed: v[3], agents: to_poses(&v[4..])? });
                }
                "plan" => {
                    if fields.len() < 3 {
                        return Err(bad("plan needs a header"));
                    }
                    let thinking = match fields[0] {
                        "0" => false,
                        "1" => true,
                        _ => return Err(bad("thinking flag must be 0 or 1")),
                    };
                    let d = if fields[1] == "-" { None } else { Some(fields[1].parse().map_err(|_| bad("bad score"))?) };
                    let n: usize = fields[2].parse().map_err(|_| bad("bad plan length"))?;
                    let all = to_poses(&nums(&fields[3..])?)?;
                    let (plan, initial) = match all.len() {
                        l if l == n => (all, None),
                        l if l == 2 * n => (all[..n].to_vec(), Some(all[n..].to_vec())),
                        _ => return Err(bad("plan pose count does not match its length")),
                    };
                    t.plans.push(TracePlan { plan, initial, thinking, d });
                }
                _ => return Err(bad(&format!("unknown record {tag:?}"))),
            }
        }
        if !seen_scenario || t.route.len() < 2 || t.states.is_empty() {
            return Err(Error::Format("trace lacks scenario, route or states".into()));
        }
        Ok(t)
    }
}
