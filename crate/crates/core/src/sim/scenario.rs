use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::geometry::{Pose, Route};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Difficulty {
    Easy,
    Hard,
}

impl Difficulty {
    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Hard => "hard",
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Difficulty::Easy),
            1 => Some(Difficulty::Hard),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Template {
    Straight,
    GentleCurve,
    LeadBrake,
    CutIn,
    CrossingPedestrian,
    SharpTurn,
    ParkedCorridor,
}

impl Template {
    pub const EASY: [Template; 2] = [Template::Straight, Template::GentleCurve];
    pub const HARD: [Template; 5] =
        [Template::LeadBrake, Template::CutIn, Template::CrossingPedestrian, Template::SharpTurn, Template::ParkedCorridor];

    pub fn as_str(self) -> &'static str {
        match self {
            Template::Straight => "straight",
            Template::GentleCurve => "gentle_curve",
            Template::LeadBrake => "lead_brake",
            Template::CutIn => "cut_in",
            Template::CrossingPedestrian => "crossing_pedestrian",
            Template::SharpTurn => "sharp_turn",
            Template::ParkedCorridor => "parked_corridor",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentKind {
    Vehicle,
    Pedestrian,
    Parked,
}

/// Open-loop script in route (Frenet) coordinates. Agents do not react to
/// the ego, so their state is a closed-form function of time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Behavior {
    Static,
    /// Constant speed along the route; negative speed drives against it.
    Cruise { speed: f64 },
    /// Cruise, then brake at `decel` from `t_brake` until stopped.
    Brake { speed: f64, t_brake: f64, decel: f64 },
    /// Cruise while moving laterally to `to_lateral` on a cosine profile.
    CutIn { speed: f64, t_start: f64, duration: f64, to_lateral: f64 },
    /// Walk across the route at `speed` (signed, m/s lateral) from
    /// `t_start` until reaching `to_lateral`.
    Cross { speed: f64, t_start: f64, to_lateral: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub kind: AgentKind,
    pub length: f64,
    pub width: f64,
    pub s0: f64,
    pub lateral0: f64,
    pub behavior: Behavior,
}

/// Agent state at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentState {
    pub pose: Pose,
    pub speed: f64,
    /// World-frame velocity.
    pub vx: f64,
    pub vy: f64,
    pub s: f64,
    pub lateral: f64,
    /// Rate of change of `s` (m/s along the route).
    pub s_rate: f64,
}

impl Agent {
    pub fn vehicle(s0: f64, lateral0: f64, behavior: Behavior) -> Self {
        Self { kind: AgentKind::Vehicle, length: 4.5, width: 2.0, s0, lateral0, behavior }
    }

    pub fn parked(s0: f64, lateral0: f64) -> Self {
        Self { kind: AgentKind::Parked, length: 4.5, width: 2.0, s0, lateral0, behavior: Behavior::Static }
    }

    pub fn pedestrian(s0: f64, lateral0: f64, behavior: Behavior) -> Self {
        Self { kind: AgentKind::Pedestrian, length: 0.8, width: 0.8, s0, lateral0, behavior }
    }

    /// `(s, lateral, ds/dt, dl/dt)` at time `t`.
    pub fn frenet_at(&self, t: f64) -> (f64, f64, f64, f64) {
        let t = t.max(0.0);
        match self.behavior {
            Behavior::Static => (self.s0, self.lateral0, 0.0, 0.0),
            Behavior::Cruise { speed } => (self.s0 + speed * t, self.lateral0, speed, 0.0),
            Behavior::Brake { speed, t_brake, decel } => {
                if t < t_brake {
                    (self.s0 + speed * t, self.lateral0, speed, 0.0)
                } else {
                    let tau = (t - t_brake).min(speed / decel);
                    let s = self.s0 + speed * t_brake + speed * tau - 0.5 * decel * tau * tau;
                    (s, self.lateral0, speed - decel * tau, 0.0)
                }
            }
            Behavior::CutIn { speed, t_start, duration, to_lateral } => {
                let u = ((t - t_start) / duration).clamp(0.0, 1.0);
                let span = to_lateral - self.lateral0;
                let l = self.lateral0 + span * 0.5 * (1.0 - (std::f64::consts::PI * u).cos());
                let dl = if u > 0.0 && u < 1.0 {
                    span * 0.5 * std::f64::consts::PI * (std::f64::consts::PI * u).sin() / duration
                } else {
                    0.0
                };
                (self.s0 + speed * t, l, speed, dl)
            }
            Behavior::Cross { speed, t_start, to_lateral } => {
                let travel = (to_lateral - self.lateral0).abs();
                let walked = (speed.abs() * (t - t_start).max(0.0)).min(travel);
                let moving = t >= t_start && walked < travel;
                let l = self.lateral0 + walked * speed.signum();
                (self.s0, l, 0.0, if moving { speed } else { 0.0 })
            }
        }
    }

    pub fn state_at(&self, t: f64, route: &Route) -> AgentState {
        let (s, l, ds, dl) = self.frenet_at(t);
        let base = route.pose_at(s);
        let (sin, cos) = base.theta.sin_cos();
        let vx = cos * ds - sin * dl;
        let vy = sin * ds + cos * dl;
        let moving = ds != 0.0 || dl != 0.0;
        let heading = if moving { base.theta + dl.atan2(ds) } else { base.theta };
        let p = route.frenet_to_world(s, l);
        AgentState { pose: Pose::new(p.x, p.y, heading), speed: ds.hypot(dl), vx, vy, s, lateral: l, s_rate: ds }
    }
}

/// Ego initial condition in route coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EgoStart {
    pub s: f64,
    pub lateral: f64,
    pub heading_offset: f64,
    pub speed: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub difficulty: Difficulty,
    pub template: Template,
    pub route: Route,
    pub lane_half_width: f64,
    pub road_half_width: f64,
    pub speed_limit: f64,
    pub ego_start: EgoStart,
    pub agents: Vec<Agent>,
}

/// Sampling ranges for every randomized template parameter (closed
/// intervals, metres / seconds / m/s as appropriate).
pub mod bounds {
    pub const ROUTE_STEP: f64 = 0.5;
    pub const ROUTE_LENGTH: f64 = 320.0;
    pub const EGO_S: f64 = 20.0;
    pub const LANE_HALF_WIDTH: f64 = 1.75;
    pub const ROAD_HALF_WIDTH: f64 = 5.25;
    pub const ADJACENT_LANE: f64 = 3.5;

    pub const SPEED_LIMIT: (f64, f64) = (10.0, 10.0);
    pub const START_SPEED_FRACTION: (f64, f64) = (0.6, 1.0);
    pub const START_LATERAL: (f64, f64) = (-0.5, 0.5);
    pub const START_HEADING: (f64, f64) = (-0.06, 0.06);

    pub const CURVE_STRAIGHT: (f64, f64) = (0.0, 30.0);
    pub const CURVE_RADIUS: (f64, f64) = (120.0, 300.0);
    pub const SPARSE_LEAD_GAP: (f64, f64) = (35.0, 60.0);
    pub const SPARSE_LEAD_EXTRA_SPEED: (f64, f64) = (0.0, 2.0);
    pub const SPARSE_ONCOMING_GAP: (f64, f64) = (40.0, 120.0);
    pub const ONCOMING_SPEED: (f64, f64) = (5.0, 10.0);

    pub const HARD_START_SPEED_FRACTION: (f64, f64) = (0.8, 1.0);

    pub const BRAKE_GAP: (f64, f64) = (16.0, 28.0);
    pub const BRAKE_LEAD_SPEED_FRACTION: (f64, f64) = (0.9, 1.0);
    pub const BRAKE_TIME: (f64, f64) = (1.0, 3.0);
    pub const BRAKE_DECEL: (f64, f64) = (2.5, 3.5);

    pub const CUTIN_SPEED_LIMIT: (f64, f64) = (10.0, 10.0);
    pub const CUTIN_GAP: (f64, f64) = (14.0, 22.0);
    pub const CUTIN_SPEED_DEFICIT: (f64, f64) = (2.0, 3.5);
    pub const CUTIN_START: (f64, f64) = (0.5, 1.5);
    pub const CUTIN_DURATION: (f64, f64) = (2.0, 3.0);

    pub const CROSS_SPEED_LIMIT: (f64, f64) = (10.0, 10.0);
    pub const CROSS_DISTANCE: (f64, f64) = (28.0, 40.0);
    pub const CROSS_WALK_SPEED: (f64, f64) = (1.0, 1.6);
    pub const CROSS_START_LATERAL: f64 = 6.5;
    pub const CROSS_END_LATERAL: f64 = 7.0;
    pub const CROSS_JITTER: (f64, f64) = (-0.4, 0.4);

    pub const TURN_SPEED_LIMIT: (f64, f64) = (10.0, 10.0);
    pub const TURN_APPROACH: (f64, f64) = (30.0, 50.0);
    pub const TURN_RADIUS: (f64, f64) = (10.0, 15.0);
    pub const TURN_ONCOMING_GAP: (f64, f64) = (50.0, 90.0);
    pub const TURN_ONCOMING_SPEED: (f64, f64) = (5.0, 8.0);

    pub const PARKED_SPEED_LIMIT: (f64, f64) = (8.5, 8.5);
    pub const PARKED_COUNT: (usize, usize) = (3, 6);
    pub const PARKED_FIRST_GAP: (f64, f64) = (15.0, 25.0);
    pub const PARKED_SPACING: (f64, f64) = (6.5, 9.0);
    pub const PARKED_LATERAL: (f64, f64) = (-3.2, -2.8);
    pub const PARKED_PED_WALK_SPEED: (f64, f64) = (0.8, 1.3);
    pub const PARKED_PED_END_LATERAL: f64 = 4.0;

    /// Training-keyframe state perturbations; see `generate_dataset`.
    pub const PERTURB_LATERAL: (f64, f64) = (-1.5, 1.5);
    pub const PERTURB_HEADING: (f64, f64) = (-0.15, 0.15);
    pub const PERTURB_SPEED_FACTOR: (f64, f64) = (0.75, 1.25);
}

pub(crate) fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

fn straight_route(rng: &mut ChaCha8Rng, sections: &[(f64, f64)]) -> Route {
    let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let origin = Pose::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0), heading);
    Route::from_sections(origin, sections, bounds::ROUTE_STEP).expect("template sections are non-degenerate")
}

/// Start time that makes a walker at lateral `from` reach the lateral of a
/// straight-line constant-speed ego when it arrives, shifted by `jitter`.
/// Returns `(lateral at t=0, t_start)`.
fn adversarial_crossing(distance: f64, ego: &EgoStart, from: f64, walk: f64, jitter: f64) -> (f64, f64) {
    let arrival = distance / (ego.speed * ego.heading_offset.cos()).max(1.0);
    let target = ego.lateral + distance * ego.heading_offset.tan();
    let raw = arrival - (target - from).abs() / walk + jitter;
    if raw >= 0.0 {
        (from, raw)
    } else {
        (from - from.signum() * walk * (-raw), 0.0)
    }
}

/// Deterministic scenario for `(seed, difficulty)`. Every randomized
/// parameter is drawn from the ranges in [`bounds`].
pub fn generate_scenario(seed: u64, difficulty: Difficulty) -> Scenario {
    use bounds::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((difficulty.as_u8() as u64) << 63));
    let template = match difficulty {
        Difficulty::Easy => Template::EASY[rng.gen_range(0..Template::EASY.len())],
        Difficulty::Hard => Template::HARD[rng.gen_range(0..Template::HARD.len())],
    };
    let limit_range = match template {
        Template::CutIn => CUTIN_SPEED_LIMIT,
        Template::CrossingPedestrian => CROSS_SPEED_LIMIT,
        Template::SharpTurn => TURN_SPEED_LIMIT,
        Template::ParkedCorridor => PARKED_SPEED_LIMIT,
        _ => SPEED_LIMIT,
    };
    let speed_limit = uniform(&mut rng, limit_range);
    let frac = if difficulty == Difficulty::Easy { START_SPEED_FRACTION } else { HARD_START_SPEED_FRACTION };
    let ego_start = EgoStart {
        s: EGO_S,
        lateral: uniform(&mut rng, START_LATERAL),
        heading_offset: uniform(&mut rng, START_HEADING),
        speed: speed_limit * uniform(&mut rng, frac),
    };
    let v = ego_start.speed;
    let mut agents = Vec::new();
    let route = match template {
        Template::Straight | Template::GentleCurve => {
            let route = if template == Template::Straight {
                straight_route(&mut rng, &[(ROUTE_LENGTH, 0.0)])
            } else {
                let lead_in = uniform(&mut rng, CURVE_STRAIGHT);
                let radius = uniform(&mut rng, CURVE_RADIUS);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                straight_route(&mut rng, &[(EGO_S + lead_in, 0.0), (ROUTE_LENGTH - EGO_S - lead_in, sign / radius)])
            };
            if rng.gen_bool(0.5) {
                let gap = uniform(&mut rng, SPARSE_LEAD_GAP);
                let speed = speed_limit + uniform(&mut rng, SPARSE_LEAD_EXTRA_SPEED);
                agents.push(Agent::vehicle(EGO_S + gap, 0.0, Behavior::Cruise { speed }));
            }
            if rng.gen_bool(0.5) {
                let gap = uniform(&mut rng, SPARSE_ONCOMING_GAP);
                let speed = uniform(&mut rng, ONCOMING_SPEED);
                agents.push(Agent::vehicle(EGO_S + gap, ADJACENT_LANE, Behavior::Cruise { speed: -speed }));
            }
            route
        }
        Template::LeadBrake => {
            let gap = uniform(&mut rng, BRAKE_GAP);
            let speed = v * uniform(&mut rng, BRAKE_LEAD_SPEED_FRACTION);
            let t_brake = uniform(&mut rng, BRAKE_TIME);
            let decel = uniform(&mut rng, BRAKE_DECEL);
            agents.push(Agent::vehicle(EGO_S + gap, 0.0, Behavior::Brake { speed, t_brake, decel }));
            straight_route(&mut rng, &[(ROUTE_LENGTH, 0.0)])
        }
        Template::CutIn => {
            let gap = uniform(&mut rng, CUTIN_GAP);
            let speed = (v - uniform(&mut rng, CUTIN_SPEED_DEFICIT)).max(3.0);
            let t_start = uniform(&mut rng, CUTIN_START);
            let duration = uniform(&mut rng, CUTIN_DURATION);
            agents.push(Agent::vehicle(EGO_S + gap, ADJACENT_LANE, Behavior::CutIn { speed, t_start, duration, to_lateral: 0.0 }));
            straight_route(&mut rng, &[(ROUTE_LENGTH, 0.0)])
        }
        Template::CrossingPedestrian => {
            let distance = uniform(&mut rng, CROSS_DISTANCE);
            let walk = uniform(&mut rng, CROSS_WALK_SPEED);
            let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let jitter = uniform(&mut rng, CROSS_JITTER);
            let from = -side * CROSS_START_LATERAL;
            let (l0, t_start) = adversarial_crossing(distance, &ego_start, from, walk, jitter);
            agents.push(Agent::pedestrian(
                EGO_S + distance,
                l0,
                Behavior::Cross { speed: side * walk, t_start, to_lateral: side * CROSS_END_LATERAL },
            ));
            straight_route(&mut rng, &[(ROUTE_LENGTH, 0.0)])
        }
        Template::SharpTurn => {
            let approach = uniform(&mut rng, TURN_APPROACH);
            let radius = uniform(&mut rng, TURN_RADIUS);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let arc = FRAC_PI_2 * radius;
            let gap = uniform(&mut rng, TURN_ONCOMING_GAP);
            let speed = uniform(&mut rng, TURN_ONCOMING_SPEED);
            agents.push(Agent::vehicle(EGO_S + gap, ADJACENT_LANE, Behavior::Cruise { speed: -speed }));
            straight_route(&mut rng, &[(EGO_S + approach, 0.0), (arc, sign / radius), (ROUTE_LENGTH - EGO_S - approach - arc, 0.0)])
        }
        Template::ParkedCorridor => {
            let count = rng.gen_range(PARKED_COUNT.0..=PARKED_COUNT.1);
            let mut s = EGO_S + uniform(&mut rng, PARKED_FIRST_GAP);
            let mut slots = Vec::with_capacity(count);
            for _ in 0..count {
                agents.push(Agent::parked(s, uniform(&mut rng, PARKED_LATERAL)));
                slots.push(s);
                s += uniform(&mut rng, PARKED_SPACING);
            }
            let gap_index = rng.gen_range(0..count - 1);
            let ped_s = 0.5 * (slots[gap_index] + slots[gap_index + 1]);
            let walk = uniform(&mut rng, PARKED_PED_WALK_SPEED);
            let jitter = uniform(&mut rng, CROSS_JITTER);
            let from = 0.5 * (PARKED_LATERAL.0 + PARKED_LATERAL.1);
            let (l0, t_start) = adversarial_crossing(ped_s - EGO_S, &ego_start, from, walk, jitter);
            agents.push(Agent::pedestrian(ped_s, l0, Behavior::Cross { speed: walk, t_start, to_lateral: PARKED_PED_END_LATERAL }));
            straight_route(&mut rng, &[(ROUTE_LENGTH, 0.0)])
        }
    };
    Scenario {
        seed,
        difficulty,
        template,
        route,
        lane_half_width: LANE_HALF_WIDTH,
        road_half_width: ROAD_HALF_WIDTH,
        speed_limit,
        ego_start,
        agents,
    }
}
