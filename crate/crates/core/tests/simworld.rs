use futurex::sim::{
    bounds, generate_dataset, generate_scenario, initial_state, render_observation, run_expert_episode, step_world, Agent, AgentKind,
    Behavior, Difficulty, Obb, Scenario, SimConfig, Template, WorldState, CH_OCCUPANCY, EGO_LENGTH, EGO_WIDTH,
};

fn within(v: f64, (lo, hi): (f64, f64)) -> bool {
    v >= lo - 1e-12 && v <= hi + 1e-12
}

fn collision(sc: &Scenario, st: &WorldState) -> bool {
    let ego = Obb::new(st.ego, EGO_LENGTH, EGO_WIDTH);
    sc.agents.iter().zip(&st.agents).any(|(a, s)| ego.overlaps(&Obb::new(s.pose, a.length, a.width)))
}

fn off_road(sc: &Scenario, st: &WorldState) -> bool {
    sc.route.project_near(st.ego.x, st.ego.y, st.ego_s, 60.0).lateral.abs() > sc.road_half_width
}

#[test]
fn template_parameters_stay_within_bounds() {
    use bounds::*;
    let mut seen = std::collections::HashSet::new();
    for seed in 0..1000 {
        for diff in [Difficulty::Easy, Difficulty::Hard] {
            let sc = generate_scenario(seed, diff);
            seen.insert(sc.template);
            let v = sc.ego_start.speed;
            assert!(within(sc.speed_limit, SPEED_LIMIT) || sc.template == Template::ParkedCorridor);
            assert!(within(sc.ego_start.lateral, START_LATERAL) && within(sc.ego_start.heading_offset, START_HEADING));
            assert!(v > 0.0 && v <= sc.speed_limit);
            let ego = Obb::new(initial_state(&sc).ego, EGO_LENGTH, EGO_WIDTH);
            for (a, st) in sc.agents.iter().zip(&initial_state(&sc).agents) {
                assert!(!ego.overlaps(&Obb::new(st.pose, a.length, a.width)), "seed {seed}: agent starts on the ego");
            }
            let gap = |a: &Agent| a.s0 - sc.ego_start.s;
            match sc.template {
                Template::Straight | Template::GentleCurve => {
                    assert_eq!(diff, Difficulty::Easy);
                    assert!(sc.agents.len() <= 2);
                }
                Template::LeadBrake => {
                    let a = &sc.agents[0];
                    let Behavior::Brake { speed, t_brake, decel } = a.behavior else { panic!() };
                    assert!(within(gap(a), BRAKE_GAP) && within(t_brake, BRAKE_TIME) && within(decel, BRAKE_DECEL));
                    assert!(within(speed / v, BRAKE_LEAD_SPEED_FRACTION));
                }
                Template::CutIn => {
                    let a = &sc.agents[0];
                    let Behavior::CutIn { t_start, duration, .. } = a.behavior else { panic!() };
                    assert!(within(gap(a), CUTIN_GAP) && within(t_start, CUTIN_START) && within(duration, CUTIN_DURATION));
                    assert_eq!(a.lateral0, ADJACENT_LANE);
                }
                Template::CrossingPedestrian => {
                    let a = &sc.agents[0];
                    assert_eq!(a.kind, AgentKind::Pedestrian);
                    let Behavior::Cross { speed, t_start, .. } = a.behavior else { panic!() };
                    assert!(within(gap(a), CROSS_DISTANCE) && within(speed.abs(), CROSS_WALK_SPEED) && t_start >= 0.0);
                    assert!(a.lateral0.abs() <= CROSS_START_LATERAL);
                }
                Template::SharpTurn => {
                    assert!(within(gap(&sc.agents[0]), TURN_ONCOMING_GAP));
                    // turning segments span a quarter circle of the sampled radius
                    let pts = sc.route.points();
                    let heading = |i: usize| (pts[i + 1].1 - pts[i].1).atan2(pts[i + 1].0 - pts[i].0);
                    let mut turning = 0.0;
                    let mut total = 0.0;
                    for i in 1..pts.len() - 1 {
                        let d = futurex::tensor::wrap_angle(heading(i) - heading(i - 1));
                        if d.abs() > 1e-9 {
                            turning += (pts[i + 1].0 - pts[i].0).hypot(pts[i + 1].1 - pts[i].1);
                            total += d;
                        }
                    }
                    assert!((total.abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
                    let radius = turning / std::f64::consts::FRAC_PI_2;
                    assert!(radius >= TURN_RADIUS.0 - 0.5 && radius <= TURN_RADIUS.1 + 0.5, "radius {radius}");
                }
                Template::ParkedCorridor => {
                    assert!(within(sc.speed_limit, PARKED_SPEED_LIMIT));
                    let parked: Vec<_> = sc.agents.iter().filter(|a| a.kind == AgentKind::Parked).collect();
                    assert!(parked.len() >= PARKED_COUNT.0 && parked.len() <= PARKED_COUNT.1);
                    assert!(parked.iter().all(|a| within(a.lateral0, PARKED_LATERAL)));
                    assert!(within(gap(parked[0]), PARKED_FIRST_GAP));
                }
            }
        }
    }
    assert_eq!(seen.len(), 7, "every template is sampled");
}

#[test]
fn straight_constant_speed_policy_fails_hard_templates() {
    let cfg = SimConfig::default();
    let mut failures = 0;
    let total = 300;
    for seed in 0..total {
        let sc = generate_scenario(seed, Difficulty::Hard);
        let mut st = initial_state(&sc);
        let mut failed = false;
        for _ in 0..cfg.episode_ticks {
            st = step_world(&sc, &cfg, &st, (st.speed * cfg.dt, 0.0));
            if collision(&sc, &st) || off_road(&sc, &st) {
                failed = true;
                break;
            }
        }
        failures += failed as usize;
    }
    let rate = failures as f64 / total as f64;
    assert!(rate >= 0.8, "discrimination rate {rate}");
}

#[test]
fn expert_is_safe_on_every_template() {
    let cfg = SimConfig::default();
    for seed in 1000..1300 {
        for diff in [Difficulty::Easy, Difficulty::Hard] {
            let sc = generate_scenario(seed, diff);
            let ep = run_expert_episode(&sc, &cfg, cfg.episode_ticks);
            for st in &ep.states {
                assert!(!collision(&sc, st), "seed {seed} {:?} collides at tick {}", sc.template, st.tick);
                assert!(!off_road(&sc, st), "seed {seed} {:?} leaves the road", sc.template);
                assert!(st.speed <= cfg.v_max && st.accel.abs() <= cfg.accel_max + 1e-12);
            }
        }
    }
}

fn empty_straight() -> Scenario {
    let mut seed = 0;
    loop {
        let mut sc = generate_scenario(seed, Difficulty::Easy);
        if sc.template == Template::Straight {
            sc.agents.clear();
            sc.ego_start.lateral = 0.0;
            sc.ego_start.heading_offset = 0.0;
            return sc;
        }
        seed += 1;
    }
}

/// Cell that contains an ego-frame point, found by scanning cell bounds.
fn brute_force_cell(cfg: &SimConfig, x: f64, y: f64) -> (usize, usize) {
    let cell = cfg.grid_extent / cfg.grid_size as f64;
    let top = cfg.grid_extent / 2.0;
    for r in 0..cfg.grid_size {
        for c in 0..cfg.grid_size {
            let (x_hi, y_hi) = (top - r as f64 * cell, top - c as f64 * cell);
            if x <= x_hi && x > x_hi - cell && y <= y_hi && y > y_hi - cell {
                return (r, c);
            }
        }
    }
    panic!("point outside window")
}

#[test]
fn pedestrian_lands_in_brute_force_cell() {
    let cfg = SimConfig::default();
    for &(ahead, left) in &[(7.3, 2.2), (-10.1, -4.6), (20.2, 0.4), (3.1, -1.1)] {
        let mut sc = empty_straight();
        sc.agents.push(Agent::pedestrian(sc.ego_start.s + ahead, left, Behavior::Static));
        let st = initial_state(&sc);
        let (lx, ly) = st.ego.to_local(st.agents[0].pose.x, st.agents[0].pose.y);
        let obs = render_observation(&sc, &cfg, &st);
        let (r, c) = brute_force_cell(&cfg, lx, ly);
        assert_eq!(obs.at(CH_OCCUPANCY, r, c), 1.0, "agent at ({ahead}, {left})");
        let marked = obs.channel(CH_OCCUPANCY).iter().filter(|&&v| v == 1.0).count();
        assert!(marked <= 4, "a 0.8 m walker covers at most a 2×2 block, got {marked}");
    }
}

fn occupied_rows(obs: &futurex::sim::Observation) -> Vec<usize> {
    (0..obs.size).filter(|&r| (0..obs.size).any(|c| obs.at(CH_OCCUPANCY, r, c) == 1.0)).collect()
}

#[test]
fn static_scene_future_equals_current() {
    let cfg = SimConfig::default();
    let mut sc = empty_straight();
    sc.ego_start.speed = 0.0;
    sc.agents.push(Agent::parked(sc.ego_start.s + 7.0, 0.0));
    sc.agents.push(Agent::parked(sc.ego_start.s + 15.0, -3.0));
    let ep = run_expert_episode(&sc, &cfg, cfg.episode_ticks);
    let now = render_observation(&sc, &cfg, &ep.states[0]);
    for k in 1..=4 {
        assert_eq!(ep.future_observation(&cfg, 0, k, 2).unwrap(), now);
    }
}

#[test]
fn moving_lead_shifts_by_speed_times_elapsed_time() {
    let cfg = SimConfig::default();
    let mut sc = empty_straight();
    sc.ego_start.speed = 0.0;
    // a parked car right ahead keeps the expert at rest; the lead drives in the next lane
    sc.agents.push(Agent::parked(sc.ego_start.s + 7.0, 0.0));
    let speed = 3.0;
    let start = 1.2;
    sc.agents.push(Agent::vehicle(sc.ego_start.s + start, 3.5, Behavior::Cruise { speed }));
    let ep = run_expert_episode(&sc, &cfg, cfg.episode_ticks);
    let cell = cfg.grid_extent / cfg.grid_size as f64;
    let (_, lane_col) = brute_force_cell(&cfg, 0.0, 3.5);
    // rows whose centre lies on the lead's 4.5 m body
    let expect = |ahead: f64| -> Vec<usize> {
        (0..cfg.grid_size).filter(|&r| (cfg.grid_extent / 2.0 - (r as f64 + 0.5) * cell - ahead).abs() <= 2.25).collect()
    };
    let lead_rows = |obs: &futurex::sim::Observation| -> Vec<usize> {
        occupied_rows(obs).into_iter().filter(|&r| obs.at(CH_OCCUPANCY, r, lane_col) == 1.0).collect()
    };
    assert_eq!(lead_rows(&render_observation(&sc, &cfg, &ep.states[0])), expect(start));
    for k in 1..=4 {
        let fut = ep.future_observation(&cfg, 0, k, 2).unwrap();
        let shift = speed * (k * 2) as f64 * cfg.dt;
        assert_eq!(lead_rows(&fut), expect(start + shift), "k = {k}");
    }
}

#[test]
fn dataset_generation_is_reproducible_and_split_seventy_thirty() {
    let cfg = SimConfig { grid_size: 8, ..SimConfig::default() };
    let a = generate_dataset(&cfg, 42, 600, 0.3, 0.5, 4, 4, 2).unwrap();
    let b = generate_dataset(&cfg, 42, 600, 0.3, 0.5, 4, 4, 2).unwrap();
    assert_eq!(a, b);
    let hard = a.iter().filter(|r| r.difficulty == Difficulty::Hard).count() as f64 / a.len() as f64;
    assert!((hard - 0.3).abs() <= 0.02, "hard fraction {hard}");
    for r in &a {
        for w in r.label.waypoints.windows(2) {
            let step = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            assert!(step <= cfg.v_max * cfg.dt + 1e-9);
            if step / cfg.dt > 0.5 {
                let dir = (w[1][1] - w[0][1]).atan2(w[1][0] - w[0][0]);
                assert!(futurex::tensor::wrap_angle(dir - w[1][2]).abs() < 0.5);
            }
        }
    }
}
