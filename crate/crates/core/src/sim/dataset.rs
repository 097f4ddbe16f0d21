use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::expert::{run_expert_episode, run_expert_from, ExpertLabel};
use super::geometry::{Obb, Pose};
use super::render::{render_observation, Observation, NUM_CHANNELS};
use super::scenario::{bounds, generate_scenario, uniform, Difficulty, Scenario};
use super::world::{WorldState, PROJECTION_WINDOW};
use super::{SimConfig, EGO_LENGTH, EGO_WIDTH};
use crate::error::{Error, Result};
use crate::io::{hex, ByteReader, ByteWriter};

const MAGIC: &[u8; 4] = b"FXDS";
const VERSION: u32 = 1;
/// Index salt separating the perturbation stream from scenario seeds.
const PERTURB_STREAM: u64 = 0x5045_5254;

/// One training keyframe.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub scenario_id: u64,
    pub difficulty: Difficulty,
    pub tick: u32,
    pub obs: Observation,
    pub label: ExpertLabel,
    /// Observations `k·N` ticks ahead for `k = 1..K`.
    pub futures: Vec<Observation>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetHeader {
    pub version: u32,
    pub digest: [u8; 32],
    pub records: u64,
}

/// Record counts per difficulty class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub records: usize,
    pub easy: usize,
    pub hard: usize,
    pub scenarios: usize,
    pub digest: String,
}

impl Manifest {
    pub fn from_records(records: &[Record], digest: &[u8; 32]) -> Self {
        let easy = records.iter().filter(|r| r.difficulty == Difficulty::Easy).count();
        let mut ids: Vec<u64> = records.iter().map(|r| r.scenario_id).collect();
        ids.dedup();
        Self { records: records.len(), easy, hard: records.len() - easy, scenarios: ids.len(), digest: hex(digest) }
    }

    pub fn path_for(dataset: &Path) -> PathBuf {
        let mut p = dataset.as_os_str().to_owned();
        p.push(".manifest");
        PathBuf::from(p)
    }

    pub fn to_text(&self) -> String {
        format!(
            "format=FXDS\nversion={VERSION}\ndigest={}\nrecords={}\neasy={}\nhard={}\nscenarios={}\n",
            self.digest, self.records, self.easy, self.hard, self.scenarios
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let get = |key: &str| -> Result<String> {
            text.lines()
                .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .map(str::to_owned)
                .ok_or_else(|| Error::Format(format!("manifest missing {key}")))
        };
        let num = |v: String| v.parse::<usize>().map_err(|e| Error::Format(format!("manifest value {v}: {e}")));
        Ok(Self {
            digest: get("digest")?,
            records: num(get("records")?)?,
            easy: num(get("easy")?)?,
            hard: num(get("hard")?)?,
            scenarios: num(get("scenarios")?)?,
        })
    }
}

/// Label ticks of one episode: every `stride` ticks while both the label
/// horizon and the furthest future observation stay inside the episode.
pub fn keyframe_ticks(episode_ticks: usize, horizon: usize, k: usize, n: usize, stride: usize) -> Vec<usize> {
    let reach = horizon.max(k * n);
    if reach > episode_ticks {
        return Vec::new();
    }
    (0..=episode_ticks - reach).step_by(stride.max(1)).collect()
}

/// Seed of the `index`-th scenario of a dataset with base seed `seed`.
pub(crate) fn scenario_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finaliser keeps neighbouring indices uncorrelated
    let mut z = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index.wrapping_add(1).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Whether scenario `index` belongs to the hard class, spreading exactly
/// `round(n·hard_fraction)` hard scenarios over every prefix of length `n`.
pub(crate) fn is_hard(index: u64, hard_fraction: f64) -> bool {
    ((index + 1) as f64 * hard_fraction).floor() > (index as f64 * hard_fraction).floor()
}

/// Scenario set for closed-loop evaluation, split by the same rule as the
/// training data.
pub fn benchmark_scenarios(seed: u64, count: usize, hard_fraction: f64) -> Vec<Scenario> {
    (0..count as u64)
        .map(|i| {
            let difficulty = if is_hard(i, hard_fraction) { Difficulty::Hard } else { Difficulty::Easy };
            generate_scenario(scenario_seed(seed, i), difficulty)
        })
        .collect()
}

/// Keyframe state moved by a bounded lateral, heading and speed offset, or
/// `None` when the drawn state would overlap an agent or leave the road.
fn perturbed(scenario: &Scenario, cfg: &SimConfig, st: &WorldState, rng: &mut ChaCha8Rng) -> Option<WorldState> {
    let (dl, dth, f) = (uniform(rng, bounds::PERTURB_LATERAL), uniform(rng, bounds::PERTURB_HEADING), uniform(rng, bounds::PERTURB_SPEED_FACTOR));
    let (x, y) = st.ego.to_world(0.0, dl);
    let ego = Pose::new(x, y, st.ego.theta + dth);
    let p = scenario.route.project_near(x, y, st.ego_s, PROJECTION_WINDOW);
    if p.lateral.abs() + EGO_WIDTH / 2.0 > scenario.road_half_width {
        return None;
    }
    let body = Obb::new(ego, EGO_LENGTH, EGO_WIDTH);
    if scenario.agents.iter().zip(&st.agents).any(|(a, s)| body.overlaps(&Obb::new(s.pose, a.length, a.width))) {
        return None;
    }
    Some(WorldState { ego, speed: (st.speed * f).min(cfg.v_max), ego_s: p.s, ..st.clone() })
}

/// Generates `count` keyframe records. Keyframes are taken from expert
/// episodes; a `perturb_fraction` share of them is moved off the expert
/// path first, and the label and future observations then follow the
/// expert's execution from the moved state. Pure function of its arguments.
#[allow(clippy::too_many_arguments)]
pub fn generate_dataset(
    cfg: &SimConfig,
    seed: u64,
    count: usize,
    hard_fraction: f64,
    perturb_fraction: f64,
    stride: usize,
    k: usize,
    n: usize,
) -> Result<Vec<Record>> {
    let ticks = keyframe_ticks(cfg.episode_ticks, cfg.horizon, k, n, stride);
    if ticks.is_empty() {
        return Err(Error::Config(format!("episode of {} ticks cannot hold horizon {} and K·N = {}", cfg.episode_ticks, cfg.horizon, k * n)));
    }
    if !(0.0..=1.0).contains(&perturb_fraction) {
        return Err(Error::Config(format!("perturb_fraction {perturb_fraction} outside [0, 1]")));
    }
    let reach = cfg.horizon.max(k * n);
    let mut records = Vec::with_capacity(count);
    let mut index = 0u64;
    while records.len() < count {
        let difficulty = if is_hard(index, hard_fraction) { Difficulty::Hard } else { Difficulty::Easy };
        let sid = scenario_seed(seed, index);
        let scenario = generate_scenario(sid, difficulty);
        let ep = run_expert_episode(&scenario, cfg, cfg.episode_ticks);
        let mut rng = ChaCha8Rng::seed_from_u64(scenario_seed(sid, PERTURB_STREAM));
        for &t in &ticks {
            if records.len() == count {
                break;
            }
            let moved = rng.gen_bool(perturb_fraction).then(|| perturbed(&scenario, cfg, &ep.states[t], &mut rng)).flatten();
            let cont;
            let (src, base) = match moved {
                Some(st) => {
                    cont = run_expert_from(&scenario, cfg, st, reach);
                    (&cont, 0)
                }
                None => (&ep, t),
            };
            let poses: Vec<_> = src.states[base + 1..=base + cfg.horizon].iter().map(|s| s.ego).collect();
            records.push(Record {
                scenario_id: sid,
                difficulty,
                tick: t as u32,
                obs: render_observation(&scenario, cfg, &src.states[base]),
                label: ExpertLabel::from_poses(&src.states[base].ego, &poses),
                futures: (1..=k).map(|j| src.future_observation(cfg, base, j, n)).collect::<Result<_>>()?,
            });
        }
        index += 1;
    }
    Ok(records)
}

fn write_obs(w: &mut ByteWriter, o: &Observation) {
    w.u32(o.size as u32);
    w.f64(o.speed);
    for &v in &o.grid {
        w.f32(v);
    }
}

fn read_obs(r: &mut ByteReader) -> Result<Observation> {
    let size = r.u32()? as usize;
    if size == 0 || size > 4096 {
        return Err(Error::Format(format!("implausible grid size {size}")));
    }
    let speed = r.f64()?;
    let grid = (0..NUM_CHANNELS * size * size).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
    Ok(Observation { size, grid, speed })
}

fn encode_record(rec: &Record) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.u64(rec.scenario_id);
    w.u8(rec.difficulty.as_u8());
    w.u32(rec.tick);
    write_obs(&mut w, &rec.obs);
    w.u32(rec.label.waypoints.len() as u32);
    for p in &rec.label.waypoints {
        for &v in p {
            w.f64(v);
        }
    }
    w.u32(rec.futures.len() as u32);
    for f in &rec.futures {
        write_obs(&mut w, f);
    }
    w.into_inner()
}

fn decode_record(bytes: &[u8]) -> Result<Record> {
    let mut r = ByteReader::new(bytes);
    let scenario_id = r.u64()?;
    let d = r.u8()?;
    let difficulty = Difficulty::from_u8(d).ok_or_else(|| Error::Format(format!("bad difficulty tag {d}")))?;
    let tick = r.u32()?;
    let obs = read_obs(&mut r)?;
    let t = r.u32()? as usize;
    let waypoints = (0..t).map(|_| Ok([r.f64()?, r.f64()?, r.f64()?])).collect::<Result<Vec<_>>>()?;
    let k = r.u32()? as usize;
    let futures = (0..k).map(|_| read_obs(&mut r)).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok(Record { scenario_id, difficulty, tick, obs, label: ExpertLabel { waypoints }, futures })
}

/// Writes the dataset and its manifest next to it.
pub fn write_dataset(path: &Path, digest: &[u8; 32], records: &[Record]) -> Result<Manifest> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(digest)?;
    out.write_all(&(records.len() as u64).to_le_bytes())?;
    for rec in records {
        let bytes = encode_record(rec);
        out.write_all(&(bytes.len() as u64).to_le_bytes())?;
        out.write_all(&bytes)?;
    }
    out.flush()?;
    let manifest = Manifest::from_records(records, digest);
    std::fs::write(Manifest::path_for(path), manifest.to_text())?;
    Ok(manifest)
}

/// Reads a dataset, refusing it if `expected_digest` is given and differs.
pub fn read_dataset(path: &Path, expected_digest: Option<&[u8; 32]>) -> Result<(DatasetHeader, Vec<Record>)> {
    let mut inp = BufReader::new(File::open(path)?);
    let mut head = [0u8; 4 + 4 + 32 + 8];
    inp.read_exact(&mut head).map_err(|_| Error::Format("truncated dataset header".into()))?;
    if &head[..4] != MAGIC {
        return Err(Error::Format("not an FXDS dataset".into()));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let digest: [u8; 32] = head[8..40].try_into().unwrap();
    if let Some(exp) = expected_digest {
        if exp != &digest {
            return Err(Error::DigestMismatch { expected: hex(exp), found: hex(&digest) });
        }
    }
    let count = u64::from_le_bytes(head[40..48].try_into().unwrap());
    let mut records = Vec::with_capacity(count.min(1 << 20) as usize);
    let mut buf = Vec::new();
    for _ in 0..count {
        let mut len = [0u8; 8];
        inp.read_exact(&mut len).map_err(|_| Error::Format("truncated dataset record".into()))?;
        let len = u64::from_le_bytes(len) as usize;
        buf.resize(len, 0);
        inp.read_exact(&mut buf).map_err(|_| Error::Format("truncated dataset record".into()))?;
        records.push(decode_record(&buf)?);
    }
    Ok((DatasetHeader { version, digest, records: count }, records))
}

pub fn read_manifest(dataset: &Path) -> Result<Manifest> {
    Manifest::parse(&std::fs::read_to_string(Manifest::path_for(dataset))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyframes_respect_horizon() {
        assert_eq!(keyframe_ticks(30, 8, 4, 2, 4), vec![0, 4, 8, 12, 16, 20]);
        assert_eq!(keyframe_ticks(10, 8, 4, 4, 1), Vec::<usize>::new());
    }

    #[test]
    fn hard_assignment_is_exact_per_ten() {
        let hard = (0..1000).filter(|&i| is_hard(i, 0.3)).count();
        assert_eq!(hard, 300);
        assert_eq!((0..10).filter(|&i| is_hard(i, 0.3)).count(), 3);
    }

    #[test]
    fn round_trip_and_digest_check() {
        let cfg = SimConfig { grid_size: 8, ..SimConfig::default() };
        let recs = generate_dataset(&cfg, 3, 9, 0.3, 0.5, 4, 4, 2).unwrap();
        assert_eq!(recs.len(), 9);
        assert!(recs.iter().all(|r| r.futures.len() == 4 && r.label.waypoints.len() == 8));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.fxds");
        let digest = [7u8; 32];
        let m = write_dataset(&path, &digest, &recs).unwrap();
        assert_eq!(m.easy + m.hard, m.records);
        assert_eq!(read_manifest(&path).unwrap(), m);
        let (h, back) = read_dataset(&path, Some(&digest)).unwrap();
        assert_eq!(h.records, 9);
        assert_eq!(back, recs);
        assert!(matches!(read_dataset(&path, Some(&[0u8; 32])), Err(Error::DigestMismatch { .. })));
    }

    #[test]
    fn labels_and_futures_follow_the_expert_from_the_keyframe_state() {
        let cfg = SimConfig { grid_size: 8, ..SimConfig::default() };
        let clean = generate_dataset(&cfg, 5, 12, 0.0, 0.0, 4, 4, 2).unwrap();
        let moved = generate_dataset(&cfg, 5, 12, 0.0, 1.0, 4, 4, 2).unwrap();
        let sc = generate_scenario(clean[1].scenario_id, clean[1].difficulty);
        let ep = run_expert_episode(&sc, &cfg, cfg.episode_ticks);
        let t = clean[1].tick as usize;
        for (j, f) in clean[1].futures.iter().enumerate() {
            assert_eq!(f, &ep.future_observation(&cfg, t, j + 1, 2).unwrap());
        }
        assert!(ep.future_observation(&cfg, 28, 1, 4).is_err());
        let differs = clean.iter().zip(&moved).filter(|(a, b)| a.obs != b.obs).count();
        assert!(differs >= 9, "only {differs} of 12 keyframes moved");
        for (a, b) in clean.iter().zip(&moved) {
            assert_eq!((a.scenario_id, a.tick), (b.scenario_id, b.tick));
            if a.obs == b.obs {
                assert_eq!(a, b);
            }
        }
    }
}
