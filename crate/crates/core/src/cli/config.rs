//! Flat `key = value` run configuration. Every key has a default and a one
//! line description; unknown and repeated keys are rejected. The canonical
//! serialization lists every key in table order, so parse → serialize →
//! parse is a fixed point.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::model::{HyperParams, LatentNorm, ModelConfig, WarmupTarget};
use crate::sim::SimConfig;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "FUTUREX_CONFIG";

/// Dataset generation and benchmark selection.
#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub seed: u64,
    pub train_keyframes: usize,
    pub hard_fraction: f64,
    /// Share of keyframes moved off the expert path before labelling.
    pub perturb_fraction: f64,
    pub keyframe_stride: usize,
    pub eval_seed: u64,
    pub eval_scenarios: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { seed: 1, train_keyframes: 2000, hard_fraction: 0.3, perturb_fraction: 0.5, keyframe_stride: 4, eval_seed: 777, eval_scenarios: 200 }
    }
}

/// Logging and checkpoint cadence of `train`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub log_interval: u64,
    pub checkpoint_interval: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { log_interval: 10, checkpoint_interval: 200 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Paths {
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self { dataset: "runs/train.fxds".into(), checkpoint: "runs/model.fxck".into(), out_dir: "runs/eval".into() }
    }
}

/// Everything a command needs. `grid_size`, `horizon` and `v_max` are shared
/// by the simulator and the model and are kept equal.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub hp: HyperParams,
    pub sim: SimConfig,
    pub eval: EvalConfig,
    pub data: DataConfig,
    pub train: TrainOptions,
    pub paths: Paths,
}

/// Which digest a key contributes to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scope {
    /// Changes the generated dataset (and therefore the model).
    Data,
    /// Changes the trained parameters.
    Model,
    /// Run-time only: evaluation, logging and paths.
    Runtime,
}

/// `(key, scope, description)` for every key, in canonical order.
const KEYS: &[(&str, Scope, &str)] = &[
    ("grid_size", Scope::Data, "observation grid side in cells"),
    ("grid_extent", Scope::Data, "observation window side in metres"),
    ("dt", Scope::Data, "simulator tick in seconds"),
    ("v_max", Scope::Data, "speed clamp and velocity normaliser, m/s"),
    ("accel_max", Scope::Data, "longitudinal acceleration clamp, m/s²"),
    ("yaw_rate_max", Scope::Data, "yaw-rate clamp, rad/s"),
    ("horizon", Scope::Data, "waypoints per trajectory T"),
    ("episode_ticks", Scope::Data, "ticks per recorded episode"),
    ("segments", Scope::Data, "reasoning steps K"),
    ("segment_len", Scope::Data, "waypoints per segment N; K·N = T"),
    ("data_seed", Scope::Data, "base seed of the training scenarios"),
    ("train_keyframes", Scope::Data, "training records to generate"),
    ("hard_fraction", Scope::Data, "share of hard-template scenarios"),
    ("perturb_fraction", Scope::Data, "share of training keyframes moved off the expert path"),
    ("keyframe_stride", Scope::Data, "ticks between recorded keyframes"),
    ("tokens", Scope::Model, "scene tokens L (square number)"),
    ("width", Scope::Model, "latent width C"),
    ("heads", Scope::Model, "attention heads H"),
    ("encoder_layers", Scope::Model, "scene encoder transformer layers"),
    ("wm_layers", Scope::Model, "world model transformer layers"),
    ("ff_mult", Scope::Model, "feed-forward expansion factor"),
    ("traj_scale", Scope::Model, "metres per unit of network position output"),
    ("include_z0", Scope::Model, "summarizer also pools the input latent"),
    ("alpha", Scope::Model, "refinement-gain threshold of the thinking flag"),
    ("lambda1", Scope::Model, "weight of the latent consistency loss"),
    ("lambda2", Scope::Model, "weight of the auto-think loss"),
    ("eps", Scope::Model, "stabiliser of the refinement gain"),
    ("lr", Scope::Model, "Adam learning rate"),
    ("batch_size", Scope::Model, "samples per optimisation step"),
    ("think_warmup_steps", Scope::Model, "initial steps trained on warmup_target instead of the gated loss"),
    ("warmup_target", Scope::Model, "warm-up trajectory supervision: refined or both"),
    ("latent_norm", Scope::Model, "latent ℓ1 reduction: sum or mean"),
    ("seed", Scope::Model, "parameter initialisation and shuffling seed"),
    ("epochs", Scope::Runtime, "passes over the training set"),
    ("tau", Scope::Runtime, "gate threshold for thinking at inference"),
    ("eval_seed", Scope::Runtime, "base seed of the benchmark scenarios"),
    ("eval_scenarios", Scope::Runtime, "benchmark scenario count"),
    ("eval_ticks", Scope::Runtime, "closed-loop ticks per benchmark episode"),
    ("ttc_horizon", Scope::Runtime, "time-to-collision look-ahead, s"),
    ("ttc_step", Scope::Runtime, "time-to-collision sampling step, s"),
    ("accel_limit", Scope::Runtime, "comfort bound on |acceleration|, m/s²"),
    ("jerk_limit", Scope::Runtime, "comfort bound on |jerk|, m/s³"),
    ("log_interval", Scope::Runtime, "steps between metrics log rows"),
    ("checkpoint_interval", Scope::Runtime, "steps between checkpoints"),
    ("dataset", Scope::Runtime, "dataset file path"),
    ("checkpoint", Scope::Runtime, "checkpoint file path"),
    ("out_dir", Scope::Runtime, "directory for reports and traces"),
];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

impl RunConfig {
    /// Keys with their descriptions and default values, in canonical order.
    pub fn describe() -> Vec<(&'static str, &'static str, String)> {
        let d = Self::default();
        KEYS.iter().map(|&(k, _, doc)| (k, doc, d.get(k).expect("table key"))).collect()
    }

    pub fn keys() -> impl Iterator<Item = &'static str> {
        KEYS.iter().map(|k| k.0)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let (m, h, s, e, d, t, p) = (&self.model, &self.hp, &self.sim, &self.eval, &self.data, &self.train, &self.paths);
        Some(match key {
            "grid_size" => s.grid_size.to_string(),
            "grid_extent" => s.grid_extent.to_string(),
            "dt" => s.dt.to_string(),
            "v_max" => s.v_max.to_string(),
            "accel_max" => s.accel_max.to_string(),
            "yaw_rate_max" => s.yaw_rate_max.to_string(),
            "horizon" => s.horizon.to_string(),
            "episode_ticks" => s.episode_ticks.to_string(),
            "segments" => m.segments.to_string(),
            "segment_len" => m.segment_len.to_string(),
            "data_seed" => d.seed.to_string(),
            "train_keyframes" => d.train_keyframes.to_string(),
            "hard_fraction" => d.hard_fraction.to_string(),
            "perturb_fraction" => d.perturb_fraction.to_string(),
            "keyframe_stride" => d.keyframe_stride.to_string(),
            "tokens" => m.tokens.to_string(),
            "width" => m.width.to_string(),
            "heads" => m.heads.to_string(),
            "encoder_layers" => m.encoder_layers.to_string(),
            "wm_layers" => m.wm_layers.to_string(),
            "ff_mult" => m.ff_mult.to_string(),
            "traj_scale" => m.traj_scale.to_string(),
            "include_z0" => m.include_z0.to_string(),
            "alpha" => h.alpha.to_string(),
            "lambda1" => h.lambda1.to_string(),
            "lambda2" => h.lambda2.to_string(),
            "eps" => h.eps.to_string(),
            "lr" => h.lr.to_string(),
            "batch_size" => h.batch_size.to_string(),
            "think_warmup_steps" => h.think_warmup_steps.to_string(),
            "warmup_target" => match h.warmup_target {
                WarmupTarget::Refined => "refined".into(),
                WarmupTarget::Both => "both".into(),
            },
            "latent_norm" => match h.latent_norm {
                LatentNorm::Sum => "sum".into(),
                LatentNorm::Mean => "mean".into(),
            },
            "seed" => h.seed.to_string(),
            "epochs" => h.epochs.to_string(),
            "tau" => h.tau.to_string(),
            "eval_seed" => d.eval_seed.to_string(),
            "eval_scenarios" => d.eval_scenarios.to_string(),
            "eval_ticks" => e.episode_ticks.to_string(),
            "ttc_horizon" => e.ttc_horizon.to_string(),
            "ttc_step" => e.ttc_step.to_string(),
            "accel_limit" => e.accel_limit.to_string(),
            "jerk_limit" => e.jerk_limit.to_string(),
            "log_interval" => t.log_interval.to_string(),
            "checkpoint_interval" => t.checkpoint_interval.to_string(),
            "dataset" => p.dataset.display().to_string(),
            "checkpoint" => p.checkpoint.display().to_string(),
            "out_dir" => p.out_dir.display().to_string(),
            _ => return None,
        })
    }

    /// Sets one key from its textual value. Does not validate cross-key
    /// invariants; see [`RunConfig::validate`].
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let v = v.trim();
        let n = |k| parse_num::<usize>(k, v);
        let f = |k| parse_num::<f64>(k, v);
        let u = |k| parse_num::<u64>(k, v);
        match key {
            "grid_size" => {
                self.sim.grid_size = n(key)?;
                self.model.grid_size = self.sim.grid_size;
            }
            "grid_extent" => self.sim.grid_extent = f(key)?,
            "dt" => self.sim.dt = f(key)?,
            "v_max" => {
                self.sim.v_max = f(key)?;
                self.model.v_max = self.sim.v_max;
            }
            "accel_max" => self.sim.accel_max = f(key)?,
            "yaw_rate_max" => self.sim.yaw_rate_max = f(key)?,
            "horizon" => {
                self.sim.horizon = n(key)?;
                self.model.horizon = self.sim.horizon;
            }
            "episode_ticks" => self.sim.episode_ticks = n(key)?,
            "segments" => self.model.segments = n(key)?,
            "segment_len" => self.model.segment_len = n(key)?,
            "data_seed" => self.data.seed = u(key)?,
            "train_keyframes" => self.data.train_keyframes = n(key)?,
            "hard_fraction" => self.data.hard_fraction = f(key)?,
            "perturb_fraction" => self.data.perturb_fraction = f(key)?,
            "keyframe_stride" => self.data.keyframe_stride = n(key)?,
            "tokens" => self.model.tokens = n(key)?,
            "width" => self.model.width = n(key)?,
            "heads" => self.model.heads = n(key)?,
            "encoder_layers" => self.model.encoder_layers = n(key)?,
            "wm_layers" => self.model.wm_layers = n(key)?,
            "ff_mult" => self.model.ff_mult = n(key)?,
            "traj_scale" => self.model.traj_scale = f(key)?,
            "include_z0" => self.model.include_z0 = parse_bool(key, v)?,
            "alpha" => self.hp.alpha = f(key)?,
            "lambda1" => self.hp.lambda1 = f(key)?,
            "lambda2" => self.hp.lambda2 = f(key)?,
            "eps" => self.hp.eps = f(key)?,
            "lr" => self.hp.lr = f(key)?,
            "batch_size" => self.hp.batch_size = n(key)?,
            "think_warmup_steps" => self.hp.think_warmup_steps = u(key)?,
            "warmup_target" => {
                self.hp.warmup_target = match v {
                    "refined" => WarmupTarget::Refined,
                    "both" => WarmupTarget::Both,
                    _ => return Err(Error::Config(format!("warmup_target: expected refined or both, got {v:?}"))),
                }
            }
            "latent_norm" => {
                self.hp.latent_norm = match v {
                    "sum" => LatentNorm::Sum,
                    "mean" => LatentNorm::Mean,
                    _ => return Err(Error::Config(format!("latent_norm: expected sum or mean, got {v:?}"))),
                }
            }
            "seed" => self.hp.seed = u(key)?,
            "epochs" => self.hp.epochs = n(key)?,
            "tau" => self.hp.tau = f(key)?,
            "eval_seed" => self.data.eval_seed = u(key)?,
            "eval_scenarios" => self.data.eval_scenarios = n(key)?,
            "eval_ticks" => self.eval.episode_ticks = n(key)?,
            "ttc_horizon" => self.eval.ttc_horizon = f(key)?,
            "ttc_step" => self.eval.ttc_step = f(key)?,
            "accel_limit" => self.eval.accel_limit = f(key)?,
            "jerk_limit" => self.eval.jerk_limit = f(key)?,
            "log_interval" => self.train.log_interval = u(key)?,
            "checkpoint_interval" => self.train.checkpoint_interval = u(key)?,
            "dataset" => self.paths.dataset = v.into(),
            "checkpoint" => self.paths.checkpoint = v.into(),
            "out_dir" => self.paths.out_dir = v.into(),
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("override {kv:?} is not key=value")))?;
        self.set(k.trim(), v)
    }

    /// Parses a config file body over the defaults. Blank lines and `#`
    /// comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {k:?}", no + 1)));
            }
            cfg.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text listing every key.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in Self::keys() {
            let _ = writeln!(s, "{k} = {}", self.get(k).expect("table key"));
        }
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Resolves the base config (explicit path, else the environment
    /// variable, else defaults) and applies `overrides` in order.
    pub fn resolve(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let mut cfg = match path.map(Path::to_path_buf).or(env) {
            Some(p) => Self::load(&p)?,
            None => Self::default(),
        };
        for kv in overrides {
            cfg.apply_override(kv)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.hp.validate()?;
        self.eval.validate()?;
        let s = &self.sim;
        if !(s.dt > 0.0 && s.grid_extent > 0.0 && s.accel_max > 0.0 && s.yaw_rate_max > 0.0) || s.grid_size == 0 {
            return Err(Error::Config("simulator constants must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.data.hard_fraction) {
            return Err(Error::Config("hard_fraction must lie in [0,1]".into()));
        }
        if !(0.0..=1.0).contains(&self.data.perturb_fraction) {
            return Err(Error::Config("perturb_fraction must lie in [0,1]".into()));
        }
        if self.data.keyframe_stride == 0 || self.train.log_interval == 0 || self.train.checkpoint_interval == 0 {
            return Err(Error::Config("stride and intervals must be positive".into()));
        }
        Ok(())
    }

    fn digest_of(&self, scopes: &[Scope]) -> [u8; 32] {
        let mut h = Sha256::new();
        for &(k, scope, _) in KEYS {
            if scopes.contains(&scope) {
                h.update(format!("{k}={}\n", self.get(k).expect("table key")).as_bytes());
            }
        }
        h.finalize().into()
    }

    /// Digest over every key that changes the generated dataset.
    pub fn data_digest(&self) -> [u8; 32] {
        self.digest_of(&[Scope::Data])
    }

    /// Digest over every key that changes the trained parameters. Run-time
    /// keys (epochs, τ, evaluation constants, cadence, paths) are excluded so
    /// a checkpoint can be resumed or evaluated under different settings.
    pub fn model_digest(&self) -> [u8; 32] {
        self.digest_of(&[Scope::Data, Scope::Model])
    }

    /// Training steps in one epoch.
    pub fn steps_per_epoch(&self) -> u64 {
        self.data.train_keyframes.div_ceil(self.hp.batch_size) as u64
    }
}
