use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{benchmark, ModelPlanner, PdmsReport};
use crate::io::hex;
use crate::model::{
    end_to_end_gradcheck, load_checkpoint, save_checkpoint, Checkpoint, FutureX, HyperParams, Inference, InferenceSession, ModelConfig, StepMetrics,
    ThinkMode, TrainSample, Trainer,
};
use crate::sim::{benchmark_scenarios, generate_dataset, generate_scenario, read_dataset, render_observation, run_expert_episode, write_dataset, Difficulty, Manifest, SimConfig};
use crate::tensor::{AdamConfig, GradCheckReport};

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => Ok(fs::create_dir_all(dir)?),
        _ => Ok(()),
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(suffix);
    PathBuf::from(p)
}

/// Canonical config written next to a checkpoint.
pub fn config_path_for(checkpoint: &Path) -> PathBuf {
    sibling(checkpoint, ".config")
}

/// CSV metrics log written next to a checkpoint.
pub fn log_path_for(checkpoint: &Path) -> PathBuf {
    sibling(checkpoint, ".metrics.csv")
}

/// Generates the training dataset and its manifest.
pub fn gen_data(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let d = &cfg.data;
    let records = generate_dataset(&cfg.sim, d.seed, d.train_keyframes, d.hard_fraction, d.perturb_fraction, d.keyframe_stride, cfg.model.segments, cfg.model.segment_len)?;
    ensure_parent(&cfg.paths.dataset)?;
    write_dataset(&cfg.paths.dataset, &cfg.data_digest(), &records)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    /// Step counter the run started from (0 unless resumed).
    pub start_step: u64,
    pub final_step: u64,
    pub first: Option<StepMetrics>,
    pub last: Option<StepMetrics>,
}

const LOG_HEADER: &str = "step,l_traj,l_lat,l_auto,total,think_rate,mean_r,e_init,e_ref,mean_d";

fn log_row(m: &StepMetrics) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        m.step, m.l_traj, m.l_lat, m.l_auto, m.total, m.think_rate, m.mean_r, m.e_init, m.e_ref, m.mean_d
    )
}

/// Keeps the header and the rows up to `step`, dropping any logged after
/// the checkpoint being resumed.
fn truncate_log(text: &str, step: u64) -> String {
    let mut out = format!("{LOG_HEADER}\n");
    for line in text.lines().skip(1) {
        let s: Option<u64> = line.split(',').next().and_then(|v| v.parse().ok());
        if s.is_some_and(|s| s <= step) {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

fn save(trainer: &Trainer, cfg: &RunConfig) -> Result<()> {
    save_checkpoint(&cfg.paths.checkpoint, &Checkpoint::from_model(&trainer.model, Some(&trainer.adam), cfg.model_digest()))
}

/// Trains for `cfg.hp.epochs` epochs, logging every `log_interval` steps and
/// checkpointing every `checkpoint_interval` steps and at the end. With
/// `resume`, continues from the checkpoint's step counter, replaying the
/// same batch order an uninterrupted run would use. A diverged step aborts
/// the run; the last checkpoint on disk is left untouched.
pub fn train(cfg: &RunConfig, resume: bool, mut progress: impl FnMut(&StepMetrics)) -> Result<TrainSummary> {
    cfg.validate()?;
    let (_, records) = read_dataset(&cfg.paths.dataset, Some(&cfg.data_digest()))?;
    if records.is_empty() {
        return Err(Error::Invalid("dataset holds no records".into()));
    }
    let data: Vec<TrainSample> = records.iter().map(TrainSample::from).collect();
    drop(records);
    let mut trainer = Trainer::new(FutureX::new(cfg.model.clone(), cfg.hp.seed)?, cfg.hp.clone())?;
    let ck_path = &cfg.paths.checkpoint;
    let log_path = log_path_for(ck_path);
    ensure_parent(ck_path)?;
    if resume && ck_path.exists() {
        let ck = load_checkpoint(ck_path, Some(&cfg.model_digest()))?;
        ck.apply_to(&mut trainer.model)?;
        trainer.adam = ck
            .adam_state(&trainer.model, AdamConfig { lr: cfg.hp.lr, ..AdamConfig::default() })?
            .ok_or_else(|| Error::Format("checkpoint has no optimizer state to resume from".into()))?;
        let old = fs::read_to_string(&log_path).unwrap_or_default();
        fs::write(&log_path, truncate_log(&old, trainer.step()))?;
    } else {
        fs::write(&log_path, format!("{LOG_HEADER}\n"))?;
    }
    fs::write(config_path_for(ck_path), cfg.to_text())?;
    let start_step = trainer.step();
    let per_epoch = data.len().div_ceil(cfg.hp.batch_size) as u64;
    let total = per_epoch * cfg.hp.epochs as u64;
    let mut log = fs::OpenOptions::new().append(true).open(&log_path)?;
    let (mut first, mut last) = (None, None);
    while trainer.step() < total {
        let step = trainer.step();
        let (epoch, skip) = (step / per_epoch, (step % per_epoch) as usize);
        for idx in trainer.epoch_batches(data.len(), epoch).into_iter().skip(skip) {
            let batch: Vec<&TrainSample> = idx.iter().map(|&i| &data[i]).collect();
            let m = trainer.train_step(&batch)?;
            if m.step % cfg.train.log_interval == 0 {
                std::io::Write::write_all(&mut log, log_row(&m).as_bytes())?;
            }
            if m.step % cfg.train.checkpoint_interval == 0 {
                save(&trainer, cfg)?;
            }
            progress(&m);
            first.get_or_insert(m);
            last = Some(m);
        }
    }
    save(&trainer, cfg)?;
    Ok(TrainSummary { start_step, final_step: trainer.step(), first, last })
}

/// Loads the checkpoint at `path` into a model built from `cfg`, refusing it
/// when the checkpoint was trained under a different configuration.
pub fn load_model(cfg: &RunConfig, path: &Path) -> Result<FutureX> {
    let ck = load_checkpoint(path, Some(&cfg.model_digest())).map_err(|e| match e {
        Error::DigestMismatch { expected, found } => Error::Config(format!(
            "checkpoint {} was trained under a different configuration (digest {found}, current {expected}); \
             pass the config it was trained with (see {})",
            path.display(),
            config_path_for(path).display()
        )),
        e => e,
    })?;
    let mut model = FutureX::new(cfg.model.clone(), cfg.hp.seed)?;
    ck.apply_to(&mut model)?;
    Ok(model)
}

/// Benchmarks the checkpoint under each mode, writing `<label>.txt`,
/// `<label>.csv` and optionally per-scenario traces to `out_dir`, plus a
/// `summary.csv`. Output files are identical across re-runs unless
/// `with_latency` adds wall-clock columns.
pub fn eval(cfg: &RunConfig, modes: &[ThinkMode], with_latency: bool, traces: bool) -> Result<Vec<PdmsReport>> {
    cfg.validate()?;
    let model = load_model(cfg, &cfg.paths.checkpoint)?;
    let scenarios = benchmark_scenarios(cfg.data.eval_seed, cfg.data.eval_scenarios, cfg.data.hard_fraction);
    let out = &cfg.paths.out_dir;
    fs::create_dir_all(out)?;
    let mut reports = Vec::with_capacity(modes.len());
    for &mode in modes {
        let mut planner = ModelPlanner::new(&model, mode, cfg.hp.tau);
        let (report, ts) = benchmark(&mut planner, &scenarios, &cfg.sim, &cfg.eval)?;
        fs::write(out.join(format!("{}.txt", report.label)), report.to_text(with_latency))?;
        fs::write(out.join(format!("{}.csv", report.label)), report.to_csv(with_latency))?;
        if traces {
            let dir = out.join(format!("traces_{}", report.label));
            fs::create_dir_all(&dir)?;
            for (row, t) in report.rows.iter().zip(&ts) {
                fs::write(dir.join(format!("{:03}_{}.fxtrace", row.index, row.template)), t.to_text())?;
            }
        }
        reports.push(report);
    }
    fs::write(out.join("summary.csv"), summary_csv(&reports, with_latency))?;
    Ok(reports)
}

fn summary_csv(reports: &[PdmsReport], with_latency: bool) -> String {
    let mut s = String::from("planner,scenarios,mean_pdms,mean_nc,mean_dac,mean_ep,mean_ttc,mean_comf,think_rate");
    if with_latency {
        s.push_str(",p50_total_ms");
    }
    s.push('\n');
    for r in reports {
        let m = &r.means;
        let _ = write!(s, "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}", r.label, r.rows.len(), r.mean_pdms, m.nc, m.dac, m.ep, m.ttc, m.comf, r.think_rate);
        if with_latency {
            let _ = write!(s, ",{:.4}", r.latency.total.p50);
        }
        s.push('\n');
    }
    s
}

/// One row of the reasoning-length sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub checkpoint: PathBuf,
    pub segments: usize,
    pub segment_len: usize,
    pub report: PdmsReport,
}

/// Evaluates several checkpoints, each under the configuration recorded
/// next to it, on the benchmark selected by `base`. Writes `k_sweep.csv`.
pub fn k_sweep(base: &RunConfig, checkpoints: &[PathBuf], modes: &[ThinkMode], with_latency: bool) -> Result<Vec<SweepRow>> {
    let scenarios = benchmark_scenarios(base.data.eval_seed, base.data.eval_scenarios, base.data.hard_fraction);
    let mut rows = Vec::new();
    for ck in checkpoints {
        let trained = RunConfig::load(&config_path_for(ck))?;
        let model = load_model(&trained, ck)?;
        for &mode in modes {
            let mut planner = ModelPlanner::new(&model, mode, base.hp.tau);
            let (report, _) = benchmark(&mut planner, &scenarios, &base.sim, &base.eval)?;
            rows.push(SweepRow { checkpoint: ck.clone(), segments: trained.model.segments, segment_len: trained.model.segment_len, report });
        }
    }
    let mut s = String::from("checkpoint,K,N,planner,mean_pdms,think_rate");
    if with_latency {
        s.push_str(",p50_total_ms,p50_rollout_ms");
    }
    s.push('\n');
    for r in &rows {
        let _ = write!(s, "{},{},{},{},{:.6},{:.6}", r.checkpoint.display(), r.segments, r.segment_len, r.report.label, r.report.mean_pdms, r.report.think_rate);
        if with_latency {
            let _ = write!(s, ",{:.4},{:.4}", r.report.latency.total.p50, r.report.latency.stages[3].p50);
        }
        s.push('\n');
    }
    fs::create_dir_all(&base.paths.out_dir)?;
    fs::write(base.paths.out_dir.join("k_sweep.csv"), s)?;
    Ok(rows)
}

/// Plans once from the expert's state at `tick` of one scenario.
pub fn infer(cfg: &RunConfig, scenario_seed: u64, difficulty: Difficulty, tick: usize, mode: ThinkMode) -> Result<Inference> {
    let model = load_model(cfg, &cfg.paths.checkpoint)?;
    let scenario = generate_scenario(scenario_seed, difficulty);
    let ep = run_expert_episode(&scenario, &cfg.sim, tick);
    let state = ep.states.last().ok_or_else(|| Error::Invalid("empty expert episode".into()))?;
    let obs = render_observation(&scenario, &cfg.sim, state);
    InferenceSession::new(&model, cfg.hp.tau).infer(&obs, mode)
}

pub fn format_inference(inf: &Inference) -> String {
    let mut s = String::new();
    let d = &inf.decision;
    let _ = writeln!(s, "score d = {:.6}\nbranch = {:?}", d.d, d.mode);
    let _ = writeln!(s, "i,init_x,init_y,init_theta,plan_x,plan_y,plan_theta");
    for (i, (a, b)) in inf.initial.waypoints.iter().zip(&inf.trajectory.waypoints).enumerate() {
        let _ = writeln!(s, "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}", i + 1, a[0], a[1], a[2], b[0], b[1], b[2]);
    }
    let _ = writeln!(s, "latency_ms = {:.4}", inf.timings.total().as_secs_f64() * 1e3);
    s
}

/// Default finite-difference step of the end-to-end check; smaller steps
/// lose digits to roundoff, larger ones to truncation.
pub const GRADCHECK_STEP: f64 = 3e-5;

/// Finite-difference check of the full objective on the miniature model
/// with `samples` generated keyframes. Even-indexed samples take the refined
/// branch of the gated trajectory loss and odd-indexed ones the initial
/// branch, so every parameter reaches the loss.
pub fn gradcheck(seed: u64, samples: usize, h: f64, tol: f64) -> Result<GradCheckReport> {
    let mc = ModelConfig::miniature();
    let sim = SimConfig { grid_size: mc.grid_size, ..SimConfig::default() };
    let data: Vec<TrainSample> = generate_dataset(&sim, seed, samples, 0.5, 0.5, 4, mc.segments, mc.segment_len)?.iter().map(TrainSample::from).collect();
    let model = FutureX::new(mc, seed)?;
    let flags: Vec<bool> = (0..data.len()).map(|i| i % 2 == 0).collect();
    end_to_end_gradcheck(&model, &data, &HyperParams::default(), Some(&flags), h, tol)
}

pub fn format_gradcheck(r: &GradCheckReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "h = {:e}, tolerance = {:e}", r.h, r.tol);
    for e in &r.entries {
        let _ = writeln!(s, "{:<40} {:>6} coords  max rel {:.3e} (analytic {:.3e}, numeric {:.3e})  failures {}  roundoff {}  inactive {}", e.label, e.coords, e.max_rel_err, e.analytic, e.numeric, e.failures, e.roundoff_limited, e.inactive);
    }
    let untouched = r.untouched();
    if !untouched.is_empty() {
        let _ = writeln!(s, "tensors with vanishing gradient: {}", untouched.join(", "));
    }
    let _ = writeln!(
        s,
        "{} / {} coordinates failed ({} outside tolerance but within roundoff); {}",
        r.failures(),
        r.coords(),
        r.roundoff_limited(),
        if r.passed() { "PASS" } else { "FAIL" }
    );
    s
}

/// Hex digests of a config, as reported by `train` and `eval`.
pub fn digests(cfg: &RunConfig) -> (String, String) {
    (hex(&cfg.data_digest()), hex(&cfg.model_digest()))
}
