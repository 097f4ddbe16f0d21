use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use futurex::cli::{self, plot, RunConfig, CONFIG_ENV};
use futurex::eval::Trace;
use futurex::model::ThinkMode;
use futurex::sim::Difficulty;

#[derive(Parser)]
#[command(name = "futurex", version, about = "Latent world-model planner with an auto-think gate")]
struct Args {
    /// Flat `key = value` config file; defaults apply to omitted keys.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set segments=2`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the training dataset and its manifest.
    GenData,
    /// Train a checkpoint on the dataset.
    Train {
        /// Continue from the configured checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Closed-loop benchmark of a checkpoint.
    Eval {
        /// Thinking modes to evaluate: auto, all, none.
        #[arg(long, value_delimiter = ',', default_value = "none,all,auto")]
        modes: Vec<String>,
        /// Add wall-clock latency columns (makes output run-dependent).
        #[arg(long)]
        latency: bool,
        /// Write one trace file per scenario.
        #[arg(long)]
        traces: bool,
        /// Evaluate these checkpoints under their recorded configs and write
        /// the reasoning-length table instead.
        #[arg(long, num_args = 1..)]
        sweep: Vec<PathBuf>,
    },
    /// Plan once from the expert's state in one scenario.
    Infer {
        #[arg(long, default_value_t = 0)]
        scenario: u64,
        #[arg(long, default_value = "hard")]
        difficulty: String,
        #[arg(long, default_value_t = 0)]
        tick: usize,
        #[arg(long, default_value = "auto")]
        mode: String,
    },
    /// End-to-end finite-difference check on the miniature model.
    Gradcheck {
        #[arg(long, default_value_t = cli::GRADCHECK_STEP)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 2)]
        samples: usize,
        #[arg(long, default_value_t = 5)]
        seed: u64,
    },
    /// Render a trace as an SVG overlay with a CSV twin.
    Plot {
        trace: PathBuf,
        /// Output SVG; the CSV is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print every config key with its default and description.
    Keys,
}

fn modes(names: &[String]) -> Result<Vec<ThinkMode>> {
    names.iter().map(|m| Ok(ThinkMode::parse(m.trim())?)).collect()
}

fn run(args: Args) -> Result<ExitCode> {
    let cfg = || RunConfig::resolve(args.config.as_deref(), &args.overrides).context("loading configuration");
    match &args.command {
        Command::GenData => {
            let cfg = cfg()?;
            let m = cli::gen_data(&cfg)?;
            println!("wrote {} ({} records: {} easy, {} hard, {} scenarios)", cfg.paths.dataset.display(), m.records, m.easy, m.hard, m.scenarios);
        }
        Command::Train { resume } => {
            let cfg = cfg()?;
            let total = cfg.steps_per_epoch() * cfg.hp.epochs as u64;
            let every = (total / 20).max(1);
            let s = cli::train(&cfg, *resume, |m| {
                if m.step % every == 0 {
                    eprintln!("step {:>6}/{total}  total {:.4}  traj {:.4}  lat {:.4}  auto {:.4}  think {:.3}", m.step, m.total, m.l_traj, m.l_lat, m.l_auto, m.think_rate);
                }
            })?;
            println!("trained steps {}..{}; checkpoint {}", s.start_step, s.final_step, cfg.paths.checkpoint.display());
        }
        Command::Eval { modes: names, latency, traces, sweep } => {
            let cfg = cfg()?;
            let modes = modes(names)?;
            if sweep.is_empty() {
                for r in cli::eval(&cfg, &modes, *latency, *traces)? {
                    println!("{:<16} pdms {:.4}  think-rate {:.3}", r.label, r.mean_pdms, r.think_rate);
                }
            } else {
                for r in cli::k_sweep(&cfg, sweep, &modes, *latency)? {
                    println!("K={} N={} {:<16} pdms {:.4}", r.segments, r.segment_len, r.report.label, r.report.mean_pdms);
                }
            }
            println!("reports in {}", cfg.paths.out_dir.display());
        }
        Command::Infer { scenario, difficulty, tick, mode } => {
            let cfg = cfg()?;
            let difficulty = match difficulty.as_str() {
                "easy" => Difficulty::Easy,
                "hard" => Difficulty::Hard,
                d => bail!("unknown difficulty {d:?}; expected easy or hard"),
            };
            let inf = cli::infer(&cfg, *scenario, difficulty, *tick, ThinkMode::parse(mode)?)?;
            print!("{}", cli::format_inference(&inf));
        }
        Command::Gradcheck { step, tol, samples, seed } => {
            let r = cli::gradcheck(*seed, *samples, *step, *tol)?;
            print!("{}", cli::format_gradcheck(&r));
            if !r.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Plot { trace, out } => {
            let text = std::fs::read_to_string(trace).with_context(|| format!("reading {}", trace.display()))?;
            let (svg, csv) = plot::render(&Trace::parse(&text)?)?;
            std::fs::write(out, svg)?;
            let csv_path = out.with_extension("csv");
            std::fs::write(&csv_path, csv)?;
            println!("wrote {} and {}", out.display(), csv_path.display());
        }
        Command::Keys => {
            for (k, doc, default) in RunConfig::describe() {
                println!("{k:<22} {default:<18} {doc}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
