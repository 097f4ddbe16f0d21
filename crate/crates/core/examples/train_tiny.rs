//! Generates a small dataset and trains the miniature model for a few
//! epochs, printing one metrics line per epoch.

use futurex::model::{FutureX, HyperParams, ModelConfig, Trainer, TrainSample};
use futurex::sim::{generate_dataset, SimConfig};

fn main() -> futurex::Result<()> {
    let mc = ModelConfig::miniature();
    let sim = SimConfig { grid_size: mc.grid_size, ..SimConfig::default() };
    let records = generate_dataset(&sim, 11, 96, 0.3, 0.5, 4, mc.segments, mc.segment_len)?;
    let data: Vec<TrainSample> = records.iter().map(TrainSample::from).collect();
    let hp = HyperParams { batch_size: 16, think_warmup_steps: 12, ..HyperParams::default() };
    let mut trainer = Trainer::new(FutureX::new(mc, 11)?, hp)?;
    for epoch in 0..6 {
        let metrics = trainer.train_epoch(&data, epoch, |_| {})?;
        let m = metrics.last().unwrap();
        println!(
            "epoch {epoch} step {:>3}  total {:8.3}  traj {:7.3}  lat {:8.3}  auto {:.3}  mean r {:+.3}  think {:.2}",
            m.step, m.total, m.l_traj, m.l_lat, m.l_auto, m.mean_r, m.think_rate
        );
    }
    Ok(())
}
