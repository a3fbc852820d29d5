//! Trains a small full model with the information-bottleneck term, saves a
//! checkpoint with its optimizer state, then resumes it for a few more epochs.
//!
//! cargo run --release --example train_model [out_dir]

use std::path::PathBuf;

use ib_odometry::model::ModelConfig;
use ib_odometry::train::{load_model, write_metrics_csv, TrainConfig, Trainer};
use ib_odometry::world::{generate_sequences, WorldConfig};

fn main() -> ib_odometry::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ibodo-train"));
    std::fs::create_dir_all(&out)?;
    let world = WorldConfig {
        frames: 60,
        ..Default::default()
    };
    let data = generate_sequences(&world, 0..6)?;
    let model = ModelConfig {
        latent_dim: 8,
        deterministic_dim: 16,
        hidden_dim: 16,
        gamma: 0.1,
        ..Default::default()
    };
    let config = TrainConfig {
        epochs: 8,
        lr_initial: 1e-3,
        lr_milestones: Some(vec![(6, 1e-4)]),
        ..Default::default()
    };
    let ckpt = out.join("model.ckpt");

    let mut trainer = Trainer::new(model.clone(), TrainConfig { epochs: 5, ..config.clone() })?;
    trainer.run(&data, Some(&ckpt))?;
    println!("stopped after {} epochs", trainer.epochs_done());

    let mut trainer = Trainer::resume(&ckpt, &model, config)?;
    trainer.run(&data, Some(&ckpt))?;
    write_metrics_csv(&out.join("metrics.csv"), trainer.metrics())?;
    println!("epoch      loss  pose_term   kl_term        lr");
    for m in trainer.metrics() {
        println!("{:>5} {:>9.4} {:>10.4} {:>9.4} {:>9.1e}", m.epoch, m.loss, m.pose_term, m.kl_term, m.lr);
    }
    let reloaded = load_model(&ckpt)?;
    assert_eq!(&reloaded, trainer.model());
    println!("checkpoint and metrics in {}", out.display());
    Ok(())
}
