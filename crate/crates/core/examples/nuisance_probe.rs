//! How much of the pose-irrelevant nuisance code survives in the latents?
//! Trains the same model with and without the bottleneck term and fits a
//! fresh perceptron from each model's latents to the nuisance code.
//!
//! cargo run --release --example nuisance_probe

use ib_odometry::eval::{nuisance_probe, ExperimentConfig, ProbeConfig};
use ib_odometry::model::ModelConfig;
use ib_odometry::train::{train, TrainConfig};
use ib_odometry::world::WorldConfig;

fn main() -> ib_odometry::Result<()> {
    let base = ExperimentConfig {
        world: WorldConfig {
            frames: 60,
            ..Default::default()
        },
        train_sequences: 6,
        model: ModelConfig {
            latent_dim: 8,
            deterministic_dim: 16,
            hidden_dim: 16,
            ..Default::default()
        },
        train: TrainConfig {
            epochs: 6,
            lr_initial: 1e-3,
            ..Default::default()
        },
        ..Default::default()
    };
    let data = base.train_data()?;
    let probe = ProbeConfig {
        hidden: 32,
        epochs: 30,
        train_sequences: 100,
        val_sequences: 25,
        test_sequences: 50,
        ..Default::default()
    };
    println!("gamma   probe_mse  noise_mse  target_var");
    for gamma in [0.0, 0.1] {
        let mut exp = base.clone();
        exp.model.gamma = gamma;
        let (model, _) = train(&data, exp.model_config(), exp.train.clone())?;
        let r = nuisance_probe(&model, &exp.world, &probe)?;
        println!("{gamma:<5} {:>11.4} {:>10.4} {:>11.4}", r.mse, r.noise_mse, r.target_variance);
    }
    Ok(())
}
